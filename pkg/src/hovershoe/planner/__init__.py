"""Occupancy mapping, costmap, Dijkstra global planner and timed-elastic-band local planner."""
