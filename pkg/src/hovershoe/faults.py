"""Exceptions shared across the simulation and planning layers."""


class SimulationFault(RuntimeError):
    """A run-terminating fault. ``state`` carries a snapshot for the dump."""

    kind = "fault"

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NumericalDivergence(SimulationFault):
    kind = "numerical divergence"


class RiderFell(SimulationFault):
    kind = "rider fell"


class PlanningError(RuntimeError):
    pass


class Unreachable(PlanningError):
    """Goal cell is not connected to the start cell."""


class NoFeasibleTrajectory(PlanningError):
    """Local planner could not produce a trajectory passing its hard checks."""


class ConfigError(ValueError):
    """Scenario / sweep file problem. ``where`` names the offending field or line."""

    def __init__(self, message, where=None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
