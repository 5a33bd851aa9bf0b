"""
Exception hierarchy for the solver.

Numerical kernels raise these; the orchestration layer in logic.py catches
them, logs through its log_callback and maps them to exit codes.
"""

from constants import EXIT_CONFIG, EXIT_FAILURE, EXIT_GCL_INFEASIBLE, EXIT_INTEGRATION


class SolverError(Exception):
    """Base class for every failure the solver reports on purpose."""

    exit_code = EXIT_FAILURE


class ContractViolation(SolverError, ValueError):
    """An argument has the wrong shape, range or type for the operation."""


class ConfigError(SolverError):
    """Invalid run configuration, optionally pinned to a line/column."""

    exit_code = EXIT_CONFIG

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        location = ""
        if path is not None:
            location = f"{path}"
        if line is not None:
            location += f":{line}" if location else f"line {line}"
            if column is not None:
                location += f":{column}"
        super().__init__(f"{location}: {message}" if location else message)


class MeshError(SolverError):
    """Mesh generation produced an invalid element."""

    def __init__(self, message, element=None):
        self.element = element
        if element is not None:
            message = f"element {element}: {message}"
        super().__init__(message)


class GeometryError(MeshError):
    """Non-positive metric Jacobian or otherwise unusable geometry."""


class GclInfeasibleError(SolverError):
    """The metric optimization problem has no solution for an element."""

    exit_code = EXIT_GCL_INFEASIBLE

    def __init__(self, message, element=None):
        self.element = element
        if element is not None:
            message = f"element {element}: {message}"
        super().__init__(message)


class StateError(SolverError):
    """Non-physical state (non-positive density or pressure, bad entropy variables)."""

    def __init__(self, message, element=None, node=None):
        self.element = element
        self.node = node
        where = []
        if element is not None:
            where.append(f"element {element}")
        if node is not None:
            where.append(f"node {tuple(int(i) for i in node)}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class IntegrationError(SolverError):
    """Time integration could not continue."""

    exit_code = EXIT_INTEGRATION

    def __init__(self, message, time=None, stage=None, element=None):
        self.time = time
        self.stage = stage
        self.element = element
        details = []
        if time is not None:
            details.append(f"t={time:.6e}")
        if stage is not None:
            details.append(f"stage {stage}")
        if element is not None:
            details.append(f"element {element}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
