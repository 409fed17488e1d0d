"""Exception roots shared by every sparsenet module.

Each root carries the process exit code the CLI reports when an error of
that family escapes a command.
"""


class SparseNetError(Exception):
    """Base exception for sparsenet errors."""

    exit_code = 1


class ValidationError(SparseNetError):
    """Input data, parameters or configuration failed validation."""

    exit_code = 2


class ConvergenceError(SparseNetError):
    """An iterative solver did not reach its stopping rule."""

    exit_code = 3


class AgreementError(SparseNetError):
    """Two methods that must agree produced different answers."""

    exit_code = 4
