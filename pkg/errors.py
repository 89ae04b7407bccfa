"""
Error categories shared by the numerical routes and the command line.

The CLI turns `category` into the exit status and into the
`error_category` field of the metadata sidecar.
"""


class CflError(Exception):
    """Base class for failures that carry a machine-readable category."""

    category = "internal"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(CflError, ValueError):
    category = "config"


class ConvergenceError(CflError, RuntimeError):
    """n_max tails, grids, norm drift or route self-checks out of tolerance."""

    category = "convergence"


class OutputError(CflError, OSError):
    category = "io"


class GoldenError(CflError):
    category = "golden"


EXIT_CODES = {
    "config": 2,
    "convergence": 3,
    "io": 4,
    "golden": 5,
    "internal": 1,
}
