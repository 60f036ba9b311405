"""Exception hierarchy shared across the solver components."""


class AlefsiError(Exception):
    """Base class for all solver errors."""


class ConfigError(AlefsiError):
    """Invalid configuration input (bad key, bad value, bad range)."""


class ResourceError(AlefsiError):
    """Requested problem size exceeds the documented desk-scale limits."""


class MeshDegenerationError(AlefsiError):
    """The ALE map lost injectivity (det F <= 0) at a quadrature point.

    Carries the cell index and the offending determinant value.
    """

    def __init__(self, cell: int, det: float):
        super().__init__(f"mesh degenerated: det F = {det:.3e} <= 0 in cell {cell}")
        self.cell = cell
        self.det = det


class NonconvergenceError(AlefsiError):
    """An iterative solver exhausted its iteration budget.

    The ``best`` attribute holds the last iterate, ``history`` the recorded
    residual norms, and ``stats`` optional solver statistics.
    """

    def __init__(self, message, best=None, history=None, stats=None):
        super().__init__(message)
        self.best = best
        self.history = history if history is not None else []
        self.stats = stats


class FactorizationError(AlefsiError):
    """A direct factorization hit a singular block or Schur complement."""


class QueryError(AlefsiError):
    """A point query fell outside the mesh region it was restricted to."""
