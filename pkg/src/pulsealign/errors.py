"""Exception types shared across the package."""


class DataError(ValueError):
    """Invalid input data: malformed file, broken invariant, degenerate stream."""


class GridUnderflowError(DataError):
    """Allocation needed a synthetic timestamp below the generated grid."""
