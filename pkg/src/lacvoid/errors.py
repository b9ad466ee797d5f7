"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An array has the wrong rank or mismatched extents."""


class NonFiniteError(ValueError):
    """An array contains NaN or Inf where finite values are required."""


class ContainerError(ValueError):
    """A tensor container file is malformed or inconsistent."""


class TraceError(ValueError):
    """A trace stream is malformed or violates a record invariant."""
