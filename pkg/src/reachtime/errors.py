class GeometryError(ValueError):
    """Invalid geometric input (empty sets, dimension mismatch, non-unit directions)."""


class PropagationError(RuntimeError):
    """Set propagation could not proceed, e.g. a singular one-step matrix."""


class StructuralError(RuntimeError):
    """Fronts violate the nesting/expansion structure the time surface needs."""


class UnsupportedError(RuntimeError):
    """Requested feature is outside what the current system supports."""
