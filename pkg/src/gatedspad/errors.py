class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ModelError(RuntimeError):
    """A numerical or simulation invariant was violated at run time."""


class DegenerateConstellationError(ValueError):
    """Symbol PMFs are not ordered by strictly increasing mean."""
