"""Exception types shared across the lab."""


class GeometryError(RuntimeError):
    """Base class for geometric failure modes (as opposed to bad arguments)."""


class ChartExitError(GeometryError):
    """A computed point left the model's chart box.

    Attributes:
        model_name: name of the offending model.
        point: first offending chart point (length-3 array or tuple).
    """

    def __init__(self, model_name, point, context=""):
        self.model_name = model_name
        self.point = tuple(float(c) for c in point)
        msg = f"point {self.point} left the chart box of model '{model_name}'"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class ConjugatePointError(GeometryError):
    """det A(s) vanished along a radial geodesic before the requested radius."""

    def __init__(self, radius, requested):
        self.radius = float(radius)
        self.requested = float(requested)
        super().__init__(
            f"conjugate point near radius {radius:.6g} "
            f"(requested radius {requested:.6g}); geodesic-sphere data undefined beyond it"
        )


class ImmersionError(GeometryError):
    """The tube map failed to be an immersion (det I <= 0) at some node."""


class NonUnitError(ValueError):
    """A direction that must be unit length in the model metric is not."""

    def __init__(self, norm):
        self.norm = float(norm)
        super().__init__(
            f"direction must be unit length in the model metric "
            f"(got |u| = {norm!r}); normalize explicitly, it is not done silently"
        )


class DegeneratePlaneError(ValueError):
    """Two tangent vectors that must span a 2-plane are (nearly) parallel."""


class RadialConstancyError(GeometryError):
    """ricci(gamma', gamma') - tau drifts along the geodesic.

    The sphere-series recursion assumes this combination is constant along each
    radial geodesic; models violating it are refused rather than fitted.
    """


class UnknownModelError(KeyError):
    """Requested model name is not in the registry."""

    def __init__(self, name, known):
        self.model_name = name
        self.known = tuple(known)
        super().__init__(f"unknown model '{name}'; known models: {', '.join(self.known)}")
