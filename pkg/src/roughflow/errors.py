"""Exception hierarchy.

``NumericalFailure`` subclasses are the errors the CLI maps to exit status 3;
plain ``ValueError`` is used for invalid arguments.
"""


class NumericalFailure(RuntimeError):
    """A computation could not be carried out for numerical reasons."""


class FlowBlowUpError(NumericalFailure):
    def __init__(self, time, point_index, magnitude, threshold):
        self.time = time
        self.point_index = point_index
        self.magnitude = magnitude
        super().__init__(
            f"flow blow-up at t={time:.6g}: |theta|={magnitude:.3e} exceeds {threshold:.0e} "
            f"(initial point #{point_index})"
        )


class FactorizationError(NumericalFailure):
    def __init__(self, hurst, n_points):
        self.hurst = hurst
        self.n_points = n_points
        super().__init__(
            f"fBm covariance is not positive definite after jitter (H={hurst}, N={n_points})"
        )


class DomainTooSmallError(ValueError):
    def __init__(self, required_radius, available_radius):
        self.required_radius = required_radius
        super().__init__(
            f"spatial grid too small: need radius {required_radius:.6g}, have {available_radius:.6g}"
        )
