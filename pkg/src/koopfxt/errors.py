"""Exception types raised across the package."""


class KoopFxtError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KoopFxtError, ValueError):
    pass


class DimensionError(KoopFxtError, ValueError):
    pass


class DegenerateLiftingError(KoopFxtError):
    """The basis Jacobian lost column rank, so the pseudoinverse is not a left inverse."""

    def __init__(self, sigma_min: float, sigma_max: float):
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        super().__init__(
            f"basis Jacobian is column-rank deficient: smallest singular value "
            f"{sigma_min:.3e} (largest {sigma_max:.3e})"
        )


class NumericalBlowupError(KoopFxtError):
    def __init__(self, nu_norm: float, dt: float):
        self.nu_norm = nu_norm
        self.dt = dt
        super().__init__(
            f"non-finite adaptation update (|nu| = {nu_norm:.3e}, dt = {dt:.3e}); "
            "reduce dt or use the 'flow' integrator"
        )


class IllConditionedDataError(KoopFxtError):
    def __init__(self, min_eig: float):
        self.min_eig = min_eig
        super().__init__(f"sample Gram matrix is singular (smallest eigenvalue {min_eig:.3e})")


class SolverFailureError(KoopFxtError):
    pass


class DivergenceError(KoopFxtError):
    pass


class ControllerError(KoopFxtError):
    def __init__(self, message: str, state=None):
        self.state = state
        super().__init__(message if state is None else f"{message}; state = {list(state)}")
