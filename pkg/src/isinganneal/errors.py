"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, the numeric
failures -> 3.
"""


class ConfigError(ValueError):
    """Invalid configuration or parameters (bad sizes, ranges, cross-field rules)."""


class NumericError(RuntimeError):
    """Numerical corruption detected (non-finite matrices, out-of-range expectations)."""


class NonRepresentableError(NumericError):
    """State cannot be represented in the pairing-matrix parametrization.

    Raised when the vacuum component of the requested state vanishes, e.g.
    the classical ground state at zero transverse field.
    """


class IntegrationError(NumericError):
    """ODE integration failed (step-size underflow, NaN, norm blow-up).

    Carries the time and step size at failure for diagnostics.
    """

    def __init__(self, message, t=None, step=None):
        super().__init__(message)
        self.t = t
        self.step = step
