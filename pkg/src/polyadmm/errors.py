"""Exception types and numerical tolerances shared across the package."""

# activity of max-affine pieces / domain rows (relative)
TAU_ACT = 1e-9
# geometric membership
TAU_GEOM = 1e-9
# linear algebra (orthonormality, idempotence, eigenvalue signs)
TAU_LIN = 1e-10
# optimality / KKT residuals
TAU_OPT = 1e-8
# relative-interior slack
TAU_RI = 1e-9


class UsageError(ValueError):
    """Bad arguments: dimension mismatch, unknown names, malformed configs."""


class PreconditionError(ValueError):
    """An operation was called at a point outside its domain of validity."""


class InfeasibleError(ValueError):
    """A construction invariant failed (empty domain or set)."""


class CapabilityError(RuntimeError):
    """No available solver handles the requested problem."""


class SolverError(RuntimeError):
    """An inner solver failed to converge.

    ``residual`` carries the last KKT/optimality residual and ``last`` the
    last iterate, when available.
    """

    def __init__(self, msg, residual=None, last=None):
        super().__init__(msg if residual is None else f"{msg} (residual={residual:.3e})")
        self.residual = residual
        self.last = last
