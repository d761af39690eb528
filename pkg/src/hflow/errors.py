"""Exception hierarchy shared across the package."""


class HFlowError(Exception):
    """Base class for all hflow errors."""


class NotStable(HFlowError):
    """3-form is not of negative-invariant stable type (no almost complex structure)."""


class NotPrimitive(HFlowError):
    """gamma ^ omega != 0, so the pair is not compatible."""


class NotClosed(HFlowError):
    """Form expected to be closed has d != 0."""


class NotInvariantClass(HFlowError):
    """Closed 3-form does not split as a*e135 + b*e246 + exact part."""


class NotHalfFlat(HFlowError):
    """A half-flat precondition failed; carries the list of failures."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("half-flat preconditions failed: " + "; ".join(self.failures))


class IndefiniteMetric(HFlowError):
    """Induced symmetric form is not positive definite."""


class NotPositiveDefinite(HFlowError):
    """Metric input to a curvature routine is not positive definite."""


class SingularMetric(HFlowError):
    """Metric is not invertible."""


class NonPositiveMetricFunctions(HFlowError):
    """State cannot be expressed through positive metric functions a_i, b_i."""


class DegenerateStructure(HFlowError):
    """lambda >= 0 (or r >= 0): the stable-form machinery degenerates."""


class SylvesterDegenerate(HFlowError):
    """Linear system for Pdot is numerically singular (eigenvalue pair of P sums to ~0)."""


class DiagonalDegenerate(HFlowError):
    """Diagonal momentum update system is singular."""


class ZeroMomentum(HFlowError):
    """Some p_i = 0 where the reduced equations divide by it."""


class ZeroMetricFunction(HFlowError):
    """Some a_i or b_i = 0 where the reduced equations divide by it."""


class NotNormalized(HFlowError):
    """Initial data violates the volume-normalization constraint; carries the residual."""

    def __init__(self, residual):
        self.residual = float(residual)
        super().__init__(f"normalization residual {self.residual:.6g}")


class NonPositiveDeterminant(HFlowError):
    """Adjugate square root requires det > 0."""
