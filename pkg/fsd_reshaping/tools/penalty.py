"""
Exact penalty reformulations of the dominance-constrained problem.

Two families, both evaluated after the Euclidean projection y = pi_X(x):

Discontinuous penalties:
    value = f(y) - |x - y|                      if the residual at y <= 0
    value = f(y) - c - residual(y) - |x - y|     otherwise
The drop of at least c at the constraint boundary makes every infeasible
point worse than the best feasible one, so both problems share their
global maximizers.

Projective penalties:
    value = f(p) - |p - y| - |x - y|
where p is the star projection of y along the segment to a feasible
anchor x0: p = (1 - lam) x0 + lam y with lam the largest weight keeping the
dominance constraint satisfied. With a riskless anchor and a quantile-form
reference, lam has a closed form; otherwise it is bisected.

Design Decision:
    Every projection verifies its returned point with the exact residual
    and backs off lam when rounding would leave it infeasible. The
    returned point is always feasible.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np

from fsd_reshaping.errors import (
    InfeasibleAnchorError,
    InvalidParameterError,
    NonFiniteObjectiveError,
    PreconditionError,
)
from fsd_reshaping.tools.distribution import (
    ArrayLike,
    Objective,
    ScenarioMatrix,
    StepQuantile,
    Weights,
    as_weights,
    indicator_of_sorted,
    portfolio_returns,
    quantile_of_sorted,
    riskless_column,
)
from fsd_reshaping.tools.dominance import (
    FeasibleBox,
    ReferenceProfile,
    g_of_sorted,
    h_of_sorted,
)

logger = logging.getLogger(__name__)

MAX_BISECTION_STEPS = 60
MAX_BACKOFF_STEPS = 60


class PenaltyVariant(str, Enum):
    DISCONTINUOUS_G = "discontinuous_g"
    DISCONTINUOUS_H = "discontinuous_h"
    PROJECTIVE_G = "projective_g"
    PROJECTIVE_H = "projective_h"
    PROJECTIVE_H_ANALYTIC = "projective_h_analytic"

    @property
    def is_projective(self) -> bool:
        return self.value.startswith("projective")

    @property
    def uses_quantiles(self) -> bool:
        return self in (
            PenaltyVariant.DISCONTINUOUS_H,
            PenaltyVariant.PROJECTIVE_H,
            PenaltyVariant.PROJECTIVE_H_ANALYTIC,
        )


@dataclass(frozen=True)
class PenaltySpec:
    variant: PenaltyVariant
    c: float
    anchor: Weights
    r: Optional[float] = None  # riskless return of the anchor, when it has one
    lambda_tolerance: float = 1e-9
    literal_offset: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", PenaltyVariant(self.variant))
        anchor = np.array(self.anchor, dtype=float)
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)
        if not np.isfinite(self.c):
            raise InvalidParameterError("penalty offset c must be finite")
        if not 0.0 < self.lambda_tolerance < 1.0:
            raise InvalidParameterError("lambda_tolerance must lie in (0, 1)")


def _residual_fn(variant: PenaltyVariant) -> Callable[[np.ndarray, ReferenceProfile], float]:
    return h_of_sorted if variant.uses_quantiles else g_of_sorted


def anchor_return(s: ScenarioMatrix, anchor: ArrayLike) -> Optional[float]:
    """Constant return of the anchor portfolio, or None if it is risky."""
    r0 = portfolio_returns(s, anchor)
    return float(r0[0]) if np.ptp(r0) == 0.0 else None


def make_penalty_spec(
    s: ScenarioMatrix,
    ref: ReferenceProfile,
    box: FeasibleBox,
    obj: Objective,
    variant: Union[str, PenaltyVariant] = PenaltyVariant.DISCONTINUOUS_G,
    anchor: Optional[ArrayLike] = None,
    c: Optional[float] = None,
    margin: float = 0.0,
    literal_offset: bool = False,
    lambda_tolerance: float = 1e-9,
) -> PenaltySpec:
    """Validated PenaltySpec.

    Args:
        anchor: feasible point x0; defaults to the all-in riskless portfolio
            when the scenario matrix has a constant column
        c: penalty offset; defaults to obj(x0) + margin, and may not be lower

    Raises:
        InfeasibleAnchorError: x0 violates the dominance or box constraints
        PreconditionError: no anchor available, or Q_ref(1) >= r for the
            closed-form projection
    """
    variant = PenaltyVariant(variant)

    # Step 1: resolve the anchor
    if anchor is None:
        j = riskless_column(s)
        if j is None:
            raise PreconditionError("no anchor given and no riskless column to default to")
        anchor = np.zeros(s.n)
        anchor[j] = 1.0
    x0 = as_weights(s, anchor)

    # Step 2: the anchor must be feasible
    r0 = np.sort(portfolio_returns(s, x0))
    res = _residual_fn(variant)(r0, ref)
    if res > 0.0:
        raise InfeasibleAnchorError(f"anchor violates the dominance constraint (residual {res:.6g})")
    if not box.contains(x0):
        raise InfeasibleAnchorError("anchor lies outside the budget box")

    # Step 3: closed form needs a riskless anchor strictly above the reference
    r = anchor_return(s, x0)
    if variant is PenaltyVariant.PROJECTIVE_H_ANALYTIC:
        if r is None:
            raise PreconditionError("closed-form projection needs a riskless anchor")
        if not ref.top_quantile < r:
            raise PreconditionError(
                f"closed-form projection needs Q_ref(1) < r, got {ref.top_quantile:.6g} >= {r:.6g}"
            )

    # Step 4: offset
    floor = indicator_of_sorted(r0, obj)
    if c is None:
        c = floor + margin
    elif c < floor:
        raise InvalidParameterError(f"penalty offset c={c:.6g} is below obj(anchor)={floor:.6g}")

    return PenaltySpec(variant, float(c), x0, r, lambda_tolerance, literal_offset)


def _project_simplex(v: np.ndarray, radius: float) -> np.ndarray:
    """Projection onto {z >= 0, sum z = radius} by sort and threshold."""
    if radius <= 0.0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (cssv - radius))[0][-1]
    theta = (cssv[rho] - radius) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_box(x: ArrayLike, box: FeasibleBox) -> Weights:
    """Euclidean projection onto X = {sum x <= 1, x >= c}."""
    x = np.asarray(x, dtype=float)
    if box.contains(x, tol=0.0):
        return x.copy()
    shifted = x - box.lower
    clipped = np.maximum(shifted, 0.0)
    if clipped.sum() <= box.radius:
        return clipped + box.lower
    return _project_simplex(shifted, box.radius) + box.lower


def _bisect(feasible_at: Callable[[float], bool], tol: float) -> float:
    """Largest certified lam in [0, 1]: lo stays feasible, hi infeasible."""
    lo, hi = 0.0, 1.0
    for _ in range(MAX_BISECTION_STEPS):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if feasible_at(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _segment_point(anchor: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    return (1.0 - lam) * anchor + lam * x


def _certify(
    s: ScenarioMatrix,
    x: np.ndarray,
    ref: ReferenceProfile,
    spec: PenaltySpec,
    lam: float,
    residual_fn,
) -> Tuple[np.ndarray, float]:
    """Back lam off until the actual point has residual <= 0.

    Raises:
        InfeasibleAnchorError: lam reached 0 and the anchor itself violates
            the constraint
    """
    for k in range(MAX_BACKOFF_STEPS):
        point = _segment_point(spec.anchor, x, lam)
        if residual_fn(np.sort(portfolio_returns(s, point)), ref) <= 0.0:
            return point, lam
        lam = max(0.0, lam - max(lam * 1e-15, 1e-16) * 2.0 ** k)
        if lam == 0.0:
            break
    res = residual_fn(np.sort(portfolio_returns(s, spec.anchor)), ref)
    if res > 0.0:
        raise InfeasibleAnchorError(f"anchor violates the dominance constraint (residual {res:.6g})")
    return spec.anchor.copy(), 0.0


def star_project_G(
    s: ScenarioMatrix, x: ArrayLike, ref: ReferenceProfile, spec: PenaltySpec
) -> Tuple[Weights, float]:
    """Move x toward the anchor until G <= 0; returns (point, lam)."""
    x = as_weights(s, x)
    rx = portfolio_returns(s, x)
    rx_sorted = np.sort(rx)
    if g_of_sorted(rx_sorted, ref) <= 0.0:
        return x.copy(), 1.0

    if spec.r is not None:
        # riskless anchor: F_lam(t) = F_x((t - (1 - lam) r) / lam), no re-sort
        m = rx_sorted.shape[0]

        def feasible_at(lam: float) -> bool:
            cut = (ref.cdf_jumps - (1.0 - lam) * spec.r) / lam
            below = np.searchsorted(rx_sorted, cut, side="left") / m
            return bool(np.max(below - ref.cdf_at_jumps) <= 0.0)
    else:
        r0 = portfolio_returns(s, spec.anchor)

        def feasible_at(lam: float) -> bool:
            return g_of_sorted(np.sort((1.0 - lam) * r0 + lam * rx), ref) <= 0.0

    lam = _bisect(feasible_at, spec.lambda_tolerance)
    return _certify(s, x, ref, spec, lam, g_of_sorted)


def star_project_H(
    s: ScenarioMatrix, x: ArrayLike, ref: ReferenceProfile, spec: PenaltySpec
) -> Tuple[Weights, float]:
    """Bisection counterpart of star_project_G on the quantile residual H."""
    x = as_weights(s, x)
    rx = portfolio_returns(s, x)
    if h_of_sorted(np.sort(rx), ref) <= 0.0:
        return x.copy(), 1.0
    r0 = portfolio_returns(s, spec.anchor)
    lam = _bisect(
        lambda lam: h_of_sorted(np.sort((1.0 - lam) * r0 + lam * rx), ref) <= 0.0,
        spec.lambda_tolerance,
    )
    return _certify(s, x, ref, spec, lam, h_of_sorted)


def analytic_lambda(q_x: Union[StepQuantile, np.ndarray], ref: ReferenceProfile, r: float) -> float:
    """Closed-form projection weight.

    lam = min over {a in A_ref : Q_x(a) < Q_ref(a)} of (Q_ref(a) - r) / (Q_x(a) - r),
    and 1 when no level is violated. ``q_x`` is the portfolio's quantile
    function or its values at the reference jump levels.
    """
    if not ref.top_quantile < r:
        raise PreconditionError(f"Q_ref(1)={ref.top_quantile:.6g} must lie below r={r:.6g}")
    if isinstance(q_x, StepQuantile):
        q_vals = np.asarray(q_x.evaluate(ref.quantile_jumps), dtype=float)
    else:
        q_vals = np.asarray(q_x, dtype=float)
    q_ref = ref.quantile_at_jumps
    violated = q_vals < q_ref
    if not np.any(violated):
        return 1.0
    ratios = (q_ref[violated] - r) / (q_vals[violated] - r)
    return float(np.min(ratios))


def star_project_H_analytic(
    s: ScenarioMatrix, x: ArrayLike, ref: ReferenceProfile, spec: PenaltySpec
) -> Tuple[Weights, float]:
    """Projection toward a riskless anchor with lam in closed form."""
    if spec.r is None:
        raise PreconditionError("closed-form projection needs a riskless anchor")
    x = as_weights(s, x)
    q_vals = quantile_of_sorted(np.sort(portfolio_returns(s, x)), ref.quantile_jumps)
    lam = analytic_lambda(np.atleast_1d(q_vals), ref, spec.r)
    if lam >= 1.0:
        return x.copy(), 1.0
    return _certify(s, x, ref, spec, lam, h_of_sorted)


_PROJECTIONS = {
    PenaltyVariant.PROJECTIVE_G: star_project_G,
    PenaltyVariant.PROJECTIVE_H: star_project_H,
    PenaltyVariant.PROJECTIVE_H_ANALYTIC: star_project_H_analytic,
}


def penalized_discontinuous(
    s: ScenarioMatrix,
    x: ArrayLike,
    ref: ReferenceProfile,
    box: FeasibleBox,
    obj: Objective,
    spec: PenaltySpec,
) -> float:
    """Discontinuous exact penalty (to maximize)."""
    if spec.variant.is_projective:
        raise InvalidParameterError(f"{spec.variant.value} is not a discontinuous variant")
    x = as_weights(s, x)
    y = project_box(x, box)
    r_sorted = np.sort(portfolio_returns(s, y))
    value = indicator_of_sorted(r_sorted, obj) - float(np.linalg.norm(x - y))
    res = _residual_fn(spec.variant)(r_sorted, ref)
    if spec.literal_offset:
        value -= spec.c + max(0.0, res)
    elif res > 0.0:
        value -= spec.c + res
    return value


def penalized_projective(
    s: ScenarioMatrix,
    x: ArrayLike,
    ref: ReferenceProfile,
    box: FeasibleBox,
    obj: Objective,
    spec: PenaltySpec,
) -> float:
    """Projective exact penalty (to maximize): f(p) - |p - y| - |x - y|."""
    if not spec.variant.is_projective:
        raise InvalidParameterError(f"{spec.variant.value} is not a projective variant")
    x = as_weights(s, x)
    y = project_box(x, box)
    p, _ = _PROJECTIONS[spec.variant](s, y, ref, spec)
    f_p = indicator_of_sorted(np.sort(portfolio_returns(s, p)), obj)
    return f_p - float(np.linalg.norm(p - y)) - float(np.linalg.norm(x - y))


@dataclass(frozen=True)
class PenaltyEvaluation:
    value: float
    projected: Weights  # y = pi_X(x)
    point: Weights  # y itself, or its star projection p
    lam: float
    residual: float  # dominance residual at y


@dataclass(frozen=True)
class PenalizedObjective:
    """Callable penalized objective over raw points; safe to share across threads."""
    scenarios: ScenarioMatrix
    reference: ReferenceProfile
    box: FeasibleBox
    objective: Objective
    spec: PenaltySpec

    def __call__(self, x: ArrayLike) -> float:
        if self.spec.variant.is_projective:
            value = penalized_projective(self.scenarios, x, self.reference, self.box, self.objective, self.spec)
        else:
            value = penalized_discontinuous(self.scenarios, x, self.reference, self.box, self.objective, self.spec)
        if not np.isfinite(value):
            raise NonFiniteObjectiveError("penalized objective is not finite", point=x)
        return value

    def evaluate(self, x: ArrayLike) -> PenaltyEvaluation:
        """Value plus the intermediate points, for reports and diagnostics."""
        x = as_weights(self.scenarios, x)
        y = project_box(x, self.box)
        res = _residual_fn(self.spec.variant)(np.sort(portfolio_returns(self.scenarios, y)), self.reference)
        if self.spec.variant.is_projective:
            p, lam = _PROJECTIONS[self.spec.variant](self.scenarios, y, self.reference, self.spec)
        else:
            p, lam = y, 1.0
        return PenaltyEvaluation(self(x), y, p, lam, res)

    def describe(self) -> dict:
        return {
            "variant": self.spec.variant.value,
            "c": self.spec.c,
            "anchor": self.spec.anchor.tolist(),
            "riskless_return": self.spec.r,
            "lambda_tolerance": self.spec.lambda_tolerance,
            "literal_offset": self.spec.literal_offset,
            "objective": self.objective.label,
            "reference_form": self.reference.form,
        }
