"""
Reference risk profiles and first-order dominance residuals.

A portfolio x dominates a reference profile when its return CDF lies at or
below the reference CDF everywhere: F_x(t) <= F_ref(t) for all t, or
equivalently Q_x(alpha) >= Q_ref(alpha) for all alpha.

For step references both conditions reduce to finitely many checks:
- G(x) = max over the CDF jump points t of  F_x(t) - F_ref(t)
- H(x) = max over the quantile jump levels a of  Q_ref(a) - Q_x(a)
and x is dominance-feasible iff the residual is <= 0.

Profiles always carry both representations. ``form`` records which one the
profile was specified in; ``residual`` and the penalties use that one.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from fsd_reshaping.errors import DimensionError, InvalidParameterError, PreconditionError
from fsd_reshaping.tools.distribution import (
    ArrayLike,
    ScenarioMatrix,
    StepCDF,
    StepQuantile,
    as_weights,
    empirical_cdf,
    empirical_quantile,
    portfolio_returns,
    quantile_of_sorted,
)

CDF_FORM = "cdf"
QUANTILE_FORM = "quantile"

# tolerance for box membership only; dominance residuals are compared exactly
BOX_TOLERANCE = 1e-12

Shift = Union[float, Sequence[float]]


@dataclass(frozen=True)
class ReferenceProfile:
    cdf: StepCDF
    quantile: StepQuantile
    form: str = CDF_FORM
    shift: Tuple[float, ...] = (0.0,)
    cdf_jumps: np.ndarray = field(init=False, repr=False)
    cdf_at_jumps: np.ndarray = field(init=False, repr=False)
    quantile_jumps: np.ndarray = field(init=False, repr=False)
    quantile_at_jumps: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.form not in (CDF_FORM, QUANTILE_FORM):
            raise InvalidParameterError(f"unknown profile form '{self.form}'")
        t_ref = self.cdf.breakpoints
        a_ref = np.unique(self.quantile.breakpoints)
        for name, value in (
            ("cdf_jumps", t_ref),
            ("cdf_at_jumps", np.asarray(self.cdf.evaluate(t_ref), dtype=float)),
            ("quantile_jumps", a_ref),
            ("quantile_at_jumps", np.asarray(self.quantile.evaluate(a_ref), dtype=float)),
        ):
            value = np.array(value, dtype=float)
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "shift", tuple(float(d) for d in np.atleast_1d(self.shift)))

    @classmethod
    def from_cdf(cls, cdf: StepCDF, form: str = CDF_FORM, shift: Shift = 0.0) -> "ReferenceProfile":
        return cls(cdf, StepQuantile.from_cdf(cdf), form, shift)

    @classmethod
    def from_quantile(cls, q: StepQuantile, form: str = QUANTILE_FORM, shift: Shift = 0.0) -> "ReferenceProfile":
        return cls(StepCDF.from_quantile(q), q, form, shift)

    @property
    def top_quantile(self) -> float:
        """Q_ref(1), the largest reference return."""
        return float(self.quantile.values[-1])


def _check_shift(delta: Shift, size: int) -> np.ndarray:
    d = np.asarray(delta, dtype=float)
    if d.ndim == 0:
        d = np.full(size, float(d))
    elif d.shape != (size,):
        raise DimensionError(f"shift table has {d.size} entries for {size} jump points")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise InvalidParameterError("shift must be finite and nonnegative")
    return d


def _cdf_from_pairs(thresholds: np.ndarray, levels: np.ndarray) -> StepCDF:
    """Smallest step CDF reaching each level right after its threshold."""
    order = np.argsort(thresholds, kind="stable")
    t, lv = thresholds[order], levels[order]
    distinct, inverse = np.unique(t, return_inverse=True)
    merged = np.zeros(distinct.size)
    np.maximum.at(merged, inverse, lv)
    return StepCDF(distinct, np.maximum.accumulate(merged))


def reference_from_portfolio(
    s: ScenarioMatrix,
    x_ref: ArrayLike,
    delta: Shift = 0.0,
    form: str = CDF_FORM,
) -> ReferenceProfile:
    """Relaxed profile of a reference portfolio.

    CDF form: F_ref(t) = F_xref(t + delta), i.e. every jump moves left by
    its delta. Quantile form: Q_ref(a) = Q_xref(a) - delta(a), made
    nondecreasing by a running maximum. ``delta`` is a scalar or one value
    per jump point of the chosen form.
    """
    if form == CDF_FORM:
        base = empirical_cdf(s, x_ref)
        d = _check_shift(delta, base.breakpoints.size)
        return ReferenceProfile.from_cdf(_cdf_from_pairs(base.breakpoints - d, base.levels), CDF_FORM, d)
    if form == QUANTILE_FORM:
        base = empirical_quantile(s, x_ref)
        d = _check_shift(delta, base.values.size)
        q = StepQuantile(base.breakpoints, np.maximum.accumulate(base.values - d))
        return ReferenceProfile.from_quantile(q, QUANTILE_FORM, d)
    raise InvalidParameterError(f"unknown profile form '{form}'")


def reference_from_steps(points: Iterable[Sequence[float]], form: str = CDF_FORM) -> ReferenceProfile:
    """Step profile from (threshold, level) pairs.

    ``level`` is the CDF value reached just after ``threshold``; the
    profile is 0 at and below the first threshold. A repeated threshold
    keeps its largest level and zero-level pairs only restate F = 0.
    """
    pairs = np.asarray(list(points), dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] == 0:
        raise InvalidParameterError("steps must be a nonempty list of (threshold, level) pairs")
    thresholds, levels = pairs[:, 0], pairs[:, 1]
    if not np.all(np.isfinite(thresholds)):
        raise InvalidParameterError("step thresholds must be finite")
    if np.any(np.diff(thresholds) < 0):
        raise InvalidParameterError("step thresholds must be sorted")
    if np.any(np.diff(levels) < 0) or levels.min() < 0 or levels.max() > 1:
        raise InvalidParameterError("step levels must be nondecreasing within [0, 1]")
    if levels[-1] != 1.0:
        raise InvalidParameterError("the last step level must be 1")
    keep = levels > 0
    cdf = _cdf_from_pairs(thresholds[keep], levels[keep])
    return ReferenceProfile.from_cdf(cdf, form)


def var_profile(alpha: float, q_alpha: float, tau: float, form: str = CDF_FORM) -> ReferenceProfile:
    """Single quantile constraint VaR_alpha(x) >= q_alpha with floor tau.

    F_ref is 0 up to tau, alpha on (tau, q_alpha] and 1 above q_alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if not tau < q_alpha:
        raise InvalidParameterError("the floor tau must lie below q_alpha")
    return reference_from_steps([(tau, alpha), (q_alpha, 1.0)], form)


def _level_after(cdf: StepCDF, t: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf.breakpoints, t, side="right")
    return np.concatenate(([0.0], cdf.levels))[idx]


def merge_profiles(profiles: Sequence[ReferenceProfile], form: Optional[str] = None) -> ReferenceProfile:
    """Intersect several dominance constraints: pointwise minimum of the CDFs."""
    if not profiles:
        raise InvalidParameterError("nothing to merge")
    if len(profiles) == 1 and form in (None, profiles[0].form):
        return profiles[0]
    union = np.unique(np.concatenate([p.cdf.breakpoints for p in profiles]))
    levels = np.min([_level_after(p.cdf, union) for p in profiles], axis=0)
    return ReferenceProfile.from_cdf(StepCDF(union, levels), form or profiles[0].form)


def to_quantile_form(profile: ReferenceProfile) -> ReferenceProfile:
    return ReferenceProfile(profile.cdf, profile.quantile, QUANTILE_FORM, profile.shift)


# Residuals on precomputed returns (hot path of the penalties)

def g_of_sorted(sorted_returns: np.ndarray, ref: ReferenceProfile) -> float:
    below = np.searchsorted(sorted_returns, ref.cdf_jumps, side="left") / sorted_returns.shape[0]
    return float(np.max(below - ref.cdf_at_jumps))


def h_of_sorted(sorted_returns: np.ndarray, ref: ReferenceProfile) -> float:
    q_x = quantile_of_sorted(sorted_returns, ref.quantile_jumps)
    return float(np.max(ref.quantile_at_jumps - q_x))


def residual_of_sorted(sorted_returns: np.ndarray, ref: ReferenceProfile) -> float:
    if ref.form == CDF_FORM:
        return g_of_sorted(sorted_returns, ref)
    return h_of_sorted(sorted_returns, ref)


def G(s: ScenarioMatrix, x: ArrayLike, ref: ReferenceProfile) -> float:
    """max over T_ref of F_x(t) - F_ref(t); feasible iff <= 0."""
    return g_of_sorted(np.sort(portfolio_returns(s, x)), ref)


def H(s: ScenarioMatrix, x: ArrayLike, ref: ReferenceProfile) -> float:
    """max over A_ref of Q_ref(a) - Q_x(a); feasible iff <= 0."""
    return h_of_sorted(np.sort(portfolio_returns(s, x)), ref)


def residual(s: ScenarioMatrix, x: ArrayLike, ref: ReferenceProfile) -> float:
    return residual_of_sorted(np.sort(portfolio_returns(s, x)), ref)


def g_batch(s: ScenarioMatrix, points: np.ndarray, ref: ReferenceProfile) -> np.ndarray:
    """G for every row of ``points`` (P x n) at once; used by grid scans."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != s.n:
        raise DimensionError(f"points of shape {pts.shape} do not match {s.n} assets")
    returns = pts @ s.returns.T  # P x m
    below = (returns[:, :, None] < ref.cdf_jumps[None, None, :]).mean(axis=1)
    return np.max(below - ref.cdf_at_jumps[None, :], axis=1)


@dataclass(frozen=True)
class FeasibleBox:
    """X = {x : sum(x) <= 1, x >= lower}."""
    lower: np.ndarray

    def __post_init__(self):
        c = np.array(self.lower, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidParameterError("lower bounds must be finite and nonempty")
        if c.sum() > 1.0:
            raise PreconditionError(f"lower bounds sum to {c.sum():.6g} > 1, X is empty")
        c.setflags(write=False)
        object.__setattr__(self, "lower", c)

    @classmethod
    def nonnegative(cls, n: int) -> "FeasibleBox":
        return cls(np.zeros(n))

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def radius(self) -> float:
        """Budget left after the lower bounds: 1 - sum(c)."""
        return float(1.0 - self.lower.sum())

    def budget_residual(self, x: np.ndarray) -> float:
        return float(max(0.0, np.sum(x) - 1.0))

    def lower_residual(self, x: np.ndarray) -> float:
        return float(max(0.0, np.max(self.lower - x)))

    def contains(self, x: np.ndarray, tol: float = BOX_TOLERANCE) -> bool:
        return self.budget_residual(x) <= tol and self.lower_residual(x) <= tol

    def root_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Search box [c_i, c_i + 1 - sum(c)] enclosing X."""
        return self.lower.copy(), self.lower + self.radius


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    dominance_residual: float  # G or H, per the profile's form
    budget_residual: float  # max(0, sum(x) - 1)
    lower_residual: float  # max(0, max(c - x))
    g: float
    h: float


def is_feasible(s: ScenarioMatrix, x: ArrayLike, ref: ReferenceProfile, box: FeasibleBox) -> FeasibilityReport:
    w = as_weights(s, x)
    if box.n != s.n:
        raise DimensionError(f"box has {box.n} bounds for {s.n} assets")
    r = np.sort(portfolio_returns(s, w))
    g = g_of_sorted(r, ref)
    h = h_of_sorted(r, ref)
    dominance = g if ref.form == CDF_FORM else h
    return FeasibilityReport(
        feasible=bool(dominance <= 0.0 and box.contains(w)),
        dominance_residual=dominance,
        budget_residual=box.budget_residual(w),
        lower_residual=box.lower_residual(w),
        g=g,
        h=h,
    )
