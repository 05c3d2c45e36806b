"""
Empirical return distributions of portfolios.

Responsibilities:
1. Hold the scenario matrix (m equiprobable scenarios over n assets)
2. Build the step CDF and step quantile of a portfolio's return
3. Evaluate the return indicators: Mean, VaR(gamma), AVaR(alpha, beta)
4. Mix a portfolio with a riskless asset without re-sorting returns

Conventions:
- The CDF counts mass strictly below t, so it is left-continuous:
  F(t) = #{i : r_i < t} / m.
- The quantile is Q(alpha) = sup{t : F(t) <= alpha}, right-continuous, with
  Q(1) capped at the largest scenario return so AVaR(alpha, 1) stays finite.
- Ties among scenario returns merge into one breakpoint.

Every value type here is frozen and its arrays are read-only, so the
functions can be called from many solver threads at once.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from fsd_reshaping.errors import DimensionError, InvalidParameterError

Weights = np.ndarray
ArrayLike = Union[float, Sequence[float], np.ndarray]


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScenarioMatrix:
    """m equiprobable return scenarios over n assets."""
    returns: np.ndarray  # m x n simple returns
    asset_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        returns = np.array(self.returns, dtype=float)
        if returns.ndim != 2:
            raise DimensionError(f"returns must be a 2-D matrix, got shape {returns.shape}")
        m, n = returns.shape
        if m < 1 or n < 1:
            raise DimensionError(f"need at least one scenario and one asset, got {m}x{n}")
        if not np.all(np.isfinite(returns)):
            bad = np.argwhere(~np.isfinite(returns))[0]
            raise InvalidParameterError(f"non-finite return at scenario {bad[0]}, asset {bad[1]}")
        labels = tuple(self.asset_labels) or tuple(f"asset_{j + 1}" for j in range(n))
        if len(labels) != n:
            raise DimensionError(f"{len(labels)} labels for {n} assets")
        returns.setflags(write=False)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "asset_labels", labels)

    @property
    def m(self) -> int:
        return self.returns.shape[0]

    @property
    def n(self) -> int:
        return self.returns.shape[1]

    def column_index(self, column: Union[int, str]) -> int:
        if isinstance(column, str):
            if column not in self.asset_labels:
                raise InvalidParameterError(f"unknown asset '{column}'")
            return self.asset_labels.index(column)
        index = int(column)
        if not 0 <= index < self.n:
            raise InvalidParameterError(f"asset index {index} outside 0..{self.n - 1}")
        return index

    def select(self, columns: Sequence[Union[int, str]]) -> "ScenarioMatrix":
        """Sub-matrix over the given columns (0-based indices or labels)."""
        if len(columns) == 0:
            raise InvalidParameterError("asset subset is empty")
        idx = [self.column_index(c) for c in columns]
        return ScenarioMatrix(self.returns[:, idx], tuple(self.asset_labels[i] for i in idx))

    def with_constant_column(self, column: Union[int, str], value: float) -> "ScenarioMatrix":
        """Copy with one column replaced by a constant return."""
        j = self.column_index(column)
        returns = self.returns.copy()
        returns[:, j] = float(value)
        return ScenarioMatrix(returns, self.asset_labels)


def riskless_column(s: ScenarioMatrix) -> Optional[int]:
    """Index of the last constant-return column, or None."""
    constant = np.flatnonzero(np.ptp(s.returns, axis=0) == 0.0)
    return int(constant[-1]) if constant.size else None


def as_weights(s: ScenarioMatrix, x: ArrayLike) -> Weights:
    w = np.asarray(x, dtype=float)
    if w.ndim != 1 or w.shape[0] != s.n:
        raise DimensionError(f"weights of shape {w.shape} do not match {s.n} assets")
    if not np.all(np.isfinite(w)):
        raise InvalidParameterError("weights must be finite")
    return w


def portfolio_returns(s: ScenarioMatrix, x: ArrayLike) -> np.ndarray:
    """Per-scenario return of portfolio x (row-wise dot products)."""
    w = as_weights(s, x)
    # row-wise reduction keeps every scenario's sum independent of its row position
    return (s.returns * w).sum(axis=1)


@lru_cache(maxsize=64)
def _probability_edges(m: int) -> np.ndarray:
    # edges[i] = i/m; scenario i (sorted) occupies [edges[i], edges[i+1])
    return _frozen(np.arange(m + 1) / m)


@dataclass(frozen=True)
class StepCDF:
    """Left-continuous step CDF: value at t is the mass strictly below t."""
    breakpoints: np.ndarray  # strictly increasing return thresholds
    levels: np.ndarray  # probability reached just after each breakpoint

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).ravel()
        lv = np.array(self.levels, dtype=float).ravel()
        if bp.size == 0 or bp.shape != lv.shape:
            raise InvalidParameterError("breakpoints and levels must be nonempty and of equal length")
        if not np.all(np.isfinite(bp)):
            raise InvalidParameterError("breakpoints must be finite")
        if np.any(np.diff(bp) <= 0):
            raise InvalidParameterError("breakpoints must be strictly increasing")
        if np.any(np.diff(lv) < 0) or lv[0] < 0 or lv[-1] != 1.0:
            raise InvalidParameterError("levels must be nondecreasing in [0, 1] and end at 1")
        object.__setattr__(self, "breakpoints", _frozen(bp))
        object.__setattr__(self, "levels", _frozen(lv))

    @classmethod
    def from_samples(cls, values: ArrayLike) -> "StepCDF":
        """Empirical CDF of equiprobable samples; ties merge."""
        r = np.asarray(values, dtype=float).ravel()
        distinct, counts = np.unique(r, return_counts=True)
        return cls(distinct, np.cumsum(counts) / r.size)

    @classmethod
    def from_quantile(cls, q: "StepQuantile") -> "StepCDF":
        right_ends = np.append(q.breakpoints[1:], 1.0)
        values, last = np.unique(q.values[::-1], return_index=True)
        # for repeated values keep the right end of the last piece holding them
        levels = right_ends[::-1][last]
        return cls(values, levels)

    def evaluate(self, t: ArrayLike) -> Union[float, np.ndarray]:
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t_arr, side="left")
        padded = np.concatenate(([0.0], self.levels))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate


@dataclass(frozen=True)
class StepQuantile:
    """Right-continuous step quantile.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])`` and the
    last value also at alpha = 1.
    """
    breakpoints: np.ndarray  # nondecreasing probability grid starting at 0
    values: np.ndarray  # nondecreasing return values

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).ravel()
        vals = np.array(self.values, dtype=float).ravel()
        if bp.size == 0 or bp.shape != vals.shape:
            raise InvalidParameterError("breakpoints and values must be nonempty and of equal length")
        if bp[0] != 0.0 or bp[-1] > 1.0 or np.any(np.diff(bp) < 0):
            raise InvalidParameterError("probability grid must start at 0, stay in [0, 1] and be nondecreasing")
        if not np.all(np.isfinite(vals)) or np.any(np.diff(vals) < 0):
            raise InvalidParameterError("quantile values must be finite and nondecreasing")
        object.__setattr__(self, "breakpoints", _frozen(bp))
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def from_cdf(cls, cdf: StepCDF) -> "StepQuantile":
        """Generalized inverse sup{t : F(t) <= alpha} with the Q(1) cap."""
        keep = np.concatenate(([True], np.diff(cdf.levels) > 0))
        levels = cdf.levels[keep]
        values = cdf.breakpoints[keep]
        # a leading zero level means F = 0 through that breakpoint: not a piece
        if levels[0] == 0.0:
            levels, values = levels[1:], values[1:]
        return cls(np.concatenate(([0.0], levels[:-1])), values)

    def evaluate(self, alpha: ArrayLike) -> Union[float, np.ndarray]:
        a = np.asarray(alpha, dtype=float)
        if np.any((a < 0) | (a > 1)):
            raise InvalidParameterError("alpha must lie in [0, 1]")
        idx = np.searchsorted(self.breakpoints, a, side="right") - 1
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def integrate(self, a: float, b: float) -> float:
        """Exact integral of the step quantile over [a, b]."""
        edges = np.append(self.breakpoints, 1.0)
        lo = np.clip(edges[:-1], a, b)
        hi = np.clip(edges[1:], a, b)
        return float(np.sum(self.values * (hi - lo)))


@dataclass(frozen=True)
class Objective:
    """Return indicator to maximize: Mean, VaR(gamma) or AVaR(alpha, beta)."""
    kind: str  # "mean" | "var" | "avar"
    gamma: Optional[float] = None  # VaR level
    alpha: float = 0.0  # AVaR window start
    beta: float = 1.0  # AVaR window end

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "var":
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise InvalidParameterError(f"VaR level must lie in (0, 1), got {self.gamma}")
        elif kind == "avar":
            if not 0.0 <= self.alpha < self.beta <= 1.0:
                raise InvalidParameterError(
                    f"AVaR window needs 0 <= alpha < beta <= 1, got ({self.alpha}, {self.beta})"
                )
        elif kind != "mean":
            raise InvalidParameterError(f"unknown objective kind '{self.kind}'")

    @classmethod
    def mean(cls) -> "Objective":
        return cls("mean")

    @classmethod
    def var(cls, gamma: float) -> "Objective":
        return cls("var", gamma=gamma)

    @classmethod
    def avar(cls, alpha: float, beta: float = 1.0) -> "Objective":
        return cls("avar", alpha=alpha, beta=beta)

    @property
    def label(self) -> str:
        if self.kind == "mean":
            return "Mean"
        if self.kind == "var":
            return f"VaR_{self.gamma:g}"
        if self.beta == 1.0:
            return f"AVaR_{self.alpha:g}"
        return f"AVaR_{self.alpha:g}_{self.beta:g}"


def empirical_cdf(s: ScenarioMatrix, x: ArrayLike) -> StepCDF:
    return StepCDF.from_samples(portfolio_returns(s, x))


def empirical_quantile(s: ScenarioMatrix, x: ArrayLike) -> StepQuantile:
    return StepQuantile.from_cdf(empirical_cdf(s, x))


def quantile_of_sorted(sorted_returns: np.ndarray, alpha: ArrayLike) -> Union[float, np.ndarray]:
    """Q(alpha) read directly off sorted equiprobable returns."""
    m = sorted_returns.shape[0]
    idx = np.searchsorted(_probability_edges(m)[1:], alpha, side="right")
    out = sorted_returns[np.minimum(idx, m - 1)]
    return float(out) if np.ndim(out) == 0 else out


def indicator_of_sorted(sorted_returns: np.ndarray, obj: Objective) -> float:
    """Indicator value from returns already sorted ascending."""
    m = sorted_returns.shape[0]
    if obj.kind == "mean":
        return float(sorted_returns.sum() / m)
    if obj.kind == "var":
        return quantile_of_sorted(sorted_returns, obj.gamma)
    edges = _probability_edges(m)
    lo = np.clip(edges[:-1], obj.alpha, obj.beta)
    hi = np.clip(edges[1:], obj.alpha, obj.beta)
    return float(np.sum(sorted_returns * (hi - lo)) / (obj.beta - obj.alpha))


def indicator(s: ScenarioMatrix, x: ArrayLike, obj: Objective) -> float:
    """Mean, VaR or AVaR of portfolio x; AVaR integrates the step quantile exactly."""
    return indicator_of_sorted(np.sort(portfolio_returns(s, x)), obj)


def _check_mixing_weight(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise InvalidParameterError(f"mixing weight must lie in [0, 1], got {lam}")
    return lam


def mix_with_riskfree(q: StepQuantile, r: float, lam: float) -> StepQuantile:
    """Quantile of lam*x + (1-lam)*x0 where x0 earns r in every scenario."""
    lam = _check_mixing_weight(lam)
    return StepQuantile(q.breakpoints, lam * q.values + (1.0 - lam) * r)


def mix_cdf_with_riskfree(cdf: StepCDF, r: float, lam: float) -> StepCDF:
    """CDF companion of mix_with_riskfree: F_lam(t) = F((t - (1-lam) r) / lam)."""
    lam = _check_mixing_weight(lam)
    if lam == 0.0:
        return StepCDF([r], [1.0])
    return StepCDF(lam * cdf.breakpoints + (1.0 - lam) * r, cdf.levels)
