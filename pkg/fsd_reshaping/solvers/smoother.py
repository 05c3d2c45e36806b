"""
Successive stochastic smoothing: a local optimizer for discontinuous functions.

The objective F is replaced by its Gaussian mollification
    F_theta(x) = E_eta F(x + theta * eta),   eta ~ N(0, I)
whose gradient has the unbiased two-point estimate
    xi = eta / (2 theta) * (F(x + theta eta) - F(x - theta eta)).

minimize() runs N stages with shrinking radii theta_nu. Each stage takes
``inner_steps`` steps along (normalized) estimates, averages its iterates,
and hands over to the next stage from an extrapolated average.

Design Decision:
    Every sample F(x +- theta eta) is a real evaluation, so the best sample
    seen inside the bounds is kept as a free incumbent next to the final
    stage average. value_best is always an actual F value at x_best.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

from fsd_reshaping.errors import InvalidParameterError, NonFiniteObjectiveError

logger = logging.getLogger(__name__)

ObjectiveFn = Callable[[np.ndarray], float]
Bounds = Tuple[np.ndarray, np.ndarray]
Seed = Union[int, Sequence[int]]

NORMALIZE_EPS = 1e-12
MINIMIZE = "minimize"
MAXIMIZE = "maximize"


@dataclass(frozen=True)
class SmootherConfig:
    theta1: float = 0.1
    stages: int = 40
    inner_steps: Optional[int] = None  # None -> ceil(sqrt(stages))
    step_size: float = 1.0
    extrapolation: float = 1.0
    normalize_directions: bool = True
    one_sided: bool = False
    averaging: Union[str, float] = "harmonic"  # tracker weights: 1/(k+1) or a constant
    tracker_tolerance: Optional[float] = None
    seed: Seed = 0
    direction: str = MINIMIZE

    def __post_init__(self):
        if not self.theta1 > 0:
            raise InvalidParameterError(f"theta1 must be positive, got {self.theta1}")
        if self.stages < 1:
            raise InvalidParameterError(f"stages must be >= 1, got {self.stages}")
        if self.inner_steps is not None and self.inner_steps < 1:
            raise InvalidParameterError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if not self.step_size > 0:
            raise InvalidParameterError(f"step_size must be positive, got {self.step_size}")
        if self.extrapolation < 0:
            raise InvalidParameterError("extrapolation must be nonnegative")
        if self.direction not in (MINIMIZE, MAXIMIZE):
            raise InvalidParameterError(f"direction must be '{MINIMIZE}' or '{MAXIMIZE}'")
        if self.averaging != "harmonic" and not (
            isinstance(self.averaging, (int, float)) and 0.0 < float(self.averaging) <= 1.0
        ):
            raise InvalidParameterError("averaging must be 'harmonic' or a weight in (0, 1]")

    @property
    def inner(self) -> int:
        return self.inner_steps if self.inner_steps is not None else math.ceil(math.sqrt(self.stages))

    def stage_radius(self, nu: int) -> float:
        """theta_nu = theta1 (1 - (nu - 1) / N), floored at theta1 / N."""
        return max(self.theta1 * (1.0 - (nu - 1) / self.stages), self.theta1 / self.stages)

    @property
    def budget(self) -> int:
        """Evaluations used by minimize: the start, two per step and the final re-evaluation."""
        return 2 * self.stages * self.inner + 2


@dataclass(frozen=True)
class GradientTracker:
    z: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, n: int) -> "GradientTracker":
        return cls(np.zeros(n), 0)


def track_gradient(t: GradientTracker, sample: np.ndarray, lam: Optional[float] = None) -> GradientTracker:
    """z <- z - lam (z - sample); lam defaults to 1/(k+1), the running mean."""
    if lam is None:
        lam = 1.0 / (t.k + 1)
    if not 0.0 <= lam <= 1.0:
        raise InvalidParameterError(f"tracker weight must lie in [0, 1], got {lam}")
    return GradientTracker(t.z - lam * (t.z - np.asarray(sample, dtype=float)), t.k + 1)


@dataclass(frozen=True)
class StageRecord:
    stage: int
    theta: float
    average: Tuple[float, ...]
    steps: int
    tracker_norm: float


@dataclass(frozen=True)
class OptimizeResult:
    x_best: np.ndarray
    value_best: float  # F(x_best), in F's own sense
    evaluations: int
    stage_trace: List[StageRecord] = field(default_factory=list)
    x_final: Optional[np.ndarray] = None  # last stage average
    partition_trace: List[dict] = field(default_factory=list)  # filled by branch and bound


def evaluate_finite(F: ObjectiveFn, x: np.ndarray) -> float:
    value = float(F(x))
    if not math.isfinite(value):
        raise NonFiniteObjectiveError("objective is not finite", point=x)
    return value


def _rng(rng: Union[np.random.Generator, Seed, None]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_theta(theta: float):
    if not theta > 0:
        raise InvalidParameterError(f"smoothing radius must be positive, got {theta}")


def gradient_sample(F: ObjectiveFn, x: np.ndarray, theta: float, rng) -> np.ndarray:
    """Two-point estimate eta / (2 theta) * (F(x + theta eta) - F(x - theta eta))."""
    _check_theta(theta)
    x = np.asarray(x, dtype=float)
    eta = _rng(rng).standard_normal(x.shape[0])
    f_plus = evaluate_finite(F, x + theta * eta)
    f_minus = evaluate_finite(F, x - theta * eta)
    return eta * (f_plus - f_minus) / (2.0 * theta)


def one_sided_gradient_sample(F: ObjectiveFn, x: np.ndarray, theta: float, rng) -> np.ndarray:
    """Single-difference estimate eta / theta * (F(x + theta eta) - F(x))."""
    _check_theta(theta)
    x = np.asarray(x, dtype=float)
    eta = _rng(rng).standard_normal(x.shape[0])
    return eta * (evaluate_finite(F, x + theta * eta) - evaluate_finite(F, x)) / theta


def estimate_gradient(
    F: ObjectiveFn,
    x: np.ndarray,
    theta: float,
    rng,
    samples: int,
    one_sided: bool = False,
    vectorized: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo mean of gradient samples and its standard error.

    With ``vectorized=True`` F maps a (k, n) array of points to k values and
    all samples are drawn in one batch.
    """
    _check_theta(theta)
    x = np.asarray(x, dtype=float)
    gen = _rng(rng)
    if vectorized:
        eta = gen.standard_normal((samples, x.shape[0]))
        f_plus = np.asarray(F(x + theta * eta), dtype=float)
        if one_sided:
            f_base = np.asarray(F(np.repeat(x[None, :], samples, axis=0)), dtype=float)
            draws = eta * ((f_plus - f_base) / theta)[:, None]
        else:
            f_minus = np.asarray(F(x - theta * eta), dtype=float)
            draws = eta * ((f_plus - f_minus) / (2.0 * theta))[:, None]
        if not np.all(np.isfinite(draws)):
            raise NonFiniteObjectiveError("objective is not finite near", point=x)
    else:
        sampler = one_sided_gradient_sample if one_sided else gradient_sample
        draws = np.array([sampler(F, x, theta, gen) for _ in range(samples)])
    return draws.mean(axis=0), draws.std(axis=0, ddof=1) / math.sqrt(samples)


def smoothed_value(
    F: ObjectiveFn, x: np.ndarray, theta: float, rng, samples: int, vectorized: bool = False
) -> float:
    """Monte-Carlo value of the mollified function F_theta(x)."""
    _check_theta(theta)
    x = np.asarray(x, dtype=float)
    eta = _rng(rng).standard_normal((samples, x.shape[0]))
    points = x + theta * eta
    if vectorized:
        values = np.asarray(F(points), dtype=float)
    else:
        values = np.array([evaluate_finite(F, p) for p in points])
    return float(values.mean())


def smoothed_step_value(x: Union[float, np.ndarray], theta: float):
    """Closed form of the mollified unit step 1{x >= 0}: Phi(x / theta)."""
    _check_theta(theta)
    return norm.cdf(np.asarray(x, dtype=float) / theta)


def smoothed_step_gradient(x: Union[float, np.ndarray], theta: float):
    """Derivative of smoothed_step_value: phi(x / theta) / theta."""
    _check_theta(theta)
    return norm.pdf(np.asarray(x, dtype=float) / theta) / theta


def _clip(x: np.ndarray, bounds: Optional[Bounds]) -> np.ndarray:
    if bounds is None:
        return x
    return np.clip(x, bounds[0], bounds[1])


def _inside(x: np.ndarray, bounds: Optional[Bounds]) -> bool:
    if bounds is None:
        return True
    return bool(np.all(x >= bounds[0]) and np.all(x <= bounds[1]))


class _Incumbent:
    """Best sampled point so far, in minimization sense."""

    def __init__(self):
        self.x: Optional[np.ndarray] = None
        self.value = math.inf

    def offer(self, x: np.ndarray, value: float):
        if value < self.value:
            self.x, self.value = x.copy(), value


def minimize(
    F: ObjectiveFn,
    x_start: np.ndarray,
    cfg: SmootherConfig = SmootherConfig(),
    bounds: Optional[Bounds] = None,
) -> OptimizeResult:
    """Run the staged smoothing method from x_start.

    Args:
        F: objective value function; maximized when cfg.direction is 'maximize'
        x_start: starting point (clipped into ``bounds`` if given)
        cfg: schedule, step rule and seed
        bounds: optional (lower, upper) box the iterates are clipped to

    Returns:
        OptimizeResult with the best point found (x_start included) and
        exactly cfg.budget evaluations, fewer only when tracker_tolerance
        ends stages early.

    Raises:
        NonFiniteObjectiveError: F is NaN or infinite at x_start or at a
            sampled point
    """
    sign = -1.0 if cfg.direction == MAXIMIZE else 1.0

    def G(x):
        return sign * evaluate_finite(F, x)

    if bounds is not None:
        bounds = (np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float))
    x = _clip(np.array(x_start, dtype=float), bounds)
    n = x.shape[0]
    stage_rngs = [np.random.default_rng(child) for child in np.random.SeedSequence(cfg.seed).spawn(cfg.stages)]

    best = _Incumbent()
    best.offer(x, G(x))
    evaluations = 1
    prev_avg = x.copy()
    trace: List[StageRecord] = []
    avg = x.copy()

    for nu in range(1, cfg.stages + 1):
        theta = cfg.stage_radius(nu)
        rng = stage_rngs[nu - 1]
        step = cfg.step_size * theta
        tracker = GradientTracker.zeros(n)
        total = np.zeros(n)
        steps = 0

        for _ in range(cfg.inner):
            eta = rng.standard_normal(n)
            x_plus = x + theta * eta
            g_plus = G(x_plus)
            if _inside(x_plus, bounds):
                best.offer(x_plus, g_plus)
            if cfg.one_sided:
                g_base = G(x)
                if _inside(x, bounds):
                    best.offer(x, g_base)
                xi = eta * (g_plus - g_base) / theta
            else:
                x_minus = x - theta * eta
                g_minus = G(x_minus)
                if _inside(x_minus, bounds):
                    best.offer(x_minus, g_minus)
                xi = eta * (g_plus - g_minus) / (2.0 * theta)
            evaluations += 2

            direction = xi
            if cfg.normalize_directions:
                direction = xi / max(float(np.linalg.norm(xi)), NORMALIZE_EPS)
            x = _clip(x - step * direction, bounds)
            total += x
            steps += 1

            lam = None if cfg.averaging == "harmonic" else float(cfg.averaging)
            tracker = track_gradient(tracker, xi, lam)
            if (
                cfg.tracker_tolerance is not None
                and tracker.k >= 2
                and np.linalg.norm(tracker.z) < cfg.tracker_tolerance
            ):
                break

        avg = total / steps
        trace.append(StageRecord(nu, theta, tuple(avg.tolist()), steps, float(np.linalg.norm(tracker.z))))
        logger.debug(
            "stage finished",
            extra={"stage": nu, "evaluations": evaluations, "best_value": sign * best.value},
        )
        if nu < cfg.stages:
            x = _clip(avg + cfg.extrapolation * (avg - prev_avg), bounds)
        prev_avg = avg

    final_value = G(avg)
    evaluations += 1
    best.offer(avg, final_value)

    return OptimizeResult(
        x_best=best.x,
        value_best=sign * best.value,
        evaluations=evaluations,
        stage_trace=trace,
        x_final=avg,
    )


def with_seed(cfg: SmootherConfig, seed: Seed) -> SmootherConfig:
    return replace(cfg, seed=seed)
