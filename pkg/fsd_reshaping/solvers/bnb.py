"""
Branch-and-bound globalizer over weight boxes.

Each box keeps an incumbent found by the smoothing optimizer. Every
iteration restarts the local optimizer from a fresh random point in each
active box; when the new local result differs from the incumbent (in value
by at least epsilon, or in position by at least delta) the box is split
between the two points, otherwise it is carried forward as stale.

No lower bounds are computed for these nonconvex objectives. Boxes stale
for ``stale_limit`` iterations are pruned (unless they hold the best
incumbent), and beyond ``max_boxes`` the worst boxes are frozen.
Pruned and frozen boxes stay in the partition, so the union of all boxes
is always the root box.

Boxes run concurrently in a thread pool; results are merged in box-id
order with per-box seeds, so the outcome does not depend on the worker count.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from fsd_reshaping.errors import InvalidParameterError
from fsd_reshaping.solvers.smoother import (
    MINIMIZE,
    OptimizeResult,
    SmootherConfig,
    minimize,
)

logger = logging.getLogger(__name__)

ACTIVE = "active"
FROZEN = "frozen"
PRUNED = "pruned"


@dataclass
class Box:
    box_id: int
    lower: np.ndarray
    upper: np.ndarray
    incumbent: np.ndarray
    value: float
    stale_count: int = 0
    created: int = 0
    status: str = ACTIVE

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def order_key(self):
        # best first, then oldest
        return (self.value, self.created, self.box_id)


@dataclass(frozen=True)
class BnBConfig:
    epsilon: float = 1e-4
    delta: float = 1e-2
    max_iterations: int = 10
    min_iterations: int = 3
    progress_tol: float = 1e-6
    max_boxes: int = 32
    stale_limit: int = 3
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0 or not self.delta > 0:
            raise InvalidParameterError("epsilon and delta must be positive")
        if self.progress_tol < 0:
            raise InvalidParameterError("progress_tol must be nonnegative")
        if self.max_iterations < 1 or self.max_boxes < 1 or self.stale_limit < 1 or self.workers < 1:
            raise InvalidParameterError("max_iterations, max_boxes, stale_limit and workers must be >= 1")
        if self.min_iterations < 0:
            raise InvalidParameterError("min_iterations must be nonnegative")


@dataclass
class PartitionState:
    boxes: List[Box]
    frozen: List[Box] = field(default_factory=list)
    pruned: List[Box] = field(default_factory=list)
    history: List[float] = field(default_factory=list)  # V_k
    evaluations: int = 0
    iteration: int = 0
    next_id: int = 1
    best_x: Optional[np.ndarray] = None
    best_value: float = np.inf
    trace: List[dict] = field(default_factory=list)

    def all_boxes(self) -> List[Box]:
        return sorted(self.boxes + self.frozen + self.pruned, key=lambda b: b.box_id)

    def offer(self, x: np.ndarray, value: float):
        if value < self.best_value:
            self.best_x, self.best_value = x.copy(), value


@dataclass(frozen=True)
class _LocalOutcome:
    x: np.ndarray
    value: float
    evaluations: int


def split_box(box: Box, a: np.ndarray, b: np.ndarray) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """Cut along argmax |a - b| at the midpoint; returns (low part, high part)."""
    j = int(np.argmax(np.abs(a - b)))
    cut = 0.5 * (a[j] + b[j])
    low_upper = box.upper.copy()
    low_upper[j] = cut
    high_lower = box.lower.copy()
    high_lower[j] = cut
    return (box.lower.copy(), low_upper), (high_lower, box.upper.copy())


class BranchAndBound:
    """Minimizes F over a box by partitioning it around local optima."""

    def __init__(self, F: Callable[[np.ndarray], float], smoother: SmootherConfig, cfg: BnBConfig = BnBConfig()):
        self.F = F
        self.smoother = replace(smoother, direction=MINIMIZE)
        self.cfg = cfg
        self.state: Optional[PartitionState] = None

    def _streams(self, iteration: int, box_id: int):
        return np.random.SeedSequence([self.cfg.seed, iteration, box_id]).spawn(2)

    def start_point(self, lower: np.ndarray, upper: np.ndarray, iteration: int, box_id: int) -> np.ndarray:
        """Seeded random start for one box at one iteration."""
        return np.random.default_rng(self._streams(iteration, box_id)[0]).uniform(lower, upper)

    def _local(self, lower: np.ndarray, upper: np.ndarray, iteration: int, box_id: int) -> _LocalOutcome:
        """Random start in the box and one smoothing run; the start counts as a candidate."""
        run_seq = self._streams(iteration, box_id)[1]
        start = self.start_point(lower, upper, iteration, box_id)
        cfg = replace(self.smoother, seed=tuple(int(v) for v in run_seq.generate_state(4)))
        result = minimize(self.F, start, cfg, bounds=(lower, upper))
        return _LocalOutcome(result.x_best, result.value_best, result.evaluations)

    def _map(self, jobs):
        if self.cfg.workers == 1 or len(jobs) == 1:
            return [self._local(*job) for job in jobs]
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            return list(pool.map(lambda job: self._local(*job), jobs))

    def initialize(self, lower, upper) -> PartitionState:
        lower = np.array(lower, dtype=float)
        upper = np.array(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1 or np.any(lower > upper):
            raise InvalidParameterError("root box must satisfy lower <= upper")
        out = self._local(lower, upper, 0, 0)
        root = Box(0, lower, upper, out.x, out.value)
        state = PartitionState(boxes=[root], evaluations=out.evaluations)
        state.offer(out.x, out.value)
        state.history.append(state.best_value)
        state.trace.append(self._trace_entry(state, splits=0, elapsed=0.0))
        logger.info(
            "branch and bound initialized",
            extra={"iteration": 0, "boxes": 1, "best_value": state.best_value, "evaluations": state.evaluations},
        )
        return state

    def iterate(self, state: PartitionState) -> PartitionState:
        if not state.boxes:
            raise InvalidParameterError("partition has no active boxes")
        started = time.time()
        k = state.iteration + 1
        boxes = sorted(state.boxes, key=lambda b: b.box_id)
        outcomes = self._map([(b.lower, b.upper, k, b.box_id) for b in boxes])

        # Step 1: merge in box-id order
        survivors: List[Box] = []
        splits = 0
        for box, out in zip(boxes, outcomes):
            state.evaluations += out.evaluations
            state.offer(out.x, out.value)
            differs = abs(box.value - out.value) >= self.cfg.epsilon or np.linalg.norm(box.incumbent - out.x) >= self.cfg.delta
            j = int(np.argmax(np.abs(box.incumbent - out.x)))
            if differs and box.incumbent[j] != out.x[j]:
                (lo1, hi1), (lo2, hi2) = split_box(box, box.incumbent, out.x)
                if box.incumbent[j] < out.x[j]:
                    low_pt, low_val, high_pt, high_val = box.incumbent, box.value, out.x, out.value
                else:
                    low_pt, low_val, high_pt, high_val = out.x, out.value, box.incumbent, box.value
                survivors.append(Box(state.next_id, lo1, hi1, low_pt, low_val, created=k))
                survivors.append(Box(state.next_id + 1, lo2, hi2, high_pt, high_val, created=k))
                state.next_id += 2
                splits += 1
                logger.debug("box split", extra={"iteration": k, "box_id": box.box_id})
            else:
                if out.value < box.value:
                    box.incumbent, box.value = out.x, out.value
                box.stale_count += 1
                survivors.append(box)

        # Step 2: stale pruning, never the holder of the best incumbent
        best_holder = min(survivors, key=Box.order_key)
        active: List[Box] = []
        for box in survivors:
            if box.stale_count >= self.cfg.stale_limit and box is not best_holder:
                box.status = PRUNED
                state.pruned.append(box)
                logger.info("stale box pruned", extra={"iteration": k, "box_id": box.box_id, "value": box.value})
            else:
                active.append(box)

        # Step 3: freeze the worst boxes beyond max_boxes
        active.sort(key=Box.order_key)
        for box in active[self.cfg.max_boxes:]:
            box.status = FROZEN
            state.frozen.append(box)
            logger.info("box frozen", extra={"iteration": k, "box_id": box.box_id, "value": box.value})
        state.boxes = active[: self.cfg.max_boxes]

        state.iteration = k
        state.history.append(state.best_value)
        state.trace.append(self._trace_entry(state, splits, time.time() - started))
        logger.info(
            "branch and bound iteration",
            extra={
                "iteration": k,
                "boxes": len(state.boxes),
                "best_value": state.best_value,
                "evaluations": state.evaluations,
            },
        )
        return state

    def solve(self, lower, upper) -> OptimizeResult:
        """Iterate until progress V_{k-1} - V_k drops below progress_tol."""
        state = self.initialize(lower, upper)
        while state.iteration < self.cfg.max_iterations and state.boxes:
            self.iterate(state)
            progress = state.history[-2] - state.history[-1]
            if state.iteration >= self.cfg.min_iterations and progress < self.cfg.progress_tol:
                break
        self.state = state
        return OptimizeResult(
            x_best=state.best_x,
            value_best=state.best_value,
            evaluations=state.evaluations,
            partition_trace=state.trace,
        )

    @staticmethod
    def _trace_entry(state: PartitionState, splits: int, elapsed: float) -> dict:
        return {
            "iteration": state.iteration,
            "active": len(state.boxes),
            "frozen": len(state.frozen),
            "pruned": len(state.pruned),
            "splits": splits,
            "best_value": state.best_value,
            "evaluations": state.evaluations,
            "latency_ms": round(elapsed * 1000.0, 3),
        }
