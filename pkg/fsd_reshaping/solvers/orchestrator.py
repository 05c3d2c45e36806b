"""
Solve orchestrator: coordinates restarts of the global and local solvers.

This is the coordination layer that:
1. Turns the penalized objective (to maximize) into a minimization target
2. Runs branch and bound, or plain smoothing from random starts, once per restart
3. Keeps the best restart and maps its raw point back to a portfolio
4. Re-verifies that portfolio against the dominance and budget constraints

Design Decision: the solvers only see a value function over a box. All
knowledge of portfolios, references and penalties stays in the
PenalizedObjective, so the same solvers serve every penalty variant.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from fsd_reshaping.solvers.bnb import BnBConfig, BranchAndBound
from fsd_reshaping.solvers.smoother import MAXIMIZE, OptimizeResult, SmootherConfig, minimize
from fsd_reshaping.tools.dominance import FeasibilityReport, is_feasible
from fsd_reshaping.tools.penalty import PenalizedObjective

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RestartRecord:
    restart: int
    value: float
    evaluations: int
    feasible: bool


@dataclass
class SolveOutcome:
    x_raw: np.ndarray  # maximizer of the penalized function
    value: float  # penalized value at x_raw
    weights: np.ndarray  # portfolio represented by x_raw
    feasibility: FeasibilityReport
    evaluations: int
    restarts: List[RestartRecord] = field(default_factory=list)
    partition_trace: List[dict] = field(default_factory=list)


class SolveOrchestrator:
    """Best-of-restarts maximization of a penalized objective."""

    def __init__(
        self,
        penalized: PenalizedObjective,
        smoother: SmootherConfig,
        bnb: Optional[BnBConfig] = None,
    ):
        """
        Args:
            penalized: the function to maximize
            smoother: local optimizer schedule (its seed is replaced per restart)
            bnb: branch-and-bound settings; None runs plain smoothing
        """
        self.penalized = penalized
        self.smoother = smoother
        self.bnb = bnb
        self.lower, self.upper = penalized.box.root_bounds()

    def _minimize_target(self, x: np.ndarray) -> float:
        return -self.penalized(x)

    def _run_once(self, restart: int, seed: int) -> OptimizeResult:
        restart_seed = np.random.SeedSequence([seed, restart])
        start_seq, run_seq = restart_seed.spawn(2)
        run_seed = tuple(int(v) for v in run_seq.generate_state(4))
        if self.bnb is not None:
            bnb_seed = int(run_seq.generate_state(1)[0])
            solver = BranchAndBound(self._minimize_target, replace(self.smoother, seed=run_seed), replace(self.bnb, seed=bnb_seed))
            result = solver.solve(self.lower, self.upper)
            # back to the maximization sense
            return replace(result, value_best=-result.value_best)
        start = np.random.default_rng(start_seq).uniform(self.lower, self.upper)
        cfg = replace(self.smoother, seed=run_seed, direction=MAXIMIZE)
        return minimize(self.penalized, start, cfg, bounds=(self.lower, self.upper))

    def solve(self, restarts: int = 10, seed: int = 0) -> SolveOutcome:
        """Run ``restarts`` independent solves and keep the best.

        Returns:
            SolveOutcome whose ``weights`` are the projected portfolio and
            whose feasibility report is recomputed from scratch
        """
        best: Optional[OptimizeResult] = None
        records: List[RestartRecord] = []
        evaluations = 0

        for restart in range(restarts):
            # Step 1: one independent solve
            started = time.time()
            result = self._run_once(restart, seed)
            evaluations += result.evaluations

            # Step 2: bookkeeping
            weights = self.penalized.evaluate(result.x_best).point
            report = is_feasible(self.penalized.scenarios, weights, self.penalized.reference, self.penalized.box)
            records.append(RestartRecord(restart, result.value_best, result.evaluations, report.feasible))
            logger.info(
                "restart finished",
                extra={
                    "iteration": restart,
                    "value": result.value_best,
                    "evaluations": result.evaluations,
                    "residual": report.dominance_residual,
                    "latency_ms": round((time.time() - started) * 1000.0, 3),
                },
            )
            if best is None or result.value_best > best.value_best:
                best = result

        # Step 3: map the winner back to a portfolio and re-verify it
        evaluation = self.penalized.evaluate(best.x_best)
        report = is_feasible(
            self.penalized.scenarios, evaluation.point, self.penalized.reference, self.penalized.box
        )
        if not report.feasible:
            logger.warning(
                "best point is infeasible",
                extra={"value": best.value_best, "residual": report.dominance_residual},
            )
        return SolveOutcome(
            x_raw=np.asarray(best.x_best, dtype=float),
            value=best.value_best,
            weights=evaluation.point,
            feasibility=report,
            evaluations=evaluations,
            restarts=records,
            partition_trace=best.partition_trace,
        )
