"""Experiment harness for dominance-constrained portfolio runs.

Builds the problem a RunConfig describes and runs it:
1. Load and subset the return data, apply the bond-return override
2. Build the reference profile, budget box, objective and penalty
3. Solve through the SolveOrchestrator and re-verify the result
4. Write the JSON report and the CDF profile CSV

Outputs:
- <name>.json report: weights, indicators, residuals, evaluation counts
- <name>_profile.csv: t, cdf_portfolio, cdf_reference at every breakpoint
- <name>_scan.csv for feasible-set scans: x1, x2, g, feasible

All files are written to a temporary name and renamed into place.
"""

import json
import logging
import os
import tempfile
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.spatial import ConvexHull, Delaunay, QhullError

from fsd_reshaping.config import ReferenceConfig, RunConfig
from fsd_reshaping.errors import BudgetExhaustedError, InvalidParameterError, ReshapingError
from fsd_reshaping.solvers.orchestrator import SolveOrchestrator
from fsd_reshaping.tools.dataset import load_csv
from fsd_reshaping.tools.distribution import (
    Objective,
    ScenarioMatrix,
    StepCDF,
    empirical_cdf,
    indicator,
    riskless_column,
)
from fsd_reshaping.tools.dominance import (
    FeasibleBox,
    ReferenceProfile,
    G,
    H,
    g_batch,
    is_feasible,
    merge_profiles,
    reference_from_portfolio,
    reference_from_steps,
    to_quantile_form,
    var_profile,
)
from fsd_reshaping.tools.penalty import PenalizedObjective, PenaltyVariant, make_penalty_spec

logger = logging.getLogger(__name__)

PROFILE_EPS = 1e-9
MAX_SCAN_RESOLUTION = 2001
SCAN_CHUNK = 20000


@dataclass(frozen=True)
class Problem:
    scenarios: ScenarioMatrix
    reference: ReferenceProfile
    box: FeasibleBox
    objective: Objective
    penalized: PenalizedObjective


def load_scenarios(cfg: RunConfig) -> ScenarioMatrix:
    s = load_csv(cfg.dataset).scenarios.select(cfg.asset_columns)
    if cfg.bond_return is not None:
        j = riskless_column(s)
        if j is None:
            raise InvalidParameterError("bond_return is set but the selected assets have no riskless column")
        s = s.with_constant_column(j, cfg.bond_return)
    return s


def build_reference(s: ScenarioMatrix, ref: ReferenceConfig) -> ReferenceProfile:
    if ref.kind == "portfolio":
        profile = reference_from_portfolio(s, ref.weights, ref.delta, ref.form)
    elif ref.kind == "steps":
        profile = reference_from_steps(ref.points, ref.form)
    else:
        profile = var_profile(ref.alpha, ref.q_alpha, ref.tau, ref.form)
    if ref.merge:
        profile = merge_profiles([profile] + [build_reference(s, m) for m in ref.merge], ref.form)
    return profile


def resolve_anchor(cfg: RunConfig, s: ScenarioMatrix) -> Optional[np.ndarray]:
    """None means the all-in riskless portfolio."""
    anchor = cfg.penalty.anchor
    if anchor == "reference" or (anchor is None and riskless_column(s) is None):
        if cfg.reference.weights is None:
            raise InvalidParameterError("penalty.anchor 'reference' needs a portfolio reference")
        return np.asarray(cfg.reference.weights, dtype=float)
    if anchor in (None, "riskless"):
        return None
    return np.asarray(anchor, dtype=float)


def build_problem(cfg: RunConfig) -> Problem:
    s = load_scenarios(cfg)
    ref = build_reference(s, cfg.reference)
    if PenaltyVariant(cfg.penalty.variant).uses_quantiles:
        # H variants certify on quantiles; report the same residual
        ref = to_quantile_form(ref)
    box = FeasibleBox(cfg.box_lower) if cfg.box_lower is not None else FeasibleBox.nonnegative(s.n)
    obj = cfg.objective.to_objective()
    spec = make_penalty_spec(
        s,
        ref,
        box,
        obj,
        variant=cfg.penalty.variant,
        anchor=resolve_anchor(cfg, s),
        c=cfg.penalty.c,
        margin=cfg.penalty.margin,
        literal_offset=cfg.penalty.literal_offset,
        lambda_tolerance=cfg.penalty.lambda_tolerance,
    )
    return Problem(s, ref, box, obj, PenalizedObjective(s, ref, box, obj, spec))


def indicator_table(s: ScenarioMatrix, x: np.ndarray, levels: Dict[str, List[float]]) -> Dict[str, float]:
    table = {"Mean": indicator(s, x, Objective.mean())}
    for gamma in levels.get("var", []):
        obj = Objective.var(gamma)
        table[obj.label] = indicator(s, x, obj)
    for alpha in levels.get("avar", []):
        obj = Objective.avar(alpha)
        table[obj.label] = indicator(s, x, obj)
    return table


def _curve(cdf: StepCDF) -> Dict[str, List[float]]:
    return {"breakpoints": cdf.breakpoints.tolist(), "levels": cdf.levels.tolist()}


@dataclass
class RunReport:
    config_name: str
    seed: int
    assets: List[str]
    weights: List[float]
    objective: str
    objective_value: float
    penalized_value: float
    indicators: Dict[str, float]
    residual_G: float
    residual_H: float
    budget_slack: float
    feasible: bool
    budget_exhausted: bool
    evaluations: int
    restarts: List[Dict[str, Any]]
    penalty: Dict[str, Any]
    profiles: Dict[str, Dict[str, List[float]]]
    partition_trace: List[Dict[str, Any]] = field(default_factory=list)
    wall_time_sec: float = 0.0
    report_path: Optional[str] = None
    profile_path: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _atomic_write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_report(report: RunReport, path: Union[str, os.PathLike]) -> Path:
    out = _atomic_write_text(Path(path), json.dumps(report.to_dict(), indent=2) + "\n")
    logger.info("report written", extra={"path": str(out)})
    return out


def profile_frame(s: ScenarioMatrix, x, ref: ReferenceProfile) -> pd.DataFrame:
    """Both CDFs sampled at every breakpoint and just after it."""
    portfolio = empirical_cdf(s, x)
    jumps = np.union1d(portfolio.breakpoints, ref.cdf.breakpoints)
    t = np.unique(np.concatenate(([jumps[0] - PROFILE_EPS], jumps, jumps + PROFILE_EPS)))
    return pd.DataFrame(
        {
            "t": t,
            "cdf_portfolio": np.asarray(portfolio.evaluate(t), dtype=float),
            "cdf_reference": np.asarray(ref.cdf.evaluate(t), dtype=float),
        }
    )


def export_profile(s: ScenarioMatrix, x, ref: ReferenceProfile, path: Union[str, os.PathLike]) -> Path:
    """Write the step-plot CSV (t, cdf_portfolio, cdf_reference)."""
    frame = profile_frame(s, x, ref)
    out = _atomic_write_text(Path(path), frame.to_csv(index=False))
    logger.info("profile written", extra={"path": str(out)})
    return out


def _output_paths(cfg: RunConfig) -> Dict[str, Path]:
    out_dir = Path(cfg.output.dir)
    return {
        "report": out_dir / (cfg.output.report or f"{cfg.name}.json"),
        "profile": out_dir / (cfg.output.profile or f"{cfg.name}_profile.csv"),
    }


def run(cfg: RunConfig, write: bool = True) -> RunReport:
    """Solve the configured problem and write its report and profile.

    Raises:
        BudgetExhaustedError: after writing the partial report, when no
            feasible portfolio was found
    """
    started = time.time()
    run_id = uuid.uuid4().hex[:8]
    logger.info("run started", extra={"run_id": run_id, "preset": cfg.name, "seed": cfg.seed})

    # Step 1: problem
    problem = build_problem(cfg)
    s, ref = problem.scenarios, problem.reference

    # Step 2: solve
    orchestrator = SolveOrchestrator(problem.penalized, cfg.smoother, cfg.bnb if cfg.bnb_enabled else None)
    outcome = orchestrator.solve(restarts=cfg.restarts, seed=cfg.seed)
    x = outcome.weights

    # Step 3: re-verify from scratch
    feasibility = is_feasible(s, x, ref, problem.box)
    report = RunReport(
        config_name=cfg.name,
        seed=cfg.seed,
        assets=list(s.asset_labels),
        weights=x.tolist(),
        objective=problem.objective.label,
        objective_value=indicator(s, x, problem.objective),
        penalized_value=outcome.value,
        indicators=indicator_table(s, x, cfg.levels),
        residual_G=G(s, x, ref),
        residual_H=H(s, x, ref),
        budget_slack=float(1.0 - np.sum(x)),
        feasible=feasibility.feasible,
        budget_exhausted=not feasibility.feasible,
        evaluations=outcome.evaluations,
        restarts=[asdict(r) for r in outcome.restarts],
        penalty=problem.penalized.describe(),
        profiles={"portfolio": _curve(empirical_cdf(s, x)), "reference": _curve(ref.cdf)},
        partition_trace=[{k: v for k, v in entry.items() if k != "latency_ms"} for entry in outcome.partition_trace],
    )
    report.wall_time_sec = round(time.time() - started, 3)

    # Step 4: outputs
    if write:
        paths = _output_paths(cfg)
        report.report_path = str(paths["report"])
        report.profile_path = str(export_profile(s, x, ref, paths["profile"]))
        write_report(report, paths["report"])
    logger.info(
        "run finished",
        extra={
            "run_id": run_id,
            "preset": cfg.name,
            "best_value": report.objective_value,
            "residual": feasibility.dominance_residual,
            "evaluations": report.evaluations,
            "latency_ms": round(report.wall_time_sec * 1000.0, 3),
        },
    )
    if report.budget_exhausted:
        raise BudgetExhaustedError(
            f"no feasible portfolio found for '{cfg.name}' (residual {feasibility.dominance_residual:.6g})",
            report_path=report.report_path,
        )
    return report


def check_feasible(cfg: RunConfig) -> Dict[str, Any]:
    """Feasibility of the configured reference portfolio, anchor and weights."""
    s = load_scenarios(cfg)
    ref = build_reference(s, cfg.reference)
    box = FeasibleBox(cfg.box_lower) if cfg.box_lower is not None else FeasibleBox.nonnegative(s.n)
    result: Dict[str, Any] = {"config_name": cfg.name, "assets": list(s.asset_labels), "top_quantile": ref.top_quantile}
    candidates = {}
    if cfg.reference.weights is not None:
        candidates["reference_portfolio"] = np.asarray(cfg.reference.weights, dtype=float)
    try:
        anchor = resolve_anchor(cfg, s)
    except ReshapingError:
        anchor = None
    if anchor is None and riskless_column(s) is not None:
        anchor = np.zeros(s.n)
        anchor[riskless_column(s)] = 1.0
    if anchor is not None:
        candidates["anchor"] = anchor
    if cfg.weights is not None:
        candidates["weights"] = np.asarray(cfg.weights, dtype=float)
    for name, x in candidates.items():
        result[name] = {"weights": x.tolist(), **asdict(is_feasible(s, x, ref, box))}
    return result


@dataclass
class ScanResult:
    frame: pd.DataFrame
    feasible_count: int
    components: int
    convex: bool
    path: Optional[str] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "points": int(len(self.frame)),
            "feasible": self.feasible_count,
            "components": self.components,
            "convex": self.convex,
            "path": self.path,
        }


def _grid_is_convex(points: np.ndarray, feasible: np.ndarray) -> bool:
    """False when some infeasible grid point lies in the hull of the feasible ones."""
    inside_pts = points[feasible]
    if inside_pts.shape[0] < 3:
        return True
    try:
        hull = ConvexHull(inside_pts)
        tri = Delaunay(inside_pts[hull.vertices])
    except QhullError:
        # collinear feasible points
        return True
    in_hull = tri.find_simplex(points[~feasible]) >= 0
    return not bool(np.any(in_hull))


def scan_feasible(
    cfg: RunConfig, resolution: Optional[int] = None, path: Union[str, os.PathLike, None] = None
) -> ScanResult:
    """Brute-force G over a grid of two weights; no optimizer involved."""
    resolution = resolution or cfg.scan.resolution
    if len(cfg.assets) != 2:
        raise InvalidParameterError(f"scan needs exactly 2 assets, got {len(cfg.assets)}")
    if not 2 <= resolution <= MAX_SCAN_RESOLUTION:
        raise InvalidParameterError(f"resolution must lie in [2, {MAX_SCAN_RESOLUTION}], got {resolution}")

    s = load_scenarios(cfg)
    ref = build_reference(s, cfg.reference)
    box = FeasibleBox(cfg.box_lower) if cfg.box_lower is not None else FeasibleBox.nonnegative(2)

    axis = np.linspace(0.0, cfg.scan.upper, resolution)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([x1.ravel(), x2.ravel()])
    g = np.concatenate([g_batch(s, points[i : i + SCAN_CHUNK], ref) for i in range(0, len(points), SCAN_CHUNK)])
    in_box = (points.sum(axis=1) <= 1.0 + 1e-12) & np.all(points >= box.lower - 1e-12, axis=1)
    feasible = (g <= 0.0) & in_box

    _, components = ndimage.label(feasible.reshape(resolution, resolution))
    result = ScanResult(
        frame=pd.DataFrame({"x1": points[:, 0], "x2": points[:, 1], "g": g, "feasible": feasible.astype(int)}),
        feasible_count=int(feasible.sum()),
        components=int(components),
        convex=_grid_is_convex(points, feasible),
    )
    if path is not None:
        result.path = str(_atomic_write_text(Path(path), result.frame.to_csv(index=False)))
        logger.info("scan written", extra={"path": result.path})
    return result
