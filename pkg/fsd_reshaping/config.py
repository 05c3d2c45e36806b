"""
Run configuration: one JSON document per run, or the name of a bundled preset.

Key paths mirror the dataclasses below. Assets are numbered from 1 in
dataset column order (the bundled file: 1 = Am.T. ... 10 = Bond) or named
by their header label. Unknown keys are rejected.

Environment overrides (a ``.env`` file is honored through python-dotenv):
    FSD_WORKERS      branch-and-bound worker threads
    FSD_OUTPUT_DIR   report directory
    FSD_LOG_LEVEL    read by logging_config.configure_logging
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from fsd_reshaping.errors import DatasetError, InvalidParameterError
from fsd_reshaping.solvers.bnb import BnBConfig
from fsd_reshaping.solvers.smoother import SmootherConfig
from fsd_reshaping.tools.distribution import Objective
from fsd_reshaping.tools.penalty import PenaltyVariant

AssetRef = Union[int, str]


def _reject_unknown(cls, data: Dict[str, Any], path: str, extra: tuple = ()):
    if not isinstance(data, dict):
        raise InvalidParameterError(f"'{path}' must be an object")
    known = {f.name for f in fields(cls)} | set(extra)
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidParameterError(f"unknown key '{path}.{unknown[0]}'")


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str = "mean"
    gamma: Optional[float] = None
    alpha: float = 0.0
    beta: float = 1.0

    def to_objective(self) -> Objective:
        if self.kind == "var":
            if self.gamma is None:
                raise InvalidParameterError("objective.gamma is required for var")
            return Objective.var(self.gamma)
        return Objective(self.kind, self.gamma, self.alpha, self.beta)


@dataclass(frozen=True)
class ReferenceConfig:
    kind: str = "portfolio"  # portfolio | steps | var
    weights: Optional[List[float]] = None
    delta: Union[float, List[float]] = 0.0
    form: str = "cdf"
    points: Optional[List[List[float]]] = None
    alpha: Optional[float] = None
    q_alpha: Optional[float] = None
    tau: Optional[float] = None
    merge: List["ReferenceConfig"] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = "reference") -> "ReferenceConfig":
        _reject_unknown(cls, data, path)
        merge = [cls.from_dict(d, f"{path}.merge[{i}]") for i, d in enumerate(data.get("merge", []))]
        ref = cls(**{**data, "merge": merge})
        if ref.kind not in ("portfolio", "steps", "var"):
            raise InvalidParameterError(f"{path}.kind must be portfolio, steps or var")
        if ref.kind == "portfolio" and ref.weights is None:
            raise InvalidParameterError(f"{path}.weights is required for a portfolio reference")
        if ref.kind == "steps" and not ref.points:
            raise InvalidParameterError(f"{path}.points is required for a step reference")
        if ref.kind == "var" and None in (ref.alpha, ref.q_alpha, ref.tau):
            raise InvalidParameterError(f"{path} needs alpha, q_alpha and tau for a var reference")
        return ref


@dataclass(frozen=True)
class PenaltyConfig:
    variant: str = PenaltyVariant.DISCONTINUOUS_G.value
    c: Optional[float] = None
    margin: float = 0.0
    literal_offset: bool = False
    anchor: Union[str, List[float], None] = None  # riskless | reference | explicit weights
    lambda_tolerance: float = 1e-9

    def __post_init__(self):
        try:
            PenaltyVariant(self.variant)
        except ValueError as exc:
            raise InvalidParameterError(f"unknown penalty variant '{self.variant}'") from exc
        if isinstance(self.anchor, str) and self.anchor not in ("riskless", "reference"):
            raise InvalidParameterError("penalty.anchor must be 'riskless', 'reference' or a weight list")


@dataclass(frozen=True)
class ScanConfig:
    resolution: int = 201
    upper: float = 1.0


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "reports"
    report: Optional[str] = None  # file name; defaults to <config name>.json
    profile: Optional[str] = None  # defaults to <config name>_profile.csv


@dataclass(frozen=True)
class RunConfig:
    name: str = "custom"
    dataset: str = "bundled"
    assets: List[AssetRef] = field(default_factory=lambda: [1, 2])
    bond_return: Optional[float] = None
    objective: ObjectiveConfig = ObjectiveConfig()
    reference: ReferenceConfig = ReferenceConfig(weights=[0.5, 0.5])
    penalty: PenaltyConfig = PenaltyConfig()
    box_lower: Optional[List[float]] = None
    smoother: SmootherConfig = SmootherConfig()
    bnb: BnBConfig = BnBConfig()
    bnb_enabled: bool = True
    restarts: int = 10
    seed: int = 0
    levels: Dict[str, List[float]] = field(default_factory=lambda: {"var": [0.4, 0.7], "avar": [0.4, 0.7]})
    weights: Optional[List[float]] = None  # portfolio checked by feasible / profile
    scan: ScanConfig = ScanConfig()
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        if not self.assets:
            raise InvalidParameterError("assets must be a nonempty list")
        if self.restarts < 1:
            raise InvalidParameterError("restarts must be >= 1")

    @property
    def asset_columns(self) -> List[AssetRef]:
        """0-based column indices (or labels) for ScenarioMatrix.select."""
        return [a - 1 if isinstance(a, int) else a for a in self.assets]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        top = ("box",)
        _reject_unknown(cls, data, "config", extra=top)
        data = dict(data)
        kwargs: Dict[str, Any] = {}
        sections = {
            "objective": ObjectiveConfig,
            "penalty": PenaltyConfig,
            "scan": ScanConfig,
            "output": OutputConfig,
            "smoother": SmootherConfig,
        }
        for key, section in sections.items():
            if key in data:
                _reject_unknown(section, data[key], key)
                kwargs[key] = section(**data.pop(key))
        if "reference" in data:
            kwargs["reference"] = ReferenceConfig.from_dict(data.pop("reference"))
        if "bnb" in data:
            bnb = dict(data.pop("bnb"))
            kwargs["bnb_enabled"] = bool(bnb.pop("enabled", True))
            _reject_unknown(BnBConfig, bnb, "bnb")
            kwargs["bnb"] = BnBConfig(**bnb)
        if "box" in data:
            box = data.pop("box")
            if not isinstance(box, dict) or set(box) - {"lower"}:
                raise InvalidParameterError("box accepts only 'lower'")
            kwargs["box_lower"] = box.get("lower")
        if "levels" in data:
            levels = data.pop("levels")
            if not isinstance(levels, dict) or set(levels) - {"var", "avar"}:
                raise InvalidParameterError("levels accepts only 'var' and 'avar'")
            kwargs["levels"] = {"var": list(levels.get("var", [])), "avar": list(levels.get("avar", []))}
        kwargs.update(data)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidParameterError(f"invalid configuration: {exc}") from exc

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["bnb"] = {"enabled": out.pop("bnb_enabled"), **out["bnb"]}
        out["box"] = {"lower": out.pop("box_lower")}
        out["smoother"].pop("direction", None)
        return out


def apply_environment(cfg: RunConfig) -> RunConfig:
    """Overlay FSD_WORKERS and FSD_OUTPUT_DIR onto a loaded config."""
    load_dotenv()
    updates: Dict[str, Any] = {}
    workers = os.environ.get("FSD_WORKERS")
    if workers:
        try:
            updates["bnb"] = BnBConfig(**{**asdict(cfg.bnb), "workers": int(workers)})
        except ValueError as exc:
            raise InvalidParameterError(f"FSD_WORKERS must be an integer, got '{workers}'") from exc
    out_dir = os.environ.get("FSD_OUTPUT_DIR")
    if out_dir:
        updates["output"] = OutputConfig(out_dir, cfg.output.report, cfg.output.profile)
    if not updates:
        return cfg
    return RunConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, **updates})


def load_config(source: Union[str, os.PathLike, Dict[str, Any]], environment: bool = True) -> RunConfig:
    """RunConfig from a JSON file path, a preset name or a plain dict."""
    from fsd_reshaping.data.presets import PRESET_NAMES, get_preset

    if isinstance(source, dict):
        cfg = RunConfig.from_dict(source)
    elif str(source) in PRESET_NAMES:
        cfg = RunConfig.from_dict(get_preset(str(source)))
    else:
        path = Path(source)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise DatasetError(f"no such config file or preset: {source}") from exc
        except json.JSONDecodeError as exc:
            raise DatasetError(f"config {path} is not valid JSON: {exc.msg}", row=exc.lineno) from exc
        data.setdefault("name", path.stem)
        cfg = RunConfig.from_dict(data)
    return apply_environment(cfg) if environment else cfg
