"""
Named run configurations for the bundled return data set.

Each entry includes:
- name: what ``load_config`` and the CLI accept in place of a file path
- description: the experiment in one line
- tags: grouping used by ``get_presets_by_tag``
- config: the JSON document the preset stands for

Asset numbers follow the bundled file: 1 Am.T., 2 A.T.&T., 3 U.S.S.,
4 G.M., 5 A.T.&Sfe, 6 C.C., 7 Bdn., 8 Frstn., 9 S.S., 10 Bond.

The step-reference experiments use a riskless return of 0.13 instead of
the file's 0.125: the closed-form projection needs the bond strictly above
the top reference level 0.125, and the known optimal weights only
match their means at 0.13.
"""

import copy
from typing import Dict, List

STEP_REFERENCE = [[0.05, 0.2], [0.1, 0.4], [0.11, 0.6], [0.125, 1.0]]

_TWO_ASSET = {
    "assets": [1, 2],
    "objective": {"kind": "mean"},
    "reference": {"kind": "portfolio", "weights": [0.3, 0.7], "delta": 0.05},
    "penalty": {"variant": "discontinuous_g", "c": 0.0659, "anchor": "reference"},
    "smoother": {"theta1": 0.1, "stages": 40},
    "bnb": {"enabled": True, "max_iterations": 6, "max_boxes": 16},
    "restarts": 10,
    "seed": 0,
}

_DISCONNECTED = {
    "assets": [4, 9],
    "objective": {"kind": "mean"},
    "reference": {"kind": "portfolio", "weights": [0.3, 0.7], "delta": 0.05},
    "penalty": {"variant": "discontinuous_g", "anchor": "reference"},
    "smoother": {"theta1": 0.2, "stages": 40},
    "bnb": {"enabled": True, "max_iterations": 8, "max_boxes": 16},
    "restarts": 10,
    "seed": 0,
}

_THREE_COMPONENT = {
    "assets": [4, 9, 10],
    "bond_return": 0.13,
    "objective": {"kind": "mean"},
    "reference": {"kind": "steps", "points": STEP_REFERENCE},
    "penalty": {"variant": "discontinuous_g", "anchor": "riskless"},
    "smoother": {"theta1": 0.1, "stages": 60},
    "bnb": {"enabled": True, "max_iterations": 8, "max_boxes": 16},
    "restarts": 10,
    "seed": 0,
}


def _variant(base: dict, **changes) -> dict:
    config = copy.deepcopy(base)
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(config.get(key), dict):
            config[key].update(value)
        else:
            config[key] = value
    return config


_TEN_COMPONENT = _variant(
    _THREE_COMPONENT,
    assets=[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    penalty={"variant": "projective_h_analytic"},
    smoother={"theta1": 0.2, "stages": 120},
    bnb={"max_iterations": 16, "max_boxes": 32},
)


PRESETS: List[dict] = [
    # ============ Reshaping a two-asset reference portfolio ============
    {
        "name": "exp-2asset-reshape",
        "description": "Assets 1-2, reference (0.3, 0.7) shifted by 0.05, discontinuous penalty c=0.0659",
        "tags": ["two-asset", "mean", "discontinuous"],
        "config": _TWO_ASSET,
    },
    {
        "name": "exp-2asset-reshape-large-c",
        "description": "Same problem with c=1.0659: infeasible points sink further",
        "tags": ["two-asset", "mean", "discontinuous"],
        "config": _variant(_TWO_ASSET, penalty={"c": 1.0659}),
    },
    {
        "name": "exp-disconnected-4-9",
        "description": "Assets 4 and 9, reference (0.3, 0.7), delta 0.05: disconnected feasible set",
        "tags": ["two-asset", "mean", "discontinuous", "disconnected"],
        "config": _DISCONNECTED,
    },
    {
        "name": "exp-9asset",
        "description": "Assets 1-9 with the 4/9 reference portfolio embedded, delta 0.05",
        "tags": ["nine-asset", "mean", "discontinuous", "slow"],
        "config": _variant(
            _DISCONNECTED,
            assets=[1, 2, 3, 4, 5, 6, 7, 8, 9],
            reference={"weights": [0, 0, 0, 0.3, 0, 0, 0, 0, 0.7]},
            smoother={"theta1": 0.1, "stages": 60},
            bnb={"max_iterations": 10, "max_boxes": 24},
        ),
    },
    # ============ Three components against a step reference ============
    {
        "name": "exp-3comp-mean",
        "description": "Assets 4, 9 and bond: maximize Mean, discontinuous penalty",
        "tags": ["three-component", "mean", "discontinuous"],
        "config": _THREE_COMPONENT,
    },
    {
        "name": "exp-3comp-mean-projective",
        "description": "Assets 4, 9 and bond: maximize Mean, closed-form projective penalty",
        "tags": ["three-component", "mean", "projective"],
        "config": _variant(_THREE_COMPONENT, penalty={"variant": "projective_h_analytic"}),
    },
    {
        "name": "exp-3comp-var04",
        "description": "Assets 4, 9 and bond: maximize VaR at 0.4, discontinuous penalty",
        "tags": ["three-component", "var", "discontinuous"],
        "config": _variant(_THREE_COMPONENT, objective={"kind": "var", "gamma": 0.4}),
    },
    {
        "name": "exp-3comp-avar04",
        "description": "Assets 4, 9 and bond: maximize AVaR at 0.4, discontinuous penalty",
        "tags": ["three-component", "avar", "discontinuous"],
        "config": _variant(_THREE_COMPONENT, objective={"kind": "avar", "alpha": 0.4}),
    },
    {
        "name": "exp-3comp-var04-projective",
        "description": "Assets 4, 9 and bond: maximize VaR at 0.4, closed-form projective penalty",
        "tags": ["three-component", "var", "projective"],
        "config": _variant(
            _THREE_COMPONENT,
            objective={"kind": "var", "gamma": 0.4},
            penalty={"variant": "projective_h_analytic"},
        ),
    },
    {
        "name": "exp-3comp-avar04-projective",
        "description": "Assets 4, 9 and bond: maximize AVaR at 0.4, closed-form projective penalty",
        "tags": ["three-component", "avar", "projective"],
        "config": _variant(
            _THREE_COMPONENT,
            objective={"kind": "avar", "alpha": 0.4},
            penalty={"variant": "projective_h_analytic"},
        ),
    },
    {
        "name": "exp-3comp-var07",
        "description": "Assets 4, 9 and bond: maximize VaR at 0.7, closed-form projective penalty",
        "tags": ["three-component", "var", "projective"],
        "config": _variant(
            _THREE_COMPONENT,
            objective={"kind": "var", "gamma": 0.7},
            penalty={"variant": "projective_h_analytic"},
        ),
    },
    {
        "name": "exp-3comp-avar07",
        "description": "Assets 4, 9 and bond: maximize AVaR at 0.7, closed-form projective penalty",
        "tags": ["three-component", "avar", "projective"],
        "config": _variant(
            _THREE_COMPONENT,
            objective={"kind": "avar", "alpha": 0.7},
            penalty={"variant": "projective_h_analytic"},
        ),
    },
    # ============ All ten columns against the step reference ============
    {
        "name": "exp-10comp-mean",
        "description": "All ten columns: maximize Mean, closed-form projective penalty",
        "tags": ["ten-component", "mean", "projective", "slow"],
        "config": _TEN_COMPONENT,
    },
    {
        "name": "exp-10comp-var07",
        "description": "All ten columns: maximize VaR at 0.7, closed-form projective penalty",
        "tags": ["ten-component", "var", "projective", "slow"],
        "config": _variant(
            _TEN_COMPONENT,
            objective={"kind": "var", "gamma": 0.7},
        ),
    },
    {
        "name": "exp-10comp-avar07",
        "description": "All ten columns: maximize AVaR at 0.7, closed-form projective penalty",
        "tags": ["ten-component", "avar", "projective", "slow"],
        "config": _variant(
            _TEN_COMPONENT,
            objective={"kind": "avar", "alpha": 0.7},
        ),
    },
    # ============ Feasible-set scans ============
    {
        "name": "scan-feasible-4-2",
        "description": "Grid over (x1, x2) for assets 1-2, reference (0.31, 0.69), delta 0.05",
        "tags": ["scan"],
        "config": {
            "assets": [1, 2],
            "reference": {"kind": "portfolio", "weights": [0.31, 0.69], "delta": 0.05},
            "scan": {"resolution": 201},
        },
    },
    {
        "name": "scan-disconnected-4-9",
        "description": "Grid over (x4, x9), reference (0.3, 0.7), delta 0.05",
        "tags": ["scan", "disconnected"],
        "config": {
            "assets": [4, 9],
            "reference": {"kind": "portfolio", "weights": [0.3, 0.7], "delta": 0.05},
            "scan": {"resolution": 201},
        },
    },
]

PRESET_NAMES = tuple(p["name"] for p in PRESETS)


def get_preset(name: str) -> dict:
    """Deep copy of a preset's config, with its name filled in."""
    for preset in PRESETS:
        if preset["name"] == name:
            config = copy.deepcopy(preset["config"])
            config["name"] = name
            return config
    raise KeyError(f"unknown preset '{name}'")


def get_presets_by_tag(tag: str) -> List[dict]:
    return [p for p in PRESETS if tag in p["tags"]]


def list_presets() -> Dict[str, str]:
    return {p["name"]: p["description"] for p in PRESETS}
