"""Reading and writing instances and parameter files.

Instances serialize to JSON with tables in row-major nested lists. The
productive tables u_a and v_a are indexed [allocation][type level]; the
costly tables u_b and v_b are indexed [instrument][type row]. Loading a
saved instance reproduces it exactly: values pass through float() untouched.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import StructuralError
from .model import (CostlySpec, JointDistribution, ProductiveSpec,
                    ScreeningInstance)

Pathish = Union[str, Path]


def instance_to_dict(inst: ScreeningInstance) -> dict:
    prod, cost, dist = inst.productive, inst.costly, inst.dist
    return {
        "theta_a": prod.theta_a.tolist(),
        "x_grid": prod.x_grid.tolist(),
        "u_a": prod.u_a.tolist(),
        "v_a": prod.v_a.tolist(),
        "theta_b": cost.theta_b.tolist(),
        "y_set": cost.y_set.tolist(),
        "y0_index": int(cost.y0_index),
        "u_b": cost.u_b.tolist(),
        "v_b": cost.v_b.tolist(),
        "support": [list(p) for p in dist.support],
        "prob": list(dist.prob),
    }


_REQUIRED = ("theta_a", "x_grid", "u_a", "v_a", "theta_b", "y_set",
             "y0_index", "u_b", "v_b", "support", "prob")


def instance_from_dict(data: dict) -> ScreeningInstance:
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise StructuralError(f"instance is missing fields: {missing}")
    prod = ProductiveSpec(
        np.asarray(data["theta_a"], dtype=float),
        np.asarray(data["x_grid"], dtype=float),
        np.asarray(data["u_a"], dtype=float),
        np.asarray(data["v_a"], dtype=float))
    cost = CostlySpec(
        np.asarray(data["theta_b"], dtype=float),
        np.asarray(data["y_set"], dtype=float),
        int(data["y0_index"]),
        np.asarray(data["u_b"], dtype=float),
        np.asarray(data["v_b"], dtype=float))
    dist = JointDistribution(
        tuple((int(p[0]), int(p[1])) for p in data["support"]),
        tuple(float(w) for w in data["prob"]))
    return ScreeningInstance(prod, cost, dist)


def canonical_json(obj) -> str:
    """Deterministic rendering: sorted keys, fixed separators, newline end."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def save_instance(inst: ScreeningInstance, path: Pathish) -> None:
    Path(path).write_text(canonical_json(instance_to_dict(inst)))


def load_instance(path: Pathish) -> ScreeningInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"not valid JSON: {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise StructuralError(f"instance file must hold an object: {path}")
    return instance_from_dict(data)


def load_params(path: Pathish) -> tuple:
    """Parameter file: an object with a 'kind' discriminator.

    Returns (kind, params) where params is the object minus the
    discriminator. Known kinds are handled by the callers: application
    generators, competitive markets, and bundling problems.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"not valid JSON: {path}: {exc}") from exc
    if not isinstance(data, dict) or "kind" not in data:
        raise StructuralError(f"parameter file needs a 'kind' field: {path}")
    params = dict(data)
    kind = params.pop("kind")
    return kind, params
