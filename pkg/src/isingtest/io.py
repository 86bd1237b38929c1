"""Model JSON, sample CSV and instance sidecar files."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .model import IsingModel, check_spins
from .sampling import SampleBatch


class ModelFormatError(ValueError):
    pass


def model_to_dict(model: IsingModel) -> dict:
    return {
        "n": model.n,
        "node_theta": [float(t) for t in model.node_theta],
        "edges": [[u, v, float(t)] for u, v, t in model.edges()],
    }


def model_from_dict(data) -> IsingModel:
    """Strict parse of ``{"n", "node_theta", "edges": [[u, v, theta], ...]}``."""
    if not isinstance(data, dict):
        raise ModelFormatError("model must be a JSON object")
    extra = set(data) - {"n", "node_theta", "edges"}
    if extra:
        raise ModelFormatError(f"unknown model keys: {sorted(extra)}")
    n = data.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ModelFormatError(f"n must be a positive integer, got {n!r}")
    node_theta = data.get("node_theta", [0.0] * n)
    if not isinstance(node_theta, list) or len(node_theta) != n:
        raise ModelFormatError(f"node_theta must be a list of {n} numbers")
    for t in node_theta:
        if not _is_real(t):
            raise ModelFormatError(f"node_theta entries must be finite numbers, got {t!r}")
    edges = data.get("edges", [])
    if not isinstance(edges, list):
        raise ModelFormatError("edges must be a list of [u, v, theta]")
    seen = set()
    parsed = []
    for e in edges:
        if not (isinstance(e, list) and len(e) == 3):
            raise ModelFormatError(f"edge {e!r} is not [u, v, theta]")
        u, v, t = e
        if not all(isinstance(i, int) and not isinstance(i, bool) for i in (u, v)):
            raise ModelFormatError(f"edge {e!r} has non-integer endpoints")
        if not _is_real(t):
            raise ModelFormatError(f"edge {e!r} has a non-finite weight")
        if u == v:
            raise ModelFormatError(f"self-loop {e!r}")
        if not (0 <= u < n and 0 <= v < n):
            raise ModelFormatError(f"edge {e!r} has an endpoint outside 0..{n - 1}")
        if u > v:
            raise ModelFormatError(f"edge {e!r} must list the smaller endpoint first")
        if (u, v) in seen:
            raise ModelFormatError(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
        parsed.append((u, v, float(t)))
    return IsingModel.from_edges(n, parsed, [float(t) for t in node_theta])


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def parse_model(path) -> IsingModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: malformed JSON ({exc})") from exc
    return model_from_dict(data)


def serialize_model(model: IsingModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def _meta_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".meta.json")


def write_samples(batch: SampleBatch, path) -> Path:
    """One CSV row per sample plus ``<path>.meta.json``; returns the sidecar path."""
    np.savetxt(path, batch.spins, fmt="%d", delimiter=",")
    meta = _meta_path(path)
    meta.write_text(json.dumps(batch.meta, indent=2, sort_keys=True) + "\n")
    return meta


def read_samples(path) -> SampleBatch:
    spins = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    spins = check_spins(spins)
    meta_file = _meta_path(path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    return SampleBatch(spins, meta)


def write_instance(model: IsingModel, sidecar: dict, path) -> Path:
    """Model JSON at ``path`` plus ``<path>.instance.json`` carrying the family data."""
    serialize_model(model, path)
    p = Path(path)
    side = p.with_name(p.name + ".instance.json")
    side.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return side
