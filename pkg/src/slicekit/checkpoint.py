"""Checkpoint directories: a JSON manifest plus one raw array blob.

Layout::

    <dir>/manifest.json   format_version, model spec, counters, RNG
                          states, and an array table (name, dtype,
                          shape, byte offset into the blob)
    <dir>/params.bin      all arrays concatenated as little-endian
                          float64, in table order

Arrays round-trip bit-exactly (``astype('<f8').tobytes()``), and the
trainer's RNG/velocity state rides along, so training resumed from a
checkpoint replays the exact run it interrupted.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError
from .models import build_model

__all__ = ["FORMAT_VERSION", "save_checkpoint", "load_checkpoint", "restore_model"]

FORMAT_VERSION = 1


def _array_entries(named_arrays):
    table, chunks, offset = [], [], 0
    for name, arr in named_arrays:
        raw = np.ascontiguousarray(arr, dtype=np.float64).astype("<f8").tobytes()
        table.append({
            "name": name,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    return table, b"".join(chunks)


def save_checkpoint(path, model, trainer=None, extra: dict | None = None) -> Path:
    """Write model (and optionally trainer) state into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    named = [(f"param/{name}", t.data) for name, t in model.parameters()]
    manifest: dict = {
        "format_version": FORMAT_VERSION,
        "model_spec": model.spec(),
    }
    if trainer is not None:
        state = trainer.state_dict()
        named += [(f"velocity/{k}", v) for k, v in sorted(state["velocity"].items())]
        manifest["trainer"] = {
            "epoch": state["epoch"],
            "step": state["step"],
            "rng_data": state["rng_data"],
            "rng_scheme": state["rng_scheme"],
            "rng_dropout": state["rng_dropout"],
        }
    if extra:
        manifest["extra"] = extra
    table, blob = _array_entries(named)
    manifest["arrays"] = table
    (path / "params.bin").write_bytes(blob)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _read_manifest(path: Path) -> dict:
    mf = path / "manifest.json"
    try:
        manifest = json.loads(mf.read_text())
    except OSError as e:
        raise DataError(f"cannot read checkpoint manifest {mf}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{mf}: invalid JSON: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"{mf}: format_version {version}, this build reads {FORMAT_VERSION}")
    return manifest


def load_checkpoint(path, model=None, trainer=None) -> dict:
    """Read a checkpoint directory; optionally restore into live objects.

    Returns the manifest with an added ``"data"`` dict of name -> array.
    When ``model`` is given its parameters are overwritten in place
    (shape mismatches raise :class:`ShapeError`); when ``trainer`` is
    given its counters, RNG streams, and optimizer velocities are
    restored for exact resume.
    """
    path = Path(path)
    manifest = _read_manifest(path)
    try:
        blob = (path / "params.bin").read_bytes()
    except OSError as e:
        raise DataError(f"cannot read checkpoint blob in {path}: {e}") from e
    data: dict[str, np.ndarray] = {}
    for entry in manifest["arrays"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        if hi > len(blob):
            raise DataError(f"{path}: array {entry['name']!r} overruns params.bin")
        arr = np.frombuffer(blob[lo:hi], dtype="<f8").astype(np.float64)
        data[entry["name"]] = arr.reshape(entry["shape"])
    manifest["data"] = data

    if model is not None:
        for name, t in model.parameters():
            key = f"param/{name}"
            if key not in data:
                raise DataError(f"checkpoint lacks array {key!r}")
            if tuple(data[key].shape) != t.data.shape:
                raise ShapeError(
                    f"{key}: checkpoint shape {data[key].shape} vs model {t.data.shape}"
                )
            t.data[...] = data[key]
    if trainer is not None:
        info = manifest.get("trainer")
        if info is None:
            raise DataError("checkpoint was saved without trainer state")
        velocity = {
            e["name"][len("velocity/"):]: data[e["name"]]
            for e in manifest["arrays"] if e["name"].startswith("velocity/")
        }
        trainer.load_state({
            "epoch": info["epoch"],
            "step": info["step"],
            "rng_data": info["rng_data"],
            "rng_scheme": info["rng_scheme"],
            "rng_dropout": info["rng_dropout"],
            "velocity": velocity,
        })
    return manifest


def restore_model(path):
    """Rebuild the model named in the manifest and load its parameters."""
    path = Path(path)
    manifest = _read_manifest(path)
    model = build_model(manifest["model_spec"])
    load_checkpoint(path, model=model)
    return model
