"""Versioned model file format.

Version 1 is three UTF-8 lines::

    ENGAGEMENT-SVM-MODEL 1
    {"binaries": [...], "class_labels": [...], "thresholds_fingerprint": "..."}
    sha256 <hex digest of the JSON line>

The JSON line has sorted keys and no extra whitespace. Each entry of
``binaries`` (same order as ``class_labels``) stores ``weights``, ``bias``,
``alphas``, ``support_indices`` and ``train_meta``. Floats use the shortest
repr that round-trips exactly.
"""
import hashlib
import json
from pathlib import Path

import numpy as np

from .multiclass import MulticlassModel
from .smo import BinaryModel

MAGIC = "ENGAGEMENT-SVM-MODEL"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _binary_to_dict(b: BinaryModel) -> dict:
    return {
        "weights": b.weights.tolist(),
        "bias": float(b.bias),
        "alphas": b.alphas.tolist(),
        "support_indices": [int(i) for i in b.support_indices],
        "train_meta": b.train_meta,
    }


def _binary_from_dict(d: dict) -> BinaryModel:
    return BinaryModel(
        weights=np.array(d["weights"], dtype=float),
        bias=float(d["bias"]),
        alphas=np.array(d["alphas"], dtype=float),
        support_indices=np.array(d["support_indices"], dtype=np.int64),
        train_meta=d["train_meta"],
    )


def serialize_model(model: MulticlassModel) -> bytes:
    body = {
        "class_labels": [int(c) for c in model.class_labels],
        "thresholds_fingerprint": model.thresholds_fingerprint,
        "binaries": [_binary_to_dict(b) for b in model.binaries],
    }
    payload = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return f"{MAGIC} {VERSION}\n{payload}\nsha256 {digest}\n".encode("utf-8")


def deserialize_model(data: bytes) -> MulticlassModel:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ModelFormatError("corrupted payload: not UTF-8") from None
    lines = text.split("\n")
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise ModelFormatError("not a model file: bad magic string")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ModelFormatError("corrupted payload: unreadable version") from None
    if version != VERSION:
        raise ModelFormatError(f"version mismatch: file is version {version}, reader supports {VERSION}")
    if len(lines) < 3 or not lines[2].startswith("sha256 "):
        raise ModelFormatError("corrupted payload: truncated file")
    payload, digest = lines[1], lines[2].split(" ", 1)[1].strip()
    if hashlib.sha256(payload.encode("utf-8")).hexdigest() != digest:
        raise ModelFormatError("corrupted payload: checksum mismatch")
    try:
        body = json.loads(payload)
        return MulticlassModel(
            class_labels=tuple(int(c) for c in body["class_labels"]),
            binaries=tuple(_binary_from_dict(b) for b in body["binaries"]),
            thresholds_fingerprint=body["thresholds_fingerprint"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupted payload: {exc}") from None


def save_model(path, model: MulticlassModel) -> None:
    Path(path).write_bytes(serialize_model(model))


def load_model(path) -> MulticlassModel:
    return deserialize_model(Path(path).read_bytes())
