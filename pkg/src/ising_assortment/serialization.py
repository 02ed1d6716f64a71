"""JSON encoding of models and instances.

Document layout::

    {"n": 3, "domain": "binary", "theta": [[...], ...], "profits": [...]}

``profits`` is optional. Floats are written with Python's shortest round-trip
``repr``, so a save/load cycle reproduces every finite double bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import Domain, Instance, IsingModel


def model_to_dict(model: IsingModel, profits=None) -> dict:
    doc = {
        "n": model.n,
        "domain": model.domain.value,
        "theta": [[float(v) for v in row] for row in model.theta],
    }
    if profits is not None:
        doc["profits"] = [float(v) for v in profits]
    return doc


def instance_to_dict(instance: Instance) -> dict:
    return model_to_dict(instance.model, instance.profits)


def model_from_dict(doc: dict) -> tuple[IsingModel, np.ndarray | None]:
    """Parse a model document; returns the model and the profits (or None)."""
    try:
        n = int(doc["n"])
        domain = Domain(doc.get("domain", "binary"))
        theta = np.array(doc["theta"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed model document: {exc}") from exc
    if theta.shape != (n, n):
        raise ValueError(f"theta shape {theta.shape} does not match n = {n}")
    profits = doc.get("profits")
    if profits is not None:
        profits = np.array(profits, dtype=np.float64)
        if profits.shape != (n,):
            raise ValueError(f"profits must have length {n}")
    return IsingModel(theta, domain), profits


def instance_from_dict(doc: dict) -> Instance:
    model, profits = model_from_dict(doc)
    if profits is None:
        raise ValueError("instance document has no 'profits'")
    return Instance(model, profits)


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save_model(path, model: IsingModel, profits=None) -> None:
    Path(path).write_text(dumps(model_to_dict(model, profits)))


def save_instance(path, instance: Instance) -> None:
    Path(path).write_text(dumps(instance_to_dict(instance)))


def load_model(path) -> tuple[IsingModel, np.ndarray | None]:
    return model_from_dict(json.loads(Path(path).read_text()))


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))
