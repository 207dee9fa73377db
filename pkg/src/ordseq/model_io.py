"""Fitted-model document: an explicit JSON schema that round-trips exactly.

Floats serialise via repr (shortest round-trip representation), so a saved
model reloads bit-identically and reloaded predictions equal in-memory ones.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data_model import Ordering, StandardizationInfo, SubsetSchedule
from .errors import SchemaMismatch
from .lasso_engine import LambdaGrid, SparseCoef

SCHEMA_VERSION = 1
MODES = ("lasso", "ridge", "lasso-missing")


@dataclass
class FittedModel:
    """Everything needed to predict: original-scale sparse coefficients,
    the transform, the grid geometry and the selected cell."""

    coefficients: SparseCoef
    std_info: StandardizationInfo
    ordering: Ordering
    schedule: SubsetSchedule
    lambdas: LambdaGrid
    k_star: int
    l_star: int
    mode: str
    column_names: tuple | None = None
    response_name: str | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def intercept(self) -> float:
        return self.coefficients.intercept

    @property
    def p(self) -> int:
        return self.coefficients.p

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predictions in original response units for original-unit columns."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise SchemaMismatch(f"expected {self.p} columns, got {X.shape[1]}")
        coef = self.coefficients
        if coef.n_nonzero == 0:
            return np.full(X.shape[0], coef.intercept)
        return X[:, coef.indices0()] @ coef.values + coef.intercept

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "coefficients": {
                "indices": self.coefficients.indices.tolist(),
                "values": [repr(v) for v in self.coefficients.values.tolist()],
                "p": self.coefficients.p,
                "intercept": repr(self.coefficients.intercept),
            },
            "standardization": {
                "centers": [repr(v) for v in self.std_info.centers.tolist()],
                "scales": [repr(v) for v in self.std_info.scales.tolist()],
                "y_center": repr(self.std_info.y_center),
                "policy": self.std_info.policy,
            },
            "ordering": self.ordering.perm.tolist(),
            "schedule": self.schedule.cutoffs.tolist(),
            "lambdas": [repr(v) for v in self.lambdas.values.tolist()],
            "selected": {"k": self.k_star, "l": self.l_star},
            "column_names": list(self.column_names) if self.column_names else None,
            "response_name": self.response_name,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedModel":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise SchemaMismatch(f"unsupported schema version {doc.get('schema_version')}")
        if doc.get("mode") not in MODES:
            raise SchemaMismatch(f"unknown mode {doc.get('mode')!r}")
        c = doc["coefficients"]
        coef = SparseCoef(
            np.array(c["indices"], dtype=int),
            np.array([float(v) for v in c["values"]]),
            int(c["p"]),
            float(c["intercept"]),
        )
        s = doc["standardization"]
        info = StandardizationInfo(
            np.array([float(v) for v in s["centers"]]),
            np.array([float(v) for v in s["scales"]]),
            float(s["y_center"]),
            s["policy"],
        )
        names = doc.get("column_names")
        return cls(
            coefficients=coef,
            std_info=info,
            ordering=Ordering(np.array(doc["ordering"], dtype=int)),
            schedule=SubsetSchedule(np.array(doc["schedule"], dtype=int)),
            lambdas=LambdaGrid(np.array([float(v) for v in doc["lambdas"]])),
            k_star=int(doc["selected"]["k"]),
            l_star=int(doc["selected"]["l"]),
            mode=doc["mode"],
            column_names=tuple(names) if names else None,
            response_name=doc.get("response_name"),
            metadata=doc.get("metadata", {}),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FittedModel":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaMismatch(f"cannot read model file {path}: {exc}") from exc
        return cls.from_dict(doc)


def build_metadata(seed, source_path=None, extra=None) -> dict:
    meta = {
        "seed": seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if source_path is not None:
        try:
            with open(source_path, "rb") as fh:
                meta["source_sha256"] = hashlib.sha256(fh.read()).hexdigest()
        except OSError:
            meta["source_sha256"] = None
    if extra:
        meta.update(extra)
    return meta
