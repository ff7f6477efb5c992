"""Estimate reports and their JSON encoding.

Floats are written with 17 significant digits so that a report parsed back
from JSON compares equal to the original.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


@dataclass
class Stage:
    name: str
    epsilon: float
    value: Any

    def to_dict(self) -> dict:
        return {"name": self.name, "epsilon": self.epsilon, "value": self.value}


@dataclass
class EstimateReport:
    estimate: float
    epsilon_total: float
    stages: list
    params: dict
    seed: Optional[int] = None
    transcript: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {
            "estimate": self.estimate,
            "epsilon_total": self.epsilon_total,
            "stages": [s.to_dict() for s in self.stages],
            "params": self.params,
            "seed": self.seed,
        }
        if self.transcript is not None:
            out["transcript"] = self.transcript
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "EstimateReport":
        return cls(
            estimate=obj["estimate"],
            epsilon_total=obj["epsilon_total"],
            stages=[Stage(s["name"], s["epsilon"], s["value"]) for s in obj["stages"]],
            params=obj["params"],
            seed=obj.get("seed"),
            transcript=obj.get("transcript"),
        )

    @classmethod
    def from_json(cls, text: str) -> "EstimateReport":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EstimateReport):
            return NotImplemented
        return self.to_json() == other.to_json()


def _float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot encode non-finite float {x} as JSON")
    s = "%.17g" % x
    # keep floats recognisable as floats after a round trip
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float at 17 significant digits and stable key order."""
    parts: list[str] = []
    _emit(obj, parts, indent, 0)
    return "".join(parts)


def _emit(obj, out, indent, level):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad + json.dumps(str(k)) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not len(seq):
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(seq):
            out.append(("," if i else "") + pad)
            _emit(v, out, indent, level + 1)
        out.append(end + "]")
    elif hasattr(obj, "to_dict"):
        _emit(obj.to_dict(), out, indent, level)
    else:
        raise TypeError(f"cannot encode {type(obj).__name__} as JSON")
