"""Run configuration: one JSON document, defaults filled in, hashed canonically."""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .calibration import default_alpha_grid
from .params import Numerics, PhysicalParams
from .synthetic import SyntheticSpec, reference_spec

_PHYSICAL = {f.name for f in fields(PhysicalParams)}


@dataclass(frozen=True)
class AlphaGrid:
    """Scan grid ``lo, lo + step, ..., hi`` or an explicit list of ``values``."""

    lo: float = 0.05
    hi: float = 0.95
    step: float = 0.01
    values: tuple | None = None

    def __post_init__(self):
        if self.values is None and not (0 < self.lo <= self.hi < 1 and self.step > 0):
            raise ValueError("alpha grid needs 0 < lo <= hi < 1 and step > 0")

    def array(self):
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return default_alpha_grid(self.step, self.lo, self.hi)


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run depends on.

    ``network`` is a network JSON file; when it is ``None`` the synthetic
    network described by ``synthetic`` is generated with ``seed``. ``domain``
    is ``(lo, hi)``; it defaults to the synthetic box and must be given for
    network files. ``grid`` is the cell count per axis and
    ``rev`` the REV count per axis.
    """

    network: str | None = None
    output_dir: str = "out"
    domain: tuple | None = None
    grid: tuple = (16, 16, 16)
    rev: tuple = (2, 2, 2)
    params: PhysicalParams = field(default_factory=PhysicalParams)
    numerics: Numerics = field(default_factory=Numerics)
    alpha: float = 0.4
    alpha_grid: AlphaGrid = field(default_factory=AlphaGrid)
    sensitivity_fractions: tuple = tuple(np.round(np.arange(-10, 11) * 0.01, 2).tolist())
    rev_study_center: tuple | None = None
    rev_study_sizes: tuple = (5.0e-5, 1.0e-4, 1.5e-4, 2.0e-4, 2.5e-4, 3.0e-4)
    synthetic: SyntheticSpec = field(default_factory=reference_spec)
    seed: int = 0

    def __post_init__(self):
        for name in ("grid", "rev"):
            v = getattr(self, name)
            if len(v) != 3 or any(int(c) != c or c < 1 for c in v):
                raise ValueError(f"{name} must be three positive integers")
        if any(g % r for g, r in zip(self.grid, self.rev)):
            raise ValueError("grid counts must be multiples of the REV counts")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.domain is not None:
            lo, hi = np.asarray(self.domain[0]), np.asarray(self.domain[1])
            if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
                raise ValueError("domain needs 3-vectors lo < hi")

    @property
    def box(self):
        if self.domain is not None:
            return tuple(map(float, self.domain[0])), tuple(map(float, self.domain[1]))
        return tuple(self.synthetic.lo), tuple(self.synthetic.hi)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["params"] = self.params.to_dict()
        d["numerics"] = self.numerics.to_dict()
        d["alpha_grid"] = asdict(self.alpha_grid)
        d["synthetic"] = self.synthetic.to_dict()
        if self.domain is not None:
            d["domain"] = {"lo": list(self.domain[0]), "hi": list(self.domain[1])}
        return _jsonable(d)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        # physical parameters may also be given at the top level
        flat = {k: data.pop(k) for k in list(data) if k in _PHYSICAL}
        if flat:
            data["params"] = {**data.get("params", {}), **flat}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "params" in data:
            data["params"] = PhysicalParams.from_dict(data["params"])
        if "numerics" in data:
            data["numerics"] = Numerics.from_dict(data["numerics"])
        if "alpha_grid" in data:
            ag = dict(data["alpha_grid"])
            if ag.get("values") is not None:
                ag["values"] = tuple(float(v) for v in ag["values"])
            data["alpha_grid"] = AlphaGrid(**ag)
        if "synthetic" in data:
            data["synthetic"] = SyntheticSpec.from_dict(data["synthetic"])
        for key in ("grid", "rev"):
            if key in data:
                data[key] = tuple(int(v) for v in data[key])
        for key in ("sensitivity_fractions", "rev_study_sizes", "rev_study_center"):
            if data.get(key) is not None:
                data[key] = tuple(float(v) for v in data[key])
        dom = data.get("domain")
        if dom is not None:
            if isinstance(dom, dict):
                dom = (dom["lo"], dom["hi"])
            data["domain"] = tuple(tuple(float(v) for v in c) for c in dom)
        return cls(**data)

    def dumps(self):
        """Canonical JSON: sorted keys, shortest round-trip float repr."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False)

    def sha256(self):
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_config(path):
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


def save_config(config, path):
    Path(path).write_text(config.dumps() + "\n")
