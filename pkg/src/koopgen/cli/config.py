"""Experiment configuration: JSON file plus command-line overrides."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..datagen import GenConfig, SamplePlan
from ..dictionary import dictionary_from_spec
from ..dynamics import Flow, field_from_spec
from ..errors import ConfigError, KoopgenError

__all__ = ["ExperimentConfig", "load_config"]


@dataclass
class ExperimentConfig:
    """Every knob of one experiment. Defaults reproduce the Van der Pol case
    study: 100x100 grid on (-1, 1)^2, 12 monomials, tau = 1, lambda = 1e6."""

    field: str = "vanderpol"
    dictionary: str = "monomials2d:max_i=3,max_j=2"
    domain: tuple = ((-1.0, 1.0), (-1.0, 1.0))
    per_axis: int = 100
    sampling: str = "grid"
    seed: int = 0
    lam: float = 1e6
    tau: float = 1.0
    quadrature: str = "augmented-ode"
    snapshots: int = 400
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float | None = None
    blowup: float = 1e6
    baseline_s: float | None = 0.5
    output: str = "koopgen-out"
    strict: bool = True
    eval_per_axis: int = 50
    puncture: float = 0.05

    # JSON uses "lambda"; the attribute cannot
    _ALIASES = {"lambda": "lam"}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            attr = cls._ALIASES.get(key, key)
            if attr not in names:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[attr] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["domain"] = [list(b) for b in self.domain]
        return d

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        try:
            self.domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        except (TypeError, ValueError):
            raise ConfigError("domain must be a list of [lo, hi] pairs") from None
        for name in ("per_axis", "seed", "snapshots", "eval_per_axis"):
            need(isinstance(getattr(self, name), int) and not isinstance(getattr(self, name), bool),
                 f"{name} must be an integer")
        need(self.per_axis >= 1, "sample plan is empty: per_axis must be >= 1")
        need(self.eval_per_axis >= 2, "eval_per_axis must be >= 2")
        for name in ("lam", "tau", "rel_tol", "abs_tol", "blowup", "puncture"):
            v = getattr(self, name)
            need(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
                 and v > 0, f"{name} must be a positive number")
        if self.max_step is not None:
            need(isinstance(self.max_step, (int, float)) and self.max_step > 0,
                 "max_step must be positive or null")
        if self.baseline_s is not None:
            need(isinstance(self.baseline_s, (int, float)) and self.baseline_s > 0,
                 "baseline_s must be positive or null")
        need(isinstance(self.strict, bool), "strict must be true or false")
        need(isinstance(self.output, str) and self.output, "output must be a path")
        try:
            vf = self.build_field()
            d = self.build_dictionary()
            plan = self.build_plan()
            self.build_gen_config()
        except KoopgenError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        need(vf.dimension == d.dimension == plan.dimension,
             f"field (n={vf.dimension}), dictionary (n={d.dimension}) and domain "
             f"(n={plan.dimension}) disagree on dimension")

    def build_field(self):
        return field_from_spec(self.field)

    def build_dictionary(self):
        return dictionary_from_spec(self.dictionary)

    def build_plan(self) -> SamplePlan:
        return SamplePlan(self.domain, self.per_axis, self.sampling, self.seed)

    def build_gen_config(self) -> GenConfig:
        return GenConfig(float(self.lam), float(self.tau), self.quadrature, self.snapshots)

    def build_flow(self, backend=None) -> Flow:
        return Flow(self.build_field(), float(self.rel_tol), float(self.abs_tol),
                    math.inf if self.max_step is None else float(self.max_step),
                    float(self.blowup), backend)

    def data_hash(self) -> str:
        """Hash of everything that determines the training data."""
        d = self.to_dict()
        keys = ("field", "dictionary", "domain", "per_axis", "sampling", "seed", "lambda",
                "tau", "quadrature", "snapshots", "rel_tol", "abs_tol", "max_step", "blowup",
                "strict")
        blob = json.dumps({k: d[k] for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return ExperimentConfig.from_dict(data)
