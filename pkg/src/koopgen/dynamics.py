"""Benchmark vector fields, flow maps and growth diagnostics."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ConfigError, raise_for_status

__all__ = [
    "VectorField",
    "Flow",
    "SemigroupGrowthEstimate",
    "vanderpol",
    "linear_1d",
    "custom_field",
    "reverse",
    "field_from_spec",
    "flow_to",
    "flow_many",
    "estimate_growth",
]


@dataclass(frozen=True)
class VectorField:
    """Right-hand side ``f`` of ``x' = f(x)``.

    Built-in kinds are evaluated by the compiled kernels; a ``custom`` field
    wraps a Python callable and always runs on the pure-Python backend.
    """

    name: str
    dimension: int
    kind: int
    rate: float = 0.0
    is_reversed: bool = False
    func: Optional[Callable] = field(default=None, compare=False, repr=False)

    @property
    def sign(self) -> float:
        return -1.0 if self.is_reversed else 1.0

    @property
    def spec(self) -> str:
        """Config string that rebuilds this field (custom fields have none)."""
        if self.kind == _kernels.FIELD_VANDERPOL:
            base = "vanderpol"
        elif self.kind == _kernels.FIELD_LINEAR:
            base = f"linear:a={self.rate!r}"
        else:
            base = f"custom:{self.name}"
        return base + ("-reversed" if self.is_reversed else "")

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dimension:
            raise ValueError(f"state has length {x.size}, field expects {self.dimension}")
        f = _kernels._pykernels.make_field(self.kind, self.sign, self.rate, self.func)
        return np.array(f([float(v) for v in x]))

    __call__ = eval


def vanderpol() -> VectorField:
    """Van der Pol oscillator ``[x2, -x1 + (1 - x1^2) x2]``."""
    return VectorField("vanderpol", 2, _kernels.FIELD_VANDERPOL)


def linear_1d(a: float) -> VectorField:
    """Scalar linear field ``f(x) = a x``."""
    a = float(a)
    if not math.isfinite(a):
        raise ValueError("rate must be finite")
    return VectorField(f"linear(a={a!r})", 1, _kernels.FIELD_LINEAR, rate=a)


def custom_field(name: str, dimension: int, func: Callable) -> VectorField:
    return VectorField(name, int(dimension), _kernels.FIELD_CUSTOM, func=func)


def reverse(vf: VectorField) -> VectorField:
    """Time-reversed field: output negated, ``is_reversed`` toggled."""
    return replace(vf, is_reversed=not vf.is_reversed)


_LINEAR_RE = re.compile(r"^linear:a=([^,\s]+?)(-reversed)?$")


def field_from_spec(spec: str) -> VectorField:
    """Parse ``vanderpol``, ``vanderpol-reversed`` or ``linear:a=<float>``."""
    spec = spec.strip()
    if spec == "vanderpol":
        return vanderpol()
    if spec == "vanderpol-reversed":
        return reverse(vanderpol())
    m = _LINEAR_RE.match(spec)
    if m:
        try:
            a = float(m.group(1))
        except ValueError:
            raise ConfigError(f"bad rate in field spec {spec!r}") from None
        vf = linear_1d(a)
        return reverse(vf) if m.group(2) else vf
    raise ConfigError(f"unknown field spec {spec!r}")


@dataclass(frozen=True)
class Flow:
    """Solution map of a vector field under adaptive Dormand-Prince 5(4)."""

    field: VectorField
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    blowup: float = 1e6
    backend: Optional[str] = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")

    @property
    def kernels(self):
        return _kernels.backend_for(self.field.kind, self.backend)


def flow_many(flow: Flow, x0s, t: float):
    """Flow each row of ``x0s`` by ``t``; returns ``(states, status)``.

    Failed rows carry a nonzero status (1 blow-up, 2 step underflow, 3 step
    budget) instead of raising.
    """
    t = float(t)
    if not (t >= 0 and math.isfinite(t)):
        raise ValueError("t must be finite and non-negative")
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    if x0s.shape[1] != flow.field.dimension:
        raise ValueError("state dimension does not match the field")
    vf = flow.field
    return flow.kernels.flow_batch(vf.kind, vf.sign, vf.rate, x0s, t, flow.rel_tol,
                                   flow.abs_tol, flow.max_step, flow.blowup, vf.func)


def flow_to(flow: Flow, x0, t: float) -> np.ndarray:
    """``phi(t, x0)``; raises :class:`BlowUp` or :class:`StepUnderflow`."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    out, status = flow_many(flow, x0[None, :], t)
    raise_for_status(status[0], f"x0={x0.tolist()}, t={t}")
    return out[0]


@dataclass(frozen=True)
class SemigroupGrowthEstimate:
    M_hat: float
    omega_hat: float
    sample_count: int


def estimate_growth(flow: Flow, dictionary, samples, horizon: float,
                    n_times: int = 21) -> SemigroupGrowthEstimate:
    """Fit ``M exp(omega t)`` to the sup-norm envelope of dictionary values.

    The envelope at time t is ``max_m max_i |z_i(phi(t, x_m))|`` normalised by
    its value at t = 0; ``log`` of it is fitted linearly in t. Informational
    only.
    """
    from .dictionary import evaluate_many

    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    times = np.linspace(0.0, horizon, n_times)
    states = samples.copy()
    env = np.empty(n_times)
    prev = 0.0
    for k, t in enumerate(times):
        if t > prev:
            states, status = flow_many(flow, states, t - prev)
            if status.any():
                raise_for_status(status[status != 0][0], "estimate_growth")
            prev = t
        env[k] = np.abs(evaluate_many(dictionary, states)).max()
    if env[0] == 0.0:
        return SemigroupGrowthEstimate(1.0, 0.0, samples.shape[0])
    logs = np.log(np.maximum(env / env[0], np.finfo(float).tiny))
    omega, intercept = np.polyfit(times, logs, 1)
    return SemigroupGrowthEstimate(max(1.0, float(np.exp(intercept))), float(omega),
                                   samples.shape[0])
