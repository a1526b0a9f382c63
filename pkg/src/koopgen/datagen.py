"""Training data for the generator fit: features ``Z_N(x)`` and labels
``lam^2 T_tau Z_N(x) - lam Z_N(x)``.

The label is the difference of two O(lam) numbers, so the kernels integrate
the shifted quantity ``lam^2 int exp(-lam s) (z(phi(s,x)) - z(x)) ds`` (which
is O(1)) and the constant part is added in closed form. The weight
``lam^2 exp(-lam s)`` is negligible beyond ``s = layer_width / lam``, so the
joint integration stops there and the remaining tail is only bounded.
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dictionary import Dictionary, evaluate, evaluate_many
from .dynamics import Flow, SemigroupGrowthEstimate, flow_many
from .errors import STATUS_ERRORS, IntegrationError, raise_for_status

__all__ = [
    "SamplePlan",
    "GenConfig",
    "TrainingSet",
    "truncated_resolvent_integral",
    "label_row",
    "generate",
]

QUADRATURES = ("augmented-ode", "snapshot-quadrature")


@dataclass(frozen=True)
class SamplePlan:
    """Sample points in an axis-aligned box.

    ``grid`` mode places ``per_axis`` points per axis including both faces of
    the box (first axis varies slowest); ``random`` mode draws
    ``per_axis ** n`` uniform points from ``numpy.random.default_rng(seed)``.
    """

    domain: tuple
    per_axis: int
    mode: str = "grid"
    seed: int = 0

    def __post_init__(self):
        dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        object.__setattr__(self, "domain", dom)
        if not dom:
            raise ValueError("domain must have at least one axis")
        if any(not lo < hi for lo, hi in dom):
            raise ValueError("each axis needs lo < hi")
        if self.per_axis < 1:
            raise ValueError("per_axis must be >= 1")
        if self.mode not in ("grid", "random"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")

    @property
    def dimension(self) -> int:
        return len(self.domain)

    @property
    def count(self) -> int:
        return self.per_axis ** self.dimension

    def samples(self) -> np.ndarray:
        if self.mode == "random":
            rng = np.random.default_rng(self.seed)
            lo = np.array([a for a, _ in self.domain])
            hi = np.array([b for _, b in self.domain])
            return lo + (hi - lo) * rng.random((self.count, self.dimension))
        axes = [np.linspace(lo, hi, self.per_axis) if self.per_axis > 1
                else np.array([(lo + hi) / 2]) for lo, hi in self.domain]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def to_json(self) -> dict:
        return {"domain": [list(b) for b in self.domain], "per_axis": self.per_axis,
                "mode": self.mode, "seed": self.seed}

    @classmethod
    def from_json(cls, d: dict) -> "SamplePlan":
        return cls(tuple(tuple(b) for b in d["domain"]), int(d["per_axis"]),
                   d.get("mode", "grid"), int(d.get("seed", 0)))


@dataclass(frozen=True)
class GenConfig:
    lam: float
    tau: float
    quadrature: str = "augmented-ode"
    snapshots: int = 400
    layer_width: float = 40.0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lambda must be positive and finite")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError("tau must be positive and finite")
        if self.quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {QUADRATURES}")
        if self.snapshots < 3:
            raise ValueError("need at least 3 snapshots")
        if not self.layer_width > 0:
            raise ValueError("layer_width must be positive")

    @property
    def layer_end(self) -> float:
        return min(self.tau, self.layer_width / self.lam)

    @property
    def fully_truncated(self) -> bool:
        """``exp(-lam tau) < 1e-30``: the truncation term is numerically absent."""
        return self.lam * self.tau > 30 * math.log(10)

    def check_growth(self, estimate: SemigroupGrowthEstimate) -> bool:
        """Warn (and return False) unless ``lam`` exceeds the growth rate."""
        if self.lam <= estimate.omega_hat:
            warnings.warn(f"lambda={self.lam} does not exceed estimated growth "
                          f"rate {estimate.omega_hat:.3g}", RuntimeWarning, stacklevel=2)
            return False
        return True

    def to_json(self) -> dict:
        return {"lambda": self.lam, "tau": self.tau, "quadrature": self.quadrature,
                "snapshots": self.snapshots, "layer_width": self.layer_width}

    @classmethod
    def from_json(cls, d: dict) -> "GenConfig":
        return cls(float(d["lambda"]), float(d["tau"]), d.get("quadrature", "augmented-ode"),
                   int(d.get("snapshots", 400)), float(d.get("layer_width", 40.0)))


@dataclass
class TrainingSet:
    X: np.ndarray
    Y: np.ndarray
    config: GenConfig
    basis_id: str
    samples: np.ndarray
    field_spec: str = ""
    dropped: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1]


def _snapshot_integrals(flow: Flow, d: Dictionary, X0, cfg: GenConfig, want_state):
    """Composite trapezoid over log-spaced snapshots of each trajectory."""
    lam = cfg.lam
    end = cfg.layer_end
    times = np.concatenate(([0.0], np.geomspace(min(1e-3 / lam, end / 10), end,
                                                cfg.snapshots - 1)))
    z0 = evaluate_many(d, X0)
    states = X0.copy()
    status = np.zeros(X0.shape[0], dtype=np.int32)
    prev_g = np.zeros_like(z0)
    total = np.zeros_like(z0)
    for k in range(1, times.size):
        states, st = flow_many(flow, states, times[k] - times[k - 1])
        status = np.where(status == 0, st, status)
        g = lam * lam * math.exp(-lam * times[k]) * (evaluate_many(d, states) - z0)
        total += 0.5 * (times[k] - times[k - 1]) * (g + prev_g)
        prev_g = g
    if want_state and end < cfg.tau:
        states, st = flow_many(flow, states, cfg.tau - end)
        status = np.where(status == 0, st, status)
    return states, total, status


def _shifted_integrals(flow: Flow, d: Dictionary, X0, cfg: GenConfig, want_state: bool):
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if cfg.quadrature == "snapshot-quadrature":
        return _snapshot_integrals(flow, d, X0, cfg, want_state)
    vf = flow.field
    exps, coef, owner = d.kernel_terms()
    return flow.kernels.resolvent_batch(
        vf.kind, vf.sign, vf.rate, exps, coef, owner, d.N, X0, cfg.lam, cfg.tau,
        cfg.layer_end, flow.rel_tol, flow.abs_tol, flow.max_step, flow.blowup,
        want_state, vf.func)


def truncated_resolvent_integral(flow: Flow, d: Dictionary, x, cfg: GenConfig):
    """``(phi(tau, x), [lam^2 int_0^tau exp(-lam s) z_i(phi(s, x)) ds]_i)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    states, shifted, status = _shifted_integrals(flow, d, x[None, :], cfg, True)
    raise_for_status(status[0], f"x={x.tolist()}")
    z = evaluate(d, x)
    return states[0], shifted[0] + cfg.lam * z * -math.expm1(-cfg.lam * cfg.tau)


def _labels(shifted, Z, cfg: GenConfig):
    # lam^2 T z - lam z = shifted - lam z exp(-lam tau)
    return shifted - cfg.lam * math.exp(-cfg.lam * cfg.tau) * Z


def label_row(flow: Flow, d: Dictionary, x, cfg: GenConfig) -> np.ndarray:
    """``lam^2 T_tau Z_N(x) - lam Z_N(x)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    _, shifted, status = _shifted_integrals(flow, d, x[None, :], cfg, False)
    raise_for_status(status[0], f"x={x.tolist()}")
    return _labels(shifted[0], evaluate(d, x), cfg)


def _chunks(m: int, parts: int):
    bounds = np.linspace(0, m, parts + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def generate(flow: Flow, d: Dictionary, plan: SamplePlan, cfg: GenConfig,
             strict: bool = True, threads: Optional[int] = None) -> TrainingSet:
    """Stack features and labels over every sample of ``plan``.

    Samples are independent; with ``threads > 1`` they are split into
    contiguous chunks whose rows land at fixed indices, so the output does not
    depend on the worker count. In strict mode any failed sample raises; in
    lenient mode failed rows are dropped and their indices recorded.
    """
    if plan.dimension != flow.field.dimension or d.dimension != plan.dimension:
        raise ValueError("field, dictionary and sample plan dimensions differ")
    samples = plan.samples()
    m = samples.shape[0]
    shifted = np.empty((m, d.N))
    status = np.empty(m, dtype=np.int32)

    def work(bounds):
        a, b = bounds
        _, J, st = _shifted_integrals(flow, d, samples[a:b], cfg, False)
        shifted[a:b] = J
        status[a:b] = st

    threads = max(1, int(threads or 1))
    chunks = _chunks(m, threads if cfg.quadrature == "augmented-ode" else 1)
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))
    else:
        for c in chunks:
            work(c)

    bad = np.flatnonzero(status)
    if bad.size and strict:
        first = int(status[bad[0]])
        exc = STATUS_ERRORS.get(first, IntegrationError)
        raise exc(f"{bad.size} of {m} samples failed; first at index {bad[0]} "
                  f"x={samples[bad[0]].tolist()}")
    keep = np.flatnonzero(status == 0)
    samples_kept = samples[keep]
    X = evaluate_many(d, samples_kept)
    Y = _labels(shifted[keep], X, cfg)

    tail = 0.0
    if cfg.layer_end < cfg.tau and X.size:
        tail = cfg.lam * math.exp(-cfg.lam * cfg.layer_end) * 2.0 * float(np.abs(X).max())
    diagnostics = {
        "layer_end": cfg.layer_end,
        "tail_bound_estimate": tail,
        "fully_truncated": cfg.fully_truncated,
        "dropped_count": int(bad.size),
    }
    return TrainingSet(X, Y, cfg, d.basis_id, samples_kept, flow.field.spec,
                       [int(i) for i in bad], diagnostics)
