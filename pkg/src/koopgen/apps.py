"""Uses of a learned generator: recovering the vector field and building a
polynomial Lyapunov function for the time-reversed system."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .datagen import SamplePlan
from .dictionary import (Dictionary, Observable, WeightVector, analytic_generator_apply,
                         evaluate, evaluate_many)
from .edmd import GeneratorMatrix, KoopmanMatrix, log_baseline, lstsq_svd
from .errors import BasisMismatch, CoordinateNotInDictionary

__all__ = [
    "DISPLAY_ZERO",
    "CoordinateFit",
    "IdentificationReport",
    "LyapunovCandidate",
    "Verdict",
    "weight_table",
    "coordinate_indices",
    "identify_field",
    "identify_field_log_baseline",
    "fit_lyapunov",
    "candidate_from_theta",
    "lie_grid_report",
    "verify_candidate",
    "polynomial_string",
    "evaluation_grid",
]

# weights smaller than this are shown as 0 in human-readable output
DISPLAY_ZERO = 1e-9


def evaluation_grid(domain, per_axis: int = 50) -> np.ndarray:
    return SamplePlan(tuple(domain), per_axis, "grid").samples()


def weight_table(d: Dictionary, w) -> np.ndarray:
    """Arrange weights as an exponent table.

    Two-variable monomial dictionaries give ``table[i, j]`` for ``x1^i x2^j``;
    one-variable ones give a single column indexed by degree. Anything else is
    a single column in dictionary order. Missing cells are NaN.
    """
    w = np.asarray(w)
    monos = all(e.kind == "monomial" for e in d.entries)
    if monos and d.dimension in (1, 2):
        exps = [e.exponents for e in d.entries]
        shape = tuple(max(e[k] for e in exps) + 1 for k in range(d.dimension))
        if d.dimension == 1:
            shape = shape + (1,)
        table = np.full(shape, np.nan, dtype=w.dtype if np.iscomplexobj(w) else float)
        for idx, e in enumerate(exps):
            table[(e[0], e[1] if d.dimension == 2 else 0)] = w[idx]
        return table
    return w.reshape(-1, 1).copy()


def coordinate_indices(d: Dictionary, indices: Optional[Sequence[int]] = None):
    """Dictionary index of each coordinate function ``x_k``."""
    n = d.dimension
    if indices is None:
        out = []
        for k in range(n):
            idx = d.index_of(tuple(int(j == k) for j in range(n)))
            if idx < 0:
                raise CoordinateNotInDictionary(f"x{k + 1} is not in the dictionary")
            out.append(idx)
        return out
    indices = [int(i) for i in indices]
    for k, idx in enumerate(indices):
        unit = tuple(int(j == k) for j in range(n))
        if not (0 <= idx < d.N) or d[idx].kind != "monomial" or d[idx].exponents != unit:
            raise CoordinateNotInDictionary(f"index {idx} is not the coordinate x{k + 1}")
    return indices


@dataclass
class CoordinateFit:
    coordinate: int
    index: int
    weights: np.ndarray
    table_re: np.ndarray
    table_im: np.ndarray
    max_error: float = float("nan")
    rms_error: float = float("nan")

    def summary(self) -> dict:
        return {
            "coordinate": f"f{self.coordinate + 1}",
            "dictionary_index": self.index,
            "max_error": self.max_error,
            "rms_error": self.rms_error,
            "max_abs_imag_weight": float(np.abs(self.weights.imag).max()),
        }


@dataclass
class IdentificationReport:
    method: str
    coordinates: list
    diagnostics: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(c.max_error for c in self.coordinates)

    def summary(self) -> dict:
        return {"method": self.method, "max_error": self.max_error,
                "coordinates": [c.summary() for c in self.coordinates],
                "diagnostics": self.diagnostics}


def _identify(A, basis_id, d: Dictionary, indices, method, vf, domain, eval_per_axis):
    if basis_id != d.basis_id:
        raise BasisMismatch("matrix was fitted against a different dictionary")
    idx = coordinate_indices(d, indices)
    grid = Zg = None
    if vf is not None:
        grid = evaluation_grid(domain or ((-1.0, 1.0),) * d.dimension, eval_per_axis)
        Zg = evaluate_many(d, grid)
    fits = []
    for k, i in enumerate(idx):
        w = np.asarray(A)[:, i]
        fit = CoordinateFit(k, i, w.astype(complex), weight_table(d, w.real),
                            weight_table(d, np.asarray(w).imag))
        if vf is not None:
            truth = np.array([analytic_generator_apply(vf, d[i], x) for x in grid])
            err = np.abs(Zg @ w - truth)
            fit.max_error = float(err.max())
            fit.rms_error = float(np.sqrt(np.mean(err ** 2)))
        fits.append(fit)
    return IdentificationReport(method, fits)


def identify_field(gm: GeneratorMatrix, d: Dictionary, indices=None, vf=None,
                   domain=None, eval_per_axis: int = 50) -> IdentificationReport:
    """Weights ``L e_{idx(k)}`` for each coordinate, with grid errors against
    the true field when ``vf`` is given."""
    return _identify(gm.L, gm.basis_id, d, indices, "log-free", vf, domain, eval_per_axis)


def identify_field_log_baseline(km: KoopmanMatrix, d: Dictionary, indices=None, vf=None,
                                domain=None, eval_per_axis: int = 50,
                                negative_axis: str = "principal") -> IdentificationReport:
    """Same report from ``log(K) e_{idx(k)} / s``; weights are complex."""
    L_log, diag = log_baseline(km, negative_axis=negative_axis)
    rep = _identify(L_log, km.basis_id, d, indices, "log-baseline", vf, domain,
                    eval_per_axis)
    rep.diagnostics = diag
    return rep


# -- Lyapunov ---------------------------------------------------------------

@dataclass
class LyapunovCandidate:
    """``V(x) = Z_N(x) theta`` fitted so that ``Z_N(x) L theta ~ target(x)``.

    ``value_at_origin`` is the Lie derivative of V along the *reversed*
    dynamics at 0, i.e. ``-Z_N(0) L theta``; the forward value is kept in
    ``forward_value_at_origin``.
    """

    theta: WeightVector
    fit_residual: float
    lie_grid_report: dict
    value_at_origin: float
    forward_value_at_origin: float
    pinned_index: int = -1

    @property
    def coefficients(self) -> np.ndarray:
        return self.theta.coefficients.real


def _target_values(target, samples):
    if target is None:
        return np.sum(samples ** 2, axis=1)
    if isinstance(target, Observable):
        return np.array([target(x) for x in samples])
    return np.array([float(target(x)) for x in samples])


def lie_grid_report(d, L, theta, domain, per_axis):
    grid = evaluation_grid(domain, per_axis)
    lie = evaluate_many(d, grid) @ (L @ theta)
    k_max = int(np.argmax(lie))
    k_min = int(np.argmin(lie))
    return {
        "grid_per_axis": per_axis,
        "forward_max": float(lie[k_max]),
        "forward_argmax": grid[k_max].tolist(),
        "forward_min": float(lie[k_min]),
        "forward_argmin": grid[k_min].tolist(),
        # reversed dynamics: Lie derivative is -Z L theta
        "reversed_max": float(-lie[k_min]),
        "reversed_argmax": grid[k_min].tolist(),
    }


def fit_lyapunov(gm: GeneratorMatrix, d: Dictionary, plan: SamplePlan, target=None,
                 eval_per_axis: int = 50) -> LyapunovCandidate:
    """Least-squares ``theta`` for ``Z_N(x) L theta ~ target(x)`` over the plan.

    ``L`` is the generator of the forward field; the default target is
    ``|x|^2``. The column of ``X L`` belonging to the constant observable is
    numerically zero, so its coefficient is pinned to 0 instead of being left
    to the SVD cutoff.
    """
    if gm.basis_id != d.basis_id:
        raise BasisMismatch("generator was fitted against a different dictionary")
    L = np.asarray(gm.L, dtype=float)
    samples = plan.samples()
    A = evaluate_many(d, samples) @ L
    g = _target_values(target, samples)

    cols = np.arange(d.N)
    pinned = -1
    c = d.constant_index()
    norms = np.linalg.norm(A, axis=0)
    if c >= 0 and norms[c] <= 1e-9 * norms.max():
        pinned = c
        cols = cols[cols != c]
    sol, _, _ = lstsq_svd(A[:, cols], g[:, None])
    theta = np.zeros(d.N)
    theta[cols] = sol[:, 0]
    residual = float(np.linalg.norm(A @ theta - g))

    origin = np.zeros(d.dimension)
    fwd0 = float(evaluate(d, origin) @ (L @ theta))
    report = lie_grid_report(d, L, theta, plan.domain, eval_per_axis)
    return LyapunovCandidate(WeightVector(theta, d.basis_id), residual, report,
                             -fwd0, fwd0, pinned)


def candidate_from_theta(gm: GeneratorMatrix, d: Dictionary, plan: SamplePlan, theta,
                         eval_per_axis: int = 50) -> LyapunovCandidate:
    """Wrap externally supplied weights as a candidate (no fit performed)."""
    w = WeightVector.of(d, theta)
    theta = w.coefficients.real
    L = np.asarray(gm.L, dtype=float)
    fwd0 = float(evaluate(d, np.zeros(d.dimension)) @ (L @ theta))
    return LyapunovCandidate(w, float("nan"),
                             lie_grid_report(d, L, theta, plan.domain, eval_per_axis),
                             -fwd0, fwd0)


@dataclass
class Verdict:
    passed: bool
    positivity_margin: float
    positivity_argmin: list
    decrease_margin: float
    decrease_argmax: list
    points_checked: int
    puncture: float
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "positivity_margin_min_V": self.positivity_margin,
            "positivity_argmin": self.positivity_argmin,
            "decrease_margin_max_reversed_lie": self.decrease_margin,
            "decrease_argmax": self.decrease_argmax,
            "points_checked": self.points_checked,
            "puncture_radius": self.puncture,
            "failures": self.failures,
        }


def verify_candidate(cand: LyapunovCandidate, gm: GeneratorMatrix, d: Dictionary,
                     plan: SamplePlan, puncture: float = 0.05,
                     eval_per_axis: int = 50) -> Verdict:
    """PASS iff ``V > 0`` and ``-Z_N L theta < 0`` on the grid minus a ball
    of radius ``puncture`` around the origin."""
    if cand.theta.basis_id != gm.basis_id or gm.basis_id != d.basis_id:
        raise BasisMismatch("candidate, generator and dictionary must share a basis")
    theta = cand.theta.coefficients.real
    grid = evaluation_grid(plan.domain, eval_per_axis)
    grid = grid[np.linalg.norm(grid, axis=1) >= puncture]
    Z = evaluate_many(d, grid)
    V = Z @ theta
    rev = -(Z @ (np.asarray(gm.L, dtype=float) @ theta))
    kv = int(np.argmin(V))
    kr = int(np.argmax(rev))
    failures = []
    if not V[kv] > 0:
        failures.append(f"V <= 0 at {int(np.sum(~(V > 0)))} grid points")
    if not rev[kr] < 0:
        failures.append(f"reversed Lie derivative >= 0 at {int(np.sum(~(rev < 0)))} grid points")
    return Verdict(not failures, float(V[kv]), grid[kv].tolist(), float(rev[kr]),
                   grid[kr].tolist(), int(grid.shape[0]), float(puncture), failures)


def polynomial_string(d: Dictionary, w, zero: float = DISPLAY_ZERO, digits: int = 4) -> str:
    """Readable ``c*label + ...`` with coefficients below ``zero`` dropped."""
    w = np.asarray(w).real
    parts = []
    for obs, c in zip(d.entries, w):
        if abs(c) < zero:
            continue
        if obs.kind == "monomial":
            factors = [("x" if d.dimension == 1 else f"x{k + 1}") + (f"^{e}" if e > 1 else "")
                       for k, e in enumerate(obs.exponents) if e > 0]
            label = "*".join(factors) or "1"
        else:
            label = f"({obs.label})"
        mag = f"{abs(c):.{digits}g}"
        term = mag if label == "1" else f"{mag}*{label}"
        if not parts:
            parts.append(("-" if c < 0 else "") + term)
        else:
            parts.append(("- " if c < 0 else "+ ") + term)
    return " ".join(parts) if parts else "0"
