"""Dictionaries of polynomial observables and their evaluation.

Indices are 0-based throughout: for the 12-term family ``x1^i x2^j``
(i <= 3, j <= 2) the coordinate ``x1`` sits at index 1 and ``x2`` at index 4.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BasisMismatch, ConfigError

__all__ = [
    "Observable",
    "Dictionary",
    "WeightVector",
    "monomial",
    "polynomial",
    "monomials_1d",
    "monomials_2d",
    "dictionary_from_spec",
    "evaluate",
    "evaluate_many",
    "analytic_generator_apply",
    "reconstruct",
]


@dataclass(frozen=True)
class Observable:
    """A polynomial ``sum_t c_t prod_k x_k^{e_tk}``.

    ``kind`` is ``"monomial"`` for a single unit-coefficient term.
    """

    kind: str
    terms: tuple  # ((coef, (e_1, ..., e_n)), ...)
    label: str

    @property
    def dimension(self) -> int:
        return len(self.terms[0][1])

    @property
    def exponents(self):
        if self.kind != "monomial":
            raise AttributeError("exponents are defined for monomials only")
        return self.terms[0][1]

    def __call__(self, x) -> float:
        return float(_eval_terms(self.terms, np.atleast_2d(np.asarray(x, float)))[0])

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "label": self.label,
            "terms": [[c, list(e)] for c, e in self.terms],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Observable":
        terms = tuple((float(c), tuple(int(v) for v in e)) for c, e in d["terms"])
        return cls(d["kind"], terms, d["label"])


def _label(exps: Sequence[int]) -> str:
    if len(exps) == 1:
        return f"x^{exps[0]}"
    return "*".join(f"x{k + 1}^{e}" for k, e in enumerate(exps))


def monomial(exponents: Sequence[int], label: str | None = None) -> Observable:
    exps = tuple(int(e) for e in exponents)
    if not exps or any(e < 0 for e in exps):
        raise ValueError("exponents must be a nonempty nonnegative vector")
    return Observable("monomial", ((1.0, exps),), label or _label(exps))


def polynomial(terms, label: str) -> Observable:
    """Custom polynomial from ``[(coef, exponents), ...]``."""
    terms = tuple((float(c), tuple(int(v) for v in e)) for c, e in terms)
    if not terms:
        raise ValueError("polynomial needs at least one term")
    n = len(terms[0][1])
    for c, e in terms:
        if len(e) != n or any(v < 0 for v in e) or not np.isfinite(c):
            raise ValueError(f"invalid term {(c, e)}")
    return Observable("custom-polynomial", terms, label)


@dataclass(frozen=True)
class Dictionary:
    entries: tuple
    spec: str = ""

    def __post_init__(self):
        if len(self.entries) < 1:
            raise ValueError("dictionary needs at least one observable")
        n = self.entries[0].dimension
        if any(e.dimension != n for e in self.entries):
            raise ValueError("observables disagree on state dimension")

    @property
    def N(self) -> int:
        return len(self.entries)

    @property
    def dimension(self) -> int:
        return self.entries[0].dimension

    @property
    def labels(self):
        return [e.label for e in self.entries]

    @property
    def basis_id(self) -> str:
        blob = json.dumps([e.to_json() for e in self.entries], sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def __len__(self):
        return self.N

    def __getitem__(self, i) -> Observable:
        return self.entries[i]

    def index_of(self, exponents) -> int:
        """Index of the monomial with these exponents, or ``-1``."""
        exps = tuple(int(e) for e in exponents)
        for i, e in enumerate(self.entries):
            if e.kind == "monomial" and e.exponents == exps:
                return i
        return -1

    def constant_index(self) -> int:
        return self.index_of((0,) * self.dimension)

    def kernel_terms(self):
        """Flattened term arrays ``(exps, coef, owner)`` for the kernels."""
        exps, coef, owner = [], [], []
        for i, obs in enumerate(self.entries):
            for c, e in obs.terms:
                exps.append(e)
                coef.append(c)
                owner.append(i)
        return (np.asarray(exps, dtype=np.int32).reshape(len(coef), self.dimension),
                np.asarray(coef, dtype=float), np.asarray(owner, dtype=np.int32))

    def manifest(self) -> dict:
        return {
            "spec": self.spec,
            "basis_id": self.basis_id,
            "N": self.N,
            "dimension": self.dimension,
            "labels": self.labels,
            "entries": [e.to_json() for e in self.entries],
        }

    @classmethod
    def from_manifest(cls, d: dict) -> "Dictionary":
        out = cls(tuple(Observable.from_json(e) for e in d["entries"]), d.get("spec", ""))
        if "basis_id" in d and d["basis_id"] != out.basis_id:
            raise BasisMismatch("dictionary manifest basis_id does not match its entries")
        return out


def monomials_2d(max_i: int, max_j: int) -> Dictionary:
    """``x1^i x2^j`` ordered with j outermost: (0,0), (1,0), ..., (max_i, max_j)."""
    if max_i < 0 or max_j < 0:
        raise ValueError("degrees must be nonnegative")
    entries = tuple(monomial((i, j), f"x1^{i}*x2^{j}")
                    for j in range(max_j + 1) for i in range(max_i + 1))
    return Dictionary(entries, f"monomials2d:max_i={max_i},max_j={max_j}")


def monomials_1d(min_deg: int, max_deg: int) -> Dictionary:
    """``x^k`` for ``min_deg <= k <= max_deg``."""
    if min_deg < 0 or max_deg < min_deg:
        raise ValueError("need 0 <= min_deg <= max_deg")
    entries = tuple(monomial((k,)) for k in range(min_deg, max_deg + 1))
    return Dictionary(entries, f"monomials1d:min={min_deg},max={max_deg}")


def _parse_params(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {part!r}")
        try:
            out[key.strip()] = int(val)
        except ValueError:
            raise ConfigError(f"non-integer value in {part!r}") from None
    return out


def dictionary_from_spec(spec: str) -> Dictionary:
    """Parse ``monomials2d:max_i=3,max_j=2`` or ``monomials1d:min=1,max=3``."""
    name, _, rest = spec.strip().partition(":")
    params = _parse_params(rest)
    try:
        if name == "monomials2d" and set(params) == {"max_i", "max_j"}:
            return monomials_2d(params["max_i"], params["max_j"])
        if name == "monomials1d" and set(params) == {"min", "max"}:
            return monomials_1d(params["min"], params["max"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown dictionary spec {spec!r}")


def _ipow(v: np.ndarray, e: int) -> np.ndarray:
    # repeated products, same as the kernels
    r = np.ones_like(v)
    for _ in range(e):
        r = r * v
    return r


def _eval_terms(terms, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    for c, e in terms:
        v = np.full(X.shape[0], c)
        for k, ek in enumerate(e):
            v = v * _ipow(X[:, k], ek)
        out = out + v
    return out


def evaluate_many(d: Dictionary, X) -> np.ndarray:
    """Rows ``Z_N(x)`` for each row x of ``X``; shape ``(M, N)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != d.dimension:
        raise ValueError(f"states have dimension {X.shape[1]}, dictionary expects {d.dimension}")
    return np.column_stack([_eval_terms(obs.terms, X) for obs in d.entries])


def evaluate(d: Dictionary, x) -> np.ndarray:
    """``[z_0(x), ..., z_{N-1}(x)]``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return evaluate_many(d, x[None, :])[0]


def analytic_generator_apply(vf, obs: Observable, x) -> float:
    """Exact Lie derivative ``grad z(x) . f(x)`` of a polynomial observable."""
    x = np.asarray(x, dtype=float).reshape(-1)
    fx = vf.eval(x)
    total = 0.0
    for c, e in obs.terms:
        for k, ek in enumerate(e):
            if ek == 0:
                continue
            g = c * ek * x[k] ** (ek - 1)
            for l, el in enumerate(e):
                if l != k:
                    g *= x[l] ** el
            total += g * fx[k]
    return float(total)


@dataclass(frozen=True)
class WeightVector:
    """Coefficients ``w`` with ``h(x) = Z_N(x) w`` in a given dictionary."""

    coefficients: np.ndarray
    basis_id: str

    def __post_init__(self):
        object.__setattr__(self, "coefficients",
                           np.asarray(self.coefficients, dtype=complex).reshape(-1))

    def __len__(self):
        return self.coefficients.size

    @classmethod
    def unit(cls, d: Dictionary, i: int) -> "WeightVector":
        w = np.zeros(d.N, dtype=complex)
        w[i] = 1.0
        return cls(w, d.basis_id)

    @classmethod
    def of(cls, d: Dictionary, values) -> "WeightVector":
        w = cls(values, d.basis_id)
        if len(w) != d.N:
            raise BasisMismatch(f"weight length {len(w)} != dictionary size {d.N}")
        return w


def _check_basis(d: Dictionary, w: WeightVector):
    if w.basis_id != d.basis_id or len(w) != d.N:
        raise BasisMismatch(
            f"weights fitted against basis {w.basis_id}, dictionary is {d.basis_id}")


def reconstruct(d: Dictionary, w: WeightVector, x) -> complex:
    """``Z_N(x) . w`` as a complex number (read ``.real`` / ``.imag``)."""
    _check_basis(d, w)
    return complex(evaluate(d, x) @ w.coefficients)
