"""Least-squares operator fits on a dictionary, eigenpairs and the
matrix-logarithm baseline."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .datagen import GenConfig, SamplePlan, TrainingSet
from .dictionary import Dictionary, WeightVector, evaluate_many
from .dynamics import Flow, flow_many
from .errors import (BasisMismatch, BranchCut, ConvergenceFailure, DegenerateFeatures,
                     NonDiagonalizable, raise_for_status)

__all__ = [
    "GeneratorMatrix",
    "KoopmanMatrix",
    "EigenPairs",
    "lstsq_svd",
    "fit_generator",
    "fit_koopman",
    "fit_koopman_from_data",
    "log_baseline",
    "eigen",
    "matrix_exp_eig",
    "apply_matrix_to_weights",
]

SVD_RCOND = 1e-12


def lstsq_svd(X, Y, rcond: float = SVD_RCOND):
    """Minimum-norm solution of ``min ||Y - X A||_F`` via thin SVD of ``X``.

    Singular values below ``rcond * s_max`` are treated as zero. Returns
    ``(A, rank, residual)``.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(s > rcond * s[0])) if s.size and s[0] > 0 else 0
    coeffs = (U[:, :rank].conj().T @ Y) / s[:rank, None]
    A = Vt[:rank].conj().T @ coeffs
    residual = float(np.linalg.norm(Y - X @ A))
    return A, rank, residual


@dataclass(frozen=True)
class GeneratorMatrix:
    L: np.ndarray
    basis_id: str
    residual: float
    rank_used: int
    cfg: Optional[GenConfig] = None

    @property
    def N(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class KoopmanMatrix:
    K: np.ndarray
    s: float
    basis_id: str
    residual: float
    rank_used: int


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray
    source: str
    residuals: np.ndarray = field(default=None)

    def report(self) -> dict:
        return {
            "source": self.source,
            "eigenvalues": [[float(v.real), float(v.imag)] for v in self.values],
            "residuals": [float(r) for r in self.residuals],
        }


def _fit(X, Y, what: str):
    X = np.asarray(X)
    if X.shape[0] < X.shape[1]:
        raise ValueError(f"{what}: need at least N={X.shape[1]} rows, got {X.shape[0]}")
    A, rank, residual = lstsq_svd(X, Y)
    if rank < X.shape[1]:
        warnings.warn(f"{what}: feature matrix has rank {rank} < N={X.shape[1]}; "
                      "using the minimum-norm solution", DegenerateFeatures, stacklevel=3)
    return A, rank, residual


def fit_generator(ts: TrainingSet) -> GeneratorMatrix:
    """``L = argmin_A ||Y - X A||_F`` (minimum norm)."""
    L, rank, residual = _fit(ts.X, ts.Y, "fit_generator")
    return GeneratorMatrix(L, ts.basis_id, residual, rank, ts.config)


def fit_koopman_from_data(X, Y_shift, s: float, basis_id: str) -> KoopmanMatrix:
    K, rank, residual = _fit(X, Y_shift, "fit_koopman")
    return KoopmanMatrix(K, float(s), basis_id, residual, rank)


def fit_koopman(flow: Flow, d: Dictionary, plan: SamplePlan, s: float) -> KoopmanMatrix:
    """Koopman matrix from features ``Z_N(x)`` and labels ``Z_N(phi(s, x))``."""
    if not s > 0:
        raise ValueError("sampling time s must be positive")
    samples = plan.samples()
    moved, status = flow_many(flow, samples, s)
    bad = np.flatnonzero(status)
    if bad.size:
        raise_for_status(status[bad[0]], f"{bad.size} samples failed in fit_koopman")
    return fit_koopman_from_data(evaluate_many(d, samples), evaluate_many(d, moved), s,
                                 d.basis_id)


def log_baseline(km: KoopmanMatrix, negative_axis: str = "principal",
                 cond_limit: float = 1e12, axis_tol: float = 1e-10):
    """``V diag(Log mu) V^{-1} / s`` with the principal logarithm.

    A zero eigenvalue always raises :class:`BranchCut`. Eigenvalues on the
    negative real axis get ``Log mu = ln|mu| + i pi`` by default (this is where
    the imaginary parts of the baseline come from); pass
    ``negative_axis="raise"`` to reject them instead.
    """
    if negative_axis not in ("principal", "raise"):
        raise ValueError("negative_axis must be 'principal' or 'raise'")
    K = np.asarray(km.K)
    try:
        mu, V = np.linalg.eig(K)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond >= cond_limit:
        raise NonDiagonalizable(f"eigenvector condition number {cond:.3g}")
    scale = max(1.0, float(np.abs(mu).max()))
    if np.any(np.abs(mu) <= axis_tol * scale):
        raise BranchCut("Koopman matrix has a (numerically) zero eigenvalue")
    on_axis = (mu.real < 0) & (np.abs(mu.imag) <= axis_tol * scale)
    if on_axis.any() and negative_axis == "raise":
        raise BranchCut(f"eigenvalues on the negative real axis: {mu[on_axis].real.tolist()}")
    logs = np.log(np.where(on_axis, mu.real + 0j, mu))
    # (V diag(logs)) V^{-1} without forming the inverse
    L_log = np.linalg.solve(V.T, (V * logs).T).T / km.s
    diagnostics = {
        "eigvec_condition": cond,
        "max_abs_imag": float(np.abs(L_log.imag).max()),
        "negative_real_eigenvalues": [float(v) for v in mu[on_axis].real],
        "koopman_eigenvalues": [[float(v.real), float(v.imag)] for v in mu],
    }
    return L_log, diagnostics


def matrix_exp_eig(A) -> np.ndarray:
    """``exp(A)`` through the eigendecomposition of ``A``."""
    mu, V = np.linalg.eig(np.asarray(A))
    return np.linalg.solve(V.T, (V * np.exp(mu)).T).T


def eigen(A, source: str = "generator") -> EigenPairs:
    """Eigenpairs sorted by descending real part, then descending imaginary part."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    try:
        mu, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.lexsort((-mu.imag, -mu.real))
    mu = mu[order]
    V = V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    residuals = np.linalg.norm(A @ V - V * mu, axis=0)
    return EigenPairs(mu, V, source, residuals)


def _matrix_of(A):
    for attr in ("L", "K"):
        if hasattr(A, attr):
            return np.asarray(getattr(A, attr)), A.basis_id
    return np.asarray(A), None


def apply_matrix_to_weights(A, w: WeightVector) -> WeightVector:
    """``A w``; ``A`` may be a fitted matrix object or a bare array."""
    M, basis = _matrix_of(A)
    if basis is not None and basis != w.basis_id:
        raise BasisMismatch(f"matrix basis {basis} != weight basis {w.basis_id}")
    if M.shape != (len(w), len(w)):
        raise BasisMismatch(f"matrix shape {M.shape} does not match weights of length {len(w)}")
    return WeightVector(M @ w.coefficients, w.basis_id)
