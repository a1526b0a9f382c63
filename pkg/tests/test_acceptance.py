"""Acceptance criteria, each at its stated tolerance.

Every test prints a single ``PASS``/``FAIL`` line (visible in the normal
pytest output) before asserting.
"""
import warnings

import numpy as np
import pytest

from koopgen import apps
from koopgen.datagen import GenConfig, SamplePlan, TrainingSet, generate, label_row
from koopgen.dictionary import (WeightVector, analytic_generator_apply, evaluate, monomials_1d,
                                monomials_2d, reconstruct)
from koopgen.dynamics import Flow, flow_many, linear_1d, vanderpol
from koopgen.edmd import KoopmanMatrix, eigen, fit_generator, log_baseline, matrix_exp_eig

TOL_TABLE = 2e-4


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} :: {detail}")
        assert ok, detail
    return emit


def table_check(fit, dominant):
    table = fit.table_re
    dev = max(abs(table[c] - v) for c, v in dominant.items())
    mask = np.ones(table.shape, bool)
    for c in dominant:
        mask[c] = False
    other = float(np.abs(table[mask]).max())
    imag = float(np.abs(fit.table_im).max())
    return dev, other, imag


def test_criterion_1_table1(vdp_full, report):
    dev, other, imag = table_check(vdp_full.free.coordinates[0], {(0, 1): 1.0})
    ok = dev <= TOL_TABLE and other <= TOL_TABLE and imag == 0 and vdp_full.seconds <= 600
    report(1, "log-free f1 weight table", ok,
           f"|w01-1|={dev:.2e}, max other={other:.2e} (tol {TOL_TABLE:g}); "
           f"pipeline {vdp_full.seconds:.1f} s (budget 600 s)")


def test_criterion_2_table2(vdp_full, report):
    dom = {(0, 1): 1.0, (1, 0): -1.0, (2, 1): -1.0}
    dev, other, imag = table_check(vdp_full.free.coordinates[1], dom)
    ok = dev <= TOL_TABLE and other <= TOL_TABLE and imag == 0
    report(2, "log-free f2 weight table", ok,
           f"max dominant dev={dev:.2e}, max other={other:.2e} (tol {TOL_TABLE:g})")


def test_criterion_3_baseline_contrast(vdp_full, report):
    ratio = vdp_full.base.max_error / vdp_full.free.max_error
    im1 = float(np.nanmax(np.abs(vdp_full.base.coordinates[0].table_im)))
    im2 = float(np.nanmax(np.abs(vdp_full.base.coordinates[1].table_im)))
    ok = ratio >= 10 and im1 >= 1e-3 and im2 >= 1e-2
    report(3, "log-baseline contrast", ok,
           f"error ratio={ratio:.3g} (>=10), max|imag| f1={im1:.2e} (>=1e-3), "
           f"f2={im2:.2e} (>=1e-2)")


def test_criterion_4_linear_oracle(report):
    d = monomials_1d(1, 3)
    ts = generate(Flow(linear_1d(1)), d, SamplePlan(((-1, 1),), 50), GenConfig(1e6, 1.0))
    dev = float(np.abs(fit_generator(ts).L - np.diag([1.0, 2.0, 3.0])).max())
    report(4, "x' = x generator is diag(1,2,3)", dev <= 1e-4, f"max entry dev={dev:.2e} (tol 1e-4)")


def test_criterion_5_lambda_convergence(report):
    flow, vf, d = Flow(vanderpol()), vanderpol(), monomials_2d(3, 2)
    X = np.random.default_rng(7).uniform(-1, 1, (10, 2))
    exact = np.array([[analytic_generator_apply(vf, o, x) for o in d.entries] for x in X])
    lams = (1e3, 1e4, 1e6)
    errs = []
    for lam in lams:
        labels = np.array([label_row(flow, d, x, GenConfig(lam, 1.0)) for x in X])
        errs.append(float(np.linalg.norm(labels - exact)))
    factors = []
    ok = True
    for k in range(2):
        observed = errs[k] / errs[k + 1]
        predicted = lams[k + 1] / lams[k]
        factors.append(observed / predicted)
        ok &= 0.5 <= observed / predicted <= 2.0
    tau_gap = max(float(np.abs(label_row(flow, d, x, GenConfig(1e6, 1.0))
                               - label_row(flow, d, x, GenConfig(1e6, 0.5))).max()) for x in X)
    ok &= tau_gap <= 1e-6
    report(5, "O(1/lambda) labels and tau-insensitivity", ok,
           f"errors {', '.join(f'{e:.2e}' for e in errs)}; observed/predicted ratios "
           f"{', '.join(f'{f:.3f}' for f in factors)} (in [0.5,2]); tau gap {tau_gap:.1e} (<=1e-6)")


def test_criterion_6_lyapunov(vdp_full, report):
    theta = vdp_full.cand.coefficients
    d = vdp_full.d
    want = {(2, 0): 1.39, (1, 1): -1.56, (0, 2): 1.16, (2, 2): 0.74}
    rel = {k: abs(theta[d.index_of(k)] - v) / abs(v) for k, v in want.items()}
    origin = vdp_full.cand.value_at_origin
    ok = max(rel.values()) <= 0.10 and vdp_full.verdict.passed and -0.12 <= origin <= -0.02
    report(6, "Lyapunov function", ok,
           f"V = {apps.polynomial_string(d, theta)}; worst rel dev {max(rel.values()):.3f} "
           f"(<=0.10); verdict {'PASS' if vdp_full.verdict.passed else 'FAIL'}; "
           f"origin {origin:.4f} in [-0.12,-0.02]")


def _semigroup(rng):
    flow = Flow(vanderpol())
    X = rng.uniform(-1, 1, (20, 2))
    worst = 0.0
    for t in (0.25, 0.5):
        for s in (0.25, 0.5):
            ab = flow_many(flow, flow_many(flow, X, t)[0], s)[0]
            direct = flow_many(flow, X, t + s)[0]
            bound = 10 * (flow.rel_tol * np.linalg.norm(direct, axis=1) + flow.abs_tol)
            worst = max(worst, float((np.linalg.norm(ab - direct, axis=1) / bound).max()))
    return worst <= 1, f"semigroup err/bound {worst:.2f}"


def _least_squares(rng):
    X = rng.normal(size=(80, 6))
    Y = X @ rng.normal(size=(6, 6)) + 0.05 * rng.normal(size=(80, 6))
    L = fit_generator(TrainingSet(X, Y, GenConfig(1, 1), "b", X[:, :1])).L
    base = np.linalg.norm(Y - X @ L)
    ok = True
    for _ in range(20):
        dA = rng.normal(size=L.shape)
        ok &= np.linalg.norm(Y - X @ (L + 1e-3 * dA / np.linalg.norm(dA))) >= base
    Xd = np.column_stack([X, X[:, 2]])
    Yd = np.column_stack([Y, Y[:, 2]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        Ld = fit_generator(TrainingSet(Xd, Yd, GenConfig(1, 1), "b", X[:, :1])).L
    gap = float(np.abs((Xd @ Ld)[:, :6] - X @ L).max())
    return ok and gap <= 1e-8, f"lstsq optimal over 20 perturbations, min-norm gap {gap:.1e}"


def _eigen_residual(rng):
    worst = 0.0
    for n in (2, 5, 12):
        A = rng.normal(size=(n, n))
        ep = eigen(A)
        worst = max(worst, float(ep.residuals.max() / np.linalg.norm(A)))
    return worst <= 1e-8, f"eigen residual/||A|| {worst:.1e}"


def _log_exp(rng):
    worst = 0.0
    for n in (2, 4, 8):
        while True:
            V = rng.normal(size=(n, n))
            if np.linalg.cond(V) < 1e3:
                break
        K = V @ np.diag(rng.uniform(0.2, 3, n)) @ np.linalg.inv(V)
        L, _ = log_baseline(KoopmanMatrix(K, 0.5, "b", 0.0, n))
        worst = max(worst, float(np.linalg.norm(matrix_exp_eig(0.5 * L) - K)
                                 / np.linalg.norm(K)))
    return worst <= 1e-6, f"log/exp round trip {worst:.1e}"


def _reconstruct_linear(rng):
    d = monomials_2d(3, 2)
    worst = 0.0
    for _ in range(50):
        w1, w2, a, x = rng.normal(size=12), rng.normal(size=12), rng.normal(), rng.uniform(-2, 2, 2)
        lhs = reconstruct(d, WeightVector.of(d, w1 + a * w2), x)
        rhs = (reconstruct(d, WeightVector.of(d, w1), x)
               + a * reconstruct(d, WeightVector.of(d, w2), x))
        scale = np.abs(evaluate(d, x)) @ (np.abs(w1) + abs(a) * np.abs(w2))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst <= 1e-14, f"reconstruct linearity {worst:.1e}"


def _verdict_scaling(study):
    s = study
    ok = True
    for th in (s.cand.coefficients, -s.cand.coefficients, np.eye(12)[5]):
        ref = apps.verify_candidate(apps.candidate_from_theta(s.gm, s.d, s.plan, th),
                                    s.gm, s.d, s.plan).passed
        for c in (1e-3, 0.5, 7.0, 1e3):
            got = apps.verify_candidate(apps.candidate_from_theta(s.gm, s.d, s.plan, c * th),
                                        s.gm, s.d, s.plan).passed
            ok &= got == ref
    return ok, "verdict invariant under theta -> c theta"


def test_criterion_7_property_suite(vdp_quick, report):
    rng = np.random.default_rng(2024)
    results = [_semigroup(rng), _least_squares(rng), _eigen_residual(rng), _log_exp(rng),
               _reconstruct_linear(rng), _verdict_scaling(vdp_quick)]
    report(7, "property suite", all(ok for ok, _ in results), "; ".join(d for _, d in results))
