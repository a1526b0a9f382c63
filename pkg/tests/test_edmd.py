import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from koopgen.datagen import GenConfig, SamplePlan, TrainingSet, generate
from koopgen.dictionary import WeightVector, monomials_1d, monomials_2d
from koopgen.dynamics import Flow, linear_1d
from koopgen.edmd import (KoopmanMatrix, apply_matrix_to_weights, eigen, fit_generator,
                          fit_koopman, fit_koopman_from_data, log_baseline, lstsq_svd,
                          matrix_exp_eig)
from koopgen.errors import BasisMismatch, BranchCut, DegenerateFeatures, NonDiagonalizable


def training_set(X, Y):
    return TrainingSet(np.asarray(X, float), np.asarray(Y, float), GenConfig(1.0, 1.0), "b",
                       np.zeros((len(X), 1)))


def km(K, s=1.0):
    return KoopmanMatrix(np.asarray(K, dtype=float), s, "b", 0.0, len(K))


@pytest.fixture(scope="module")
def linear_ts():
    d = monomials_1d(1, 3)
    plan = SamplePlan(((-1, 1),), 50)
    return d, generate(Flow(linear_1d(1)), d, plan, GenConfig(1e6, 1.0))


# -- generator fit ------------------------------------------------------------------

def test_identity_when_labels_equal_features(rng):
    X = rng.normal(size=(30, 4))
    gm = fit_generator(training_set(X, X))
    np.testing.assert_allclose(gm.L, np.eye(4), atol=1e-12)
    assert gm.rank_used == 4 and gm.residual <= 1e-12


def test_exact_interpolation():
    gm = fit_generator(training_set(np.eye(2), [[2, 0], [0, 3]]))
    np.testing.assert_allclose(gm.L, np.diag([2.0, 3.0]), atol=1e-14)


def test_linear_generator_diagonal(linear_ts):
    _, ts = linear_ts
    gm = fit_generator(ts)
    assert np.abs(gm.L - np.diag([1.0, 2.0, 3.0])).max() <= 1e-4
    assert gm.L.dtype == np.float64


def test_linear_generator_spectrum(linear_ts):
    _, ts = linear_ts
    ep = eigen(fit_generator(ts).L)
    np.testing.assert_allclose(ep.values, [3, 2, 1], atol=1e-4)


def test_fit_needs_enough_rows():
    with pytest.raises(ValueError):
        fit_generator(training_set(np.ones((2, 3)), np.ones((2, 3))))


def test_least_squares_optimality(rng):
    X = rng.normal(size=(60, 5))
    Y = X @ rng.normal(size=(5, 5)) + 0.1 * rng.normal(size=(60, 5))
    gm = fit_generator(training_set(X, Y))
    base = np.linalg.norm(Y - X @ gm.L)
    assert gm.residual == pytest.approx(base)
    for _ in range(20):
        dA = rng.normal(size=(5, 5))
        dA *= 1e-3 / np.linalg.norm(dA)
        assert np.linalg.norm(Y - X @ (gm.L + dA)) >= base


def test_minimum_norm_with_duplicated_column(rng):
    X = rng.normal(size=(40, 3))
    Y = X @ rng.normal(size=(3, 3))
    Xd = np.column_stack([X, X[:, 1]])
    Yd = np.column_stack([Y, Y[:, 1]])
    with pytest.warns(DegenerateFeatures):
        gm = fit_generator(training_set(Xd, Yd))
    assert gm.rank_used == 3
    pred = Xd @ gm.L
    np.testing.assert_allclose(pred[:, :3], X @ fit_generator(training_set(X, Y)).L, atol=1e-8)
    # minimum norm: the duplicated pair shares its weight equally
    np.testing.assert_allclose(gm.L[1], gm.L[3], atol=1e-10)


def test_lstsq_matches_pinv(rng):
    X = rng.normal(size=(25, 6))
    Y = rng.normal(size=(25, 2))
    A, rank, _ = lstsq_svd(X, Y)
    np.testing.assert_allclose(A, np.linalg.pinv(X) @ Y, atol=1e-12)
    assert rank == 6


def test_real_data_gives_real_generator(vdp_quick):
    assert np.isrealobj(vdp_quick.gm.L)
    assert np.all(np.isfinite(vdp_quick.gm.L))


# -- Koopman fit and logarithm baseline -----------------------------------------------------

def test_koopman_identity_limit(rng):
    X = rng.normal(size=(20, 3))
    np.testing.assert_allclose(fit_koopman_from_data(X, X, 1e-9, "b").K, np.eye(3), atol=1e-12)


def test_koopman_linear():
    d = monomials_1d(1, 1)
    k = fit_koopman(Flow(linear_1d(1)), d, SamplePlan(((-1, 1),), 11), 0.5)
    assert k.K[0, 0] == pytest.approx(math.exp(0.5), rel=1e-9)
    L, diag = log_baseline(k)
    assert L[0, 0] == pytest.approx(1.0, rel=1e-9)
    assert diag["max_abs_imag"] == 0.0


def test_koopman_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        fit_koopman(Flow(linear_1d(1)), monomials_1d(1, 1), SamplePlan(((-1, 1),), 3), 0.0)


def test_log_of_diagonal():
    L, _ = log_baseline(km(np.diag([math.exp(0.3), math.exp(-1.2)])))
    np.testing.assert_allclose(L, np.diag([0.3, -1.2]), atol=1e-15)


def test_log_of_identity():
    L, _ = log_baseline(km(np.eye(4), s=0.5))
    assert np.abs(L).max() == 0.0


def test_log_divides_by_s():
    L, _ = log_baseline(km(np.diag([math.exp(1.0), math.exp(2.0)]), s=0.5))
    np.testing.assert_allclose(L.real, np.diag([2.0, 4.0]), atol=1e-14)


def test_log_negative_axis():
    K = km(np.diag([-0.5, 2.0]))
    L, diag = log_baseline(K)
    assert L[0, 0] == pytest.approx(math.log(0.5) + 1j * math.pi)
    assert diag["negative_real_eigenvalues"] == [-0.5]
    with pytest.raises(BranchCut):
        log_baseline(K, negative_axis="raise")


def test_log_zero_eigenvalue():
    with pytest.raises(BranchCut):
        log_baseline(km(np.diag([0.0, 1.0])))


def test_log_non_diagonalizable():
    with pytest.raises(NonDiagonalizable):
        log_baseline(km([[1.0, 1.0], [0.0, 1.0]]))


def right_half_plane_matrix(rng, n):
    while True:
        V = rng.normal(size=(n, n))
        if np.linalg.cond(V) < 1e3:
            break
    mu = rng.uniform(0.2, 3.0, n)
    return V @ np.diag(mu) @ np.linalg.inv(V)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6), st.sampled_from([0.25, 0.5, 1.0]))
def test_log_exp_round_trip(seed, n, s):
    rng = np.random.default_rng(seed)
    K = right_half_plane_matrix(rng, n)
    L, diag = log_baseline(km(K, s))
    assert diag["eigvec_condition"] < 1e6
    back = matrix_exp_eig(s * L)
    assert np.linalg.norm(back - K) <= 1e-6 * np.linalg.norm(K)


def test_log_matches_scipy_logm(rng):
    K = right_half_plane_matrix(rng, 5)
    L, _ = log_baseline(km(K, 0.5))
    ref = scipy.linalg.logm(K) / 0.5
    np.testing.assert_allclose(L, ref, atol=1e-9)


def test_log_with_rotation_pair():
    th = 0.4
    K = math.exp(0.1) * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    L, _ = log_baseline(km(K))
    np.testing.assert_allclose(L, [[0.1, -th], [th, 0.1]], atol=1e-14)


def test_vdp_baseline_has_negative_eigenvalue(vdp_quick):
    L, diag = log_baseline(vdp_quick.km)
    assert len(diag["negative_real_eigenvalues"]) >= 1
    assert diag["max_abs_imag"] > 1e-2


# -- eigenpairs and weight application ------------------------------------------------

def test_eigen_sorted_diagonal():
    ep = eigen(np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(ep.values, [3, 2, 1])


def test_eigen_rotation():
    ep = eigen(np.array([[0.0, -1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(ep.values, [1j, -1j], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_eigen_residual_and_normalisation(seed, n):
    A = np.random.default_rng(seed).normal(size=(n, n))
    ep = eigen(A)
    np.testing.assert_allclose(np.linalg.norm(ep.vectors, axis=0), 1.0, atol=1e-12)
    assert np.all(ep.residuals <= 1e-8 * np.linalg.norm(A))
    keys = list(zip(-ep.values.real, -ep.values.imag))
    assert keys == sorted(keys)


def test_eigen_report_is_json_ready():
    rep = eigen(np.diag([1.0, -2.0]), "generator").report()
    assert rep["eigenvalues"] == [[1.0, 0.0], [-2.0, 0.0]] and rep["source"] == "generator"


def test_eigen_rejects():
    with pytest.raises(ValueError):
        eigen(np.ones((2, 3)))
    with pytest.raises(ValueError):
        eigen(np.array([[np.nan]]))


def test_apply_matrix_to_weights():
    d = monomials_1d(1, 3)
    w = WeightVector.of(d, [1, 1, 1])
    assert np.array_equal(apply_matrix_to_weights(np.eye(3), w).coefficients, w.coefficients)
    np.testing.assert_array_equal(apply_matrix_to_weights(np.diag([1, 2, 3]), w).coefficients,
                                  [1, 2, 3])
    with pytest.raises(BasisMismatch):
        apply_matrix_to_weights(np.eye(2), w)


def test_apply_generator_gives_table_column(vdp_quick):
    d, gm = vdp_quick.d, vdp_quick.gm
    w = apply_matrix_to_weights(gm, WeightVector.unit(d, 1))
    np.testing.assert_array_equal(w.coefficients.real, gm.L[:, 1])
    with pytest.raises(BasisMismatch):
        apply_matrix_to_weights(gm, WeightVector.unit(monomials_2d(2, 2), 1))
