import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koopgen.dictionary import (Dictionary, Observable, WeightVector, analytic_generator_apply,
                                dictionary_from_spec, evaluate, evaluate_many, monomial,
                                monomials_1d, monomials_2d, polynomial, reconstruct)
from koopgen.dynamics import Flow, flow_to, vanderpol
from koopgen.errors import BasisMismatch, ConfigError

D = monomials_2d(3, 2)
coord = st.floats(-3, 3, allow_nan=False)


def test_size_and_coordinate_indices():
    assert D.N == 12
    assert D[1].exponents == (1, 0) and D.index_of((1, 0)) == 1
    assert D[4].exponents == (0, 1) and D.index_of((0, 1)) == 4
    assert D.constant_index() == 0


def test_j_major_order():
    assert [e.exponents for e in D.entries] == [(i, j) for j in range(3) for i in range(4)]


def test_evaluate_examples():
    np.testing.assert_array_equal(evaluate(D, [0, 0]), [1] + [0] * 11)
    np.testing.assert_array_equal(evaluate(D, [2, 3]), [1, 2, 4, 8, 3, 6, 12, 24, 9, 18, 36, 72])
    np.testing.assert_array_equal(evaluate(D, [1, 1]), np.ones(12))


@given(coord, coord)
def test_evaluate_is_multiplicative(x1, x2):
    z = evaluate(D, [x1, x2])
    for k, e in enumerate(D.entries):
        i, j = e.exponents
        assert z[k] == pytest.approx(x1 ** i * x2 ** j, rel=1e-14, abs=1e-300)


def test_evaluate_many_matches_rows(rng):
    X = rng.uniform(-1, 1, (7, 2))
    Z = evaluate_many(D, X)
    for x, row in zip(X, Z):
        assert evaluate(D, x).tobytes() == row.tobytes()


def test_evaluate_rejects_dimension():
    with pytest.raises(ValueError):
        evaluate(D, [1.0, 2.0, 3.0])


def test_analytic_generator_examples():
    vf = vanderpol()
    assert analytic_generator_apply(vf, D[1], [0.5, 0.2]) == pytest.approx(0.2, abs=1e-15)
    assert analytic_generator_apply(vf, D[4], [0.5, 0.2]) == pytest.approx(-0.35, abs=1e-15)
    assert analytic_generator_apply(vf, D[0], [0.5, 0.2]) == 0.0


@pytest.mark.parametrize("k", [1, 4, 5, 9, 11])
def test_generator_matches_finite_differences(k):
    vf = vanderpol()
    flow = Flow(vf, rel_tol=1e-13, abs_tol=1e-15)
    x = np.array([0.4, -0.3])
    exact = analytic_generator_apply(vf, D[k], x)
    errs = []
    for h in (1e-4, 1e-5):
        fd = (D[k](flow_to(flow, x, h)) - D[k](x)) / h
        errs.append(abs(fd - exact))
        assert errs[-1] <= 10 * h
    # first-order decay: the error shrinks roughly tenfold with h
    assert 5 <= errs[0] / errs[1] <= 20


def test_reconstruct_examples():
    assert reconstruct(D, WeightVector.unit(D, 1), [2, 3]) == 2
    assert reconstruct(D, WeightVector.of(D, np.zeros(12)), [2, 3]) == 0
    # all-ones weights sum the evaluate row at [2, 3]
    row = [1, 2, 4, 8, 3, 6, 12, 24, 9, 18, 36, 72]
    assert reconstruct(D, WeightVector.of(D, np.ones(12)), [2, 3]) == sum(row) == 195


@given(st.lists(st.floats(-5, 5), min_size=12, max_size=12),
       st.lists(st.floats(-5, 5), min_size=12, max_size=12),
       st.floats(-5, 5), coord, coord)
def test_reconstruct_is_linear(w1, w2, alpha, x1, x2):
    a, b = WeightVector.of(D, w1), WeightVector.of(D, w2)
    ab = WeightVector.of(D, np.array(w1) + alpha * np.array(w2))
    lhs = reconstruct(D, ab, [x1, x2])
    rhs = reconstruct(D, a, [x1, x2]) + alpha * reconstruct(D, b, [x1, x2])
    scale = np.abs(evaluate(D, [x1, x2])).sum() * 5 * (1 + abs(alpha))
    assert abs(lhs - rhs) <= 1e-14 * scale


def test_reconstruct_checks_basis():
    other = monomials_2d(2, 2)
    with pytest.raises(BasisMismatch):
        reconstruct(D, WeightVector.unit(other, 1), [0, 0])
    with pytest.raises(BasisMismatch):
        WeightVector.of(D, np.ones(3))


def test_specs():
    assert dictionary_from_spec("monomials2d:max_i=3,max_j=2") == D
    assert dictionary_from_spec("monomials1d:min=1,max=3").labels == ["x^1", "x^2", "x^3"]
    for bad in ("monomials2d:max_i=3", "fourier:k=2", "monomials1d:min=3,max=1",
                "monomials2d:max_i=a,max_j=2"):
        with pytest.raises(ConfigError):
            dictionary_from_spec(bad)


def test_manifest_round_trip_and_tamper():
    d = Dictionary((monomial((1, 0)), polynomial([(1.0, (2, 0)), (1.0, (0, 2))], "|x|^2")))
    m = d.manifest()
    assert Dictionary.from_manifest(m).basis_id == d.basis_id
    m["entries"][1]["terms"][0][0] = 2.0
    with pytest.raises(BasisMismatch):
        Dictionary.from_manifest(m)


def test_basis_id_depends_on_order():
    a = Dictionary((monomial((1,)), monomial((2,))))
    b = Dictionary((monomial((2,)), monomial((1,))))
    assert a.basis_id != b.basis_id


def test_polynomial_observable():
    p = polynomial([(1.0, (2, 0)), (-3.0, (1, 1))], "p")
    assert p([2.0, 1.0]) == 4 - 6
    assert analytic_generator_apply(vanderpol(), p, [1.0, 1.0]) == pytest.approx(
        2 * 1 * 1 + (-3) * (1 * 1 + 1 * -1))
    with pytest.raises(AttributeError):
        p.exponents
    assert Observable.from_json(p.to_json()) == p


def test_invalid_constructions():
    with pytest.raises(ValueError):
        monomial((-1, 0))
    with pytest.raises(ValueError):
        Dictionary(())
    with pytest.raises(ValueError):
        Dictionary((monomial((1,)), monomial((1, 0))))
    with pytest.raises(ValueError):
        monomials_1d(2, 1)
