import math

import mpmath
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from tpmslab.errors import DomainError, InvalidBracket, NonConvergence
from tpmslab.numerics import (count_in_band, gauss_kronrod, inertia_of_pencil,
                              integrate_endpoint_singular, minimize_bracketed)


def test_gauss_kronrod_polynomial_exact():
    # 15-point Kronrod is exact to degree 22, the embedded Gauss rule to 13
    val, err = gauss_kronrod(lambda x: x**12 - 3 * x**5, -1.0, 2.0)
    exact = (2**13 + 1) / 13 - 3 * (2**6 - 1) / 6
    assert val == pytest.approx(exact, rel=1e-14)
    assert err < 1e-10


@pytest.mark.parametrize("f, mp_f, sl, su", [
    (lambda t: 1 / np.sqrt(t), lambda t: 1 / mpmath.sqrt(t), True, False),
    (lambda t: 1 / np.sqrt(t * (1 - t)), lambda t: 1 / mpmath.sqrt(t * (1 - t)), True, True),
    (lambda t: np.log(t) / np.sqrt(1 - t), lambda t: mpmath.log(t) / mpmath.sqrt(1 - t), True, True),
    (lambda t: np.cos(3 * t) / np.sqrt(1 - t**3), lambda t: mpmath.cos(3 * t) / mpmath.sqrt(1 - t**3), False, True),
])
def test_endpoint_singular_against_tanh_sinh(f, mp_f, sl, su):
    mpmath.mp.dps = 30
    ref = float(mpmath.quad(mp_f, [0, 0.5, 1]))
    res = integrate_endpoint_singular(f, 0.0, 1.0, sl, su, rel_tol=1e-11)
    assert res.value == pytest.approx(ref, rel=1e-10)
    assert res.error_estimate <= 1e-9 * abs(ref)


def test_endpoint_singular_errors():
    with pytest.raises(DomainError):
        integrate_endpoint_singular(lambda t: t, 1.0, 0.0)
    with pytest.raises(NonConvergence) as info:
        integrate_endpoint_singular(lambda t: np.sin(1 / (t + 1e-9)), 0.0, 1.0, max_panels=8)
    assert info.value.value is not None


@pytest.mark.parametrize("f, bracket, xmin", [
    (lambda x: (x - 2) ** 2 + 1, (0.0, 1.0, 5.0), 2.0),
    (lambda x: math.cosh(x - 1), (-3.0, 0.0, 4.0), 1.0),
    (lambda x: abs(x - 0.3), (0.0, 0.2, 1.0), 0.3),
])
def test_minimize_bracketed(f, bracket, xmin):
    res = minimize_bracketed(f, bracket, x_tol=1e-8)
    assert abs(res.location - xmin) <= 1e-7
    assert res.bracket_width_at_exit <= 1e-8


def test_minimize_bad_bracket():
    with pytest.raises(InvalidBracket):
        minimize_bracketed(lambda x: x, (0.0, 0.5, 1.0))
    with pytest.raises(InvalidBracket):
        minimize_bracketed(lambda x: x * x, (1.0, 0.0, -1.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10_000), st.floats(-2, 2))
def test_inertia_matches_eigh(n, seed, shift):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    Q = A + A.T
    B = rng.standard_normal((n, n))
    M = B @ B.T + n * np.eye(n)
    lam = np.linalg.eigvals(np.linalg.solve(M, Q)).real
    if np.min(np.abs(lam - shift)) < 1e-6:
        return
    ref = (int((lam < shift).sum()), 0, int((lam > shift).sum()))
    dense = inertia_of_pencil(Q, M, shift)
    sparse = inertia_of_pencil(sp.csc_matrix(Q), sp.csc_matrix(M), shift)
    assert (dense.negative, dense.zero, dense.positive) == ref
    assert (sparse.negative, sparse.zero, sparse.positive) == ref


def test_inertia_zero_and_band():
    Q = np.diag([-1.0, 0.0, 2.0])
    M = np.eye(3)
    c = inertia_of_pencil(Q, M)
    assert (c.negative, c.zero, c.positive) == (1, 1, 1)
    assert c.dimension == 3
    band = count_in_band(sp.csc_matrix(np.diag([-3.0, -0.01, 0.0, 0.02, 5.0])), sp.identity(5, format="csc"), 0.0, 0.05)
    assert (band.negative, band.zero, band.positive) == (1, 3, 1)
