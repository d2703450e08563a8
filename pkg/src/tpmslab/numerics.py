"""Numerical kernel: singular-endpoint quadrature, bracketed minimization and
inertia counting for symmetric pencils.

Everything here is a pure function of its arguments, with a fixed evaluation
order, so repeated calls give bit-identical results.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DomainError, FactorizationBreakdown, InvalidBracket, NonConvergence

__all__ = [
    "QuadratureResult",
    "ExtremumResult",
    "InertiaCount",
    "gauss_kronrod",
    "integrate_endpoint_singular",
    "minimize_bracketed",
    "inertia_of_pencil",
    "count_in_band",
]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class ExtremumResult:
    location: float
    value: float
    bracket_width_at_exit: float


@dataclass(frozen=True)
class InertiaCount:
    negative: int
    zero: int
    positive: int

    @property
    def dimension(self) -> int:
        return self.negative + self.zero + self.positive


# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes.
_GAUSS_W = np.zeros(15)
_GAUSS_W[1:7:2] = _WG[:3]
_GAUSS_W[7] = _WG[3]
_GAUSS_W[9:14:2] = _WG[:3][::-1]


def _evaluate(f, x):
    y = f(x)
    y = np.asarray(y, dtype=float)
    if y.shape != x.shape:
        y = np.array([float(f(xi)) for xi in x])
    return y


def gauss_kronrod(f: Callable, a: float, b: float) -> tuple[float, float]:
    """One G7-K15 panel on [a, b]; returns (Kronrod value, |K - G|)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = _evaluate(f, mid + half * _NODES)
    if not np.all(np.isfinite(y)):
        raise DomainError(f"integrand not finite on [{a}, {b}]")
    k = half * float(y @ _KRONROD_W)
    g = half * float(y @ _GAUSS_W)
    return k, abs(k - g)


def _adaptive(f, a, b, rel_tol, abs_tol, max_panels):
    value, err = gauss_kronrod(f, a, b)
    heap = [(-err, a, b, value, err)]
    total, total_err = value, err
    panels = 1
    while total_err > max(rel_tol * abs(total), abs_tol):
        if panels >= max_panels:
            raise NonConvergence(
                f"quadrature did not reach rel_tol={rel_tol:g} in {panels} panels",
                value=total, error_estimate=total_err,
            )
        _, lo, hi, v, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = gauss_kronrod(f, lo, mid)
        v2, e2 = gauss_kronrod(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1, e1))
        heapq.heappush(heap, (-e2, mid, hi, v2, e2))
        panels += 1
        # Re-sum rather than update incrementally: keeps results independent
        # of round-off drift across long refinement histories.
        items = sorted(heap, key=lambda item: item[1])
        total = math.fsum(item[3] for item in items)
        total_err = math.fsum(item[4] for item in items)
    return total, total_err, 15 * (2 * panels - 1)


def integrate_endpoint_singular(
    integrand: Callable,
    lower: float,
    upper: float,
    singular_at_lower: bool = False,
    singular_at_upper: bool = False,
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    max_panels: int = 2000,
) -> QuadratureResult:
    """Integrate ``integrand`` over [lower, upper].

    Endpoints flagged as singular may carry an inverse-square-root blowup.
    They are removed by the substitution t = endpoint +/- s**2 before the
    adaptive Gauss-Kronrod refinement; when both ends are singular the
    interval is split at its midpoint first.

    The integrand is called with numpy arrays when it accepts them.
    """
    if not (lower < upper) or not (math.isfinite(lower) and math.isfinite(upper)):
        raise DomainError(f"invalid interval [{lower}, {upper}]")
    if not (0.0 < rel_tol < 1.0):
        raise DomainError(f"rel_tol must lie in (0, 1), got {rel_tol}")

    pieces = []
    if singular_at_lower and singular_at_upper:
        mid = 0.5 * (lower + upper)
        pieces.append(("lower", lower, mid))
        pieces.append(("upper", mid, upper))
    elif singular_at_lower:
        pieces.append(("lower", lower, upper))
    elif singular_at_upper:
        pieces.append(("upper", lower, upper))
    else:
        pieces.append(("plain", lower, upper))

    total, total_err, evaluations = [], [], 0
    for kind, lo, hi in pieces:
        if kind == "plain":
            g, s0, s1 = integrand, lo, hi
        elif kind == "lower":
            def g(s, lo=lo):
                return 2.0 * s * _evaluate(integrand, lo + s * s)
            s0, s1 = 0.0, math.sqrt(hi - lo)
        else:
            def g(s, hi=hi):
                return 2.0 * s * _evaluate(integrand, hi - s * s)
            s0, s1 = 0.0, math.sqrt(hi - lo)
        try:
            v, e, n = _adaptive(g, s0, s1, rel_tol / len(pieces), abs_tol, max_panels)
        except NonConvergence as exc:
            partial = math.fsum(total) + (exc.value or 0.0)
            raise NonConvergence(str(exc), value=partial,
                                 error_estimate=math.fsum(total_err) + (exc.error_estimate or 0.0)) from None
        total.append(v)
        total_err.append(e)
        evaluations += n
    value = math.fsum(total)
    err = math.fsum(total_err)
    if err > max(rel_tol * abs(value), abs_tol):
        raise NonConvergence("error estimate above tolerance", value=value, error_estimate=err)
    return QuadratureResult(value=value, error_estimate=err, evaluations=evaluations)


_GOLDEN = 0.3819660112501051  # (3 - sqrt(5)) / 2


def minimize_bracketed(
    f: Callable[[float], float],
    bracket: tuple[float, float, float],
    x_tol: float = 1e-6,
    max_iter: int = 500,
) -> ExtremumResult:
    """Brent's method on a bracketing triple ``x0 < x1 < x2``.

    Parabolic interpolation steps are accepted only when they fall well inside
    the current interval and shrink faster than the step before last;
    otherwise a golden-section step is taken, which guarantees convergence for
    any continuous ``f``. Iteration stops once the enclosing interval is no
    wider than ``x_tol``.
    """
    x0, x1, x2 = (float(v) for v in bracket)
    if not (x0 < x1 < x2):
        raise InvalidBracket(f"bracket must be increasing, got {bracket}")
    if x_tol <= 0:
        raise DomainError("x_tol must be positive")
    f0, f1, f2 = f(x0), f(x1), f(x2)
    if not (f1 < f0 and f1 < f2):
        raise InvalidBracket(
            f"f at the interior point ({f1!r}) must be below both ends ({f0!r}, {f2!r})"
        )

    a, b = x0, x2
    x = w = v = x1
    fx = fw = fv = f1
    d = e = 0.0
    eps = 0.25 * x_tol
    for _ in range(max_iter):
        if b - a <= x_tol:
            break
        m = 0.5 * (a + b)
        tol1 = eps + 1e-14 * abs(x)
        tol2 = 2.0 * tol1
        use_golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            e_prev = e
            e = d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if m >= x else -tol1
                use_golden = False
        if use_golden:
            e = (a - x) if x >= m else (b - x)
            d = _GOLDEN * e
        u = x + (d if abs(d) >= tol1 else (tol1 if d >= 0 else -tol1))
        fu = f(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv = w, fw
            w, fw = x, fx
            x, fx = u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv = w, fw
                w, fw = u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    else:
        raise NonConvergence(f"minimize_bracketed: no convergence in {max_iter} iterations",
                             value=x, error_estimate=b - a)
    return ExtremumResult(location=float(x), value=float(fx), bracket_width_at_exit=float(b - a))


def _shifted(Q, M, shift):
    if sp.issparse(Q) or sp.issparse(M):
        A = sp.csc_matrix(Q) - shift * sp.csc_matrix(M)
        return A.tocsc(), True
    Q = np.asarray(Q, dtype=float)
    M = np.asarray(M, dtype=float)
    return Q - shift * M, False


def _dense_inertia(A, zero_tol):
    _, D, _ = scipy.linalg.ldl(A, lower=True, hermitian=True)
    n = A.shape[0]
    eigs = []
    i = 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0.0:
            eigs.extend(np.linalg.eigvalsh(D[i:i + 2, i:i + 2]))
            i += 2
        else:
            eigs.append(D[i, i])
            i += 1
    eigs = np.asarray(eigs)
    neg = int(np.sum(eigs < -zero_tol))
    pos = int(np.sum(eigs > zero_tol))
    return InertiaCount(neg, n - neg - pos, pos)


def _sparse_inertia(A, zero_tol):
    # Symmetric ordering with pivoting disabled makes SuperLU compute
    # P A P^T = L U with U = D L^T, so diag(U) carries the inertia.
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise FactorizationBreakdown(f"sparse factorization failed: {exc}") from None
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationBreakdown("factorization pivoted off the diagonal")
    d = lu.U.diagonal()
    if not np.all(np.isfinite(d)):
        raise FactorizationBreakdown("non-finite pivot")
    neg = int(np.sum(d < -zero_tol))
    pos = int(np.sum(d > zero_tol))
    return InertiaCount(neg, A.shape[0] - neg - pos, pos)


def inertia_of_pencil(Q, M, shift: float = 0.0, zero_tol: float | None = None) -> InertiaCount:
    """Count generalized eigenvalues of ``Q u = lambda M u`` below, at and above
    ``shift`` from the inertia of ``Q - shift*M`` (Sylvester's law).

    Dense inputs use a Bunch-Kaufman LDL^T; sparse inputs use a symmetric,
    non-pivoting sparse LU. Pivots with magnitude at most ``zero_tol`` are
    reported as zero (default: a small multiple of machine precision times the
    matrix norm). A pivot that is exactly zero in the sparse path raises
    :class:`FactorizationBreakdown`; retry with a perturbed shift.
    """
    if Q.shape != M.shape or Q.shape[0] != Q.shape[1]:
        raise DomainError("Q and M must be square and of equal size")
    A, sparse = _shifted(Q, M, shift)
    n = A.shape[0]
    if zero_tol is None:
        norm = abs(A).sum(axis=0).max() if sparse else np.abs(A).sum(axis=0).max()
        zero_tol = 64 * n * np.finfo(float).eps * float(norm)
    if sparse:
        return _sparse_inertia(A, zero_tol)
    return _dense_inertia(A, zero_tol)


def count_in_band(Q, M, center: float, halfwidth: float) -> InertiaCount:
    """Eigenvalue counts below, inside and above ``[center - halfwidth, center + halfwidth]``.

    Two factorizations at the band edges; the ``zero`` field holds the number
    of eigenvalues inside the band.
    """
    if halfwidth <= 0:
        raise DomainError("halfwidth must be positive")
    lo = inertia_of_pencil(Q, M, center - halfwidth, zero_tol=0.0)
    hi = inertia_of_pencil(Q, M, center + halfwidth, zero_tol=0.0)
    below = lo.negative
    inside = hi.negative - lo.negative
    n = Q.shape[0]
    return InertiaCount(below, inside, n - below - inside)
