"""Small dense linear algebra and scalar root finding (n <= 8)."""

from __future__ import annotations

import math

import numpy as np

from .errors import BracketError, ConvergenceError, SingularMatrixError

MAX_DIM = 8
PIVOT_TOL = 1e-14
RESIDUAL_TOL = 1e-10
EIG_MAX_ITER = 10_000


def _as_square(A):
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DIM:
        raise ValueError(f"matrix dimension {A.shape[0]} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _residual(A, x, b):
    # compensated sums so the residual is not dominated by its own rounding
    return np.array([math.fsum(np.concatenate((A[i] * x, [-b[i]]))) for i in range(len(b))])


def _eliminate(A, b):
    n = len(b)
    M = A.copy()
    r = b.copy()
    for k in range(n):
        piv = k + int(np.argmax(np.abs(M[k:, k])))
        if abs(M[piv, k]) < PIVOT_TOL:
            raise SingularMatrixError(f"pivot {M[piv, k]:.3e} in column {k} below {PIVOT_TOL:g}")
        if piv != k:
            M[[k, piv]] = M[[piv, k]]
            r[[k, piv]] = r[[piv, k]]
        for i in range(k + 1, n):
            m = M[i, k] / M[k, k]
            if m != 0.0:
                M[i, k:] -= m * M[k, k:]
                r[i] -= m * r[k]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (r[i] - M[i, i + 1:] @ x[i + 1:]) / M[i, i]
    return x


def solve_linear(A, b):
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Up to two rounds of iterative refinement (with compensated residuals)
    are applied; the result satisfies ``|Ax - b|_inf <= 1e-10 |b|_inf`` or
    :class:`SingularMatrixError` is raised.
    """
    A = _as_square(A)
    b = np.array(b, dtype=float).ravel()
    if b.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch between A and b")
    x = _eliminate(A, b)
    bound = RESIDUAL_TOL * np.max(np.abs(b)) if b.size else 0.0
    for _ in range(3):
        res = _residual(A, x, b)
        if np.max(np.abs(res), initial=0.0) <= bound:
            return x
        x = x - _eliminate(A, res)
    res = _residual(A, x, b)
    if np.max(np.abs(res), initial=0.0) <= bound:
        return x
    raise SingularMatrixError(
        f"residual {np.max(np.abs(res)):.3e} exceeds bound {bound:.3e}; matrix too ill-conditioned")


def characteristic_polynomial(A):
    """Monic coefficients of ``det(lambda I - A)``, highest power first.

    Faddeev-LeVerrier recursion. Exact in rational arithmetic; fine in
    floating point for the small, moderately scaled matrices used here.
    """
    A = _as_square(A)
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs


def polynomial_roots(coeffs, max_iter=EIG_MAX_ITER, tol=1e-15):
    """All roots of a polynomial by Durand-Kerner (Weierstrass) iteration."""
    a = np.array(coeffs, dtype=complex)
    if a[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    a = a / a[0]
    n = len(a) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    if np.all(a[1:] == 0):
        return np.zeros(n, dtype=complex)
    # Cauchy bound on root modulus sets the starting circle
    radius = 1.0 + np.max(np.abs(a[1:]))
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(max_iter):
        delta_max = 0.0
        for i in range(n):
            num = np.polyval(a, z[i])
            den = np.prod(z[i] - np.delete(z, i))
            if den == 0:
                den = 1e-300
            step = num / den
            z[i] -= step
            delta_max = max(delta_max, abs(step) / (1.0 + abs(z[i])))
        if delta_max <= tol:
            return z
    # slow linear convergence onto clustered roots can stall the step test;
    # accept when the residual is already at rounding level
    resid = np.abs(np.polyval(a, z))
    scale = np.polyval(np.abs(a), np.abs(z))
    if np.all(resid <= 1e-10 * scale):
        return z
    raise ConvergenceError(f"Durand-Kerner did not converge in {max_iter} iterations")


def eigenvalues_small(A):
    """Eigenvalues of a square matrix with ``n <= 8``, with multiplicity.

    Characteristic polynomial (of the norm-scaled matrix) followed by
    simultaneous Durand-Kerner root iteration. Near-real roots of a real
    matrix are snapped to the real axis and the result is sorted by
    descending real part.
    """
    A = _as_square(A)
    n = A.shape[0]
    scale = np.max(np.abs(A)) if n else 0.0
    if scale == 0.0:
        return np.zeros(n, dtype=complex)
    roots = polynomial_roots(characteristic_polynomial(A / scale)) * scale
    snap = np.abs(roots.imag) <= 1e-12 * (1.0 + np.abs(roots))
    roots[snap] = roots[snap].real
    bound = 1e-8 * np.linalg.norm(A, np.inf) ** n
    coeffs = characteristic_polynomial(A)
    for lam in roots:
        if abs(np.polyval(coeffs, lam)) > max(bound, 1e-300):
            raise ConvergenceError(f"eigenvalue {lam} fails the determinant check")
    order = np.lexsort((-roots.imag, -roots.real))
    return roots[order]


def find_root_bisect(g, a, b, tol=1e-12, max_iter=400):
    """Bisection for ``g(x) = 0`` on ``[a, b]``; returns the bracket midpoint.

    The final bracket width is at most ``tol``.
    """
    a, b = float(a), float(b)
    ga, gb = g(a), g(b)
    if ga == 0:
        return a
    if gb == 0:
        return b
    if not (ga * gb < 0):
        raise BracketError(f"no sign change on [{a}, {b}]: g(a)={ga}, g(b)={gb}")
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        gm = g(mid)
        if gm == 0:
            return mid
        if (gm < 0) == (ga < 0):
            a, ga = mid, gm
        else:
            b = mid
    return 0.5 * (a + b)
