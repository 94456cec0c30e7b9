"""Hot numeric kernels.

Each kernel exists twice: a loop version compiled with numba and a vectorized
numpy version. The public names point at one or the other depending on
``USE_NUMBA``; both are importable for benchmarking and cross-checks.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# arc length: value, gradient and Hessian diagonal of width * sum sqrt(1+f^2)


def _arc_length_terms_np(f, width):
    r = np.hypot(1.0, f)
    value = width * r.sum()
    grad = width * f / r
    hdiag = width / (r * r * r)
    return value, grad, hdiag


@njit
def _arc_length_terms_nb(f, width):
    n = f.shape[0]
    grad = np.empty(n)
    hdiag = np.empty(n)
    total = 0.0
    for i in range(n):
        r = np.hypot(1.0, f[i])
        total += r
        grad[i] = width * f[i] / r
        hdiag[i] = width / (r * r * r)
    return width * total, grad, hdiag


# --------------------------------------------------------------------------
# Newton direction for Hessian = diag(h) + rho * J^T J restricted to free set


def _lowrank_newton_direction_np(hdiag, jac, rho, grad, free):
    d = -grad / hdiag
    if not free.any():
        return d
    h = hdiag[free]
    g = grad[free]
    jf = jac[:, free]
    # Woodbury: (H + rho J^T J)^{-1} = H^-1 - H^-1 J^T (I/rho + J H^-1 J^T)^-1 J H^-1
    hinv_g = g / h
    hinv_jt = jf.T / h[:, None]
    small = jf @ hinv_jt
    small[np.diag_indices_from(small)] += 1.0 / rho
    corr = hinv_jt @ np.linalg.solve(small, jf @ hinv_g)
    d[free] = -(hinv_g - corr)
    return d


@njit
def _lowrank_newton_direction_nb(hdiag, jac, rho, grad, free):
    n = grad.shape[0]
    m = jac.shape[0]
    d = np.empty(n)
    for i in range(n):
        d[i] = -grad[i] / hdiag[i]
    small = np.zeros((m, m))
    rhs = np.zeros(m)
    nfree = 0
    for i in range(n):
        if free[i]:
            nfree += 1
            hi = hdiag[i]
            gi = grad[i] / hi
            for r in range(m):
                jr = jac[r, i]
                rhs[r] += jr * gi
                for c in range(r, m):
                    small[r, c] += jr * jac[c, i] / hi
    if nfree == 0:
        return d
    for r in range(m):
        small[r, r] += 1.0 / rho
        for c in range(r):
            small[r, c] = small[c, r]
    z = np.linalg.solve(small, rhs)
    for i in range(n):
        if free[i]:
            acc = grad[i]
            for r in range(m):
                acc -= jac[r, i] * z[r]
            d[i] = -acc / hdiag[i]
    return d


# --------------------------------------------------------------------------
# parametric density P/sqrt(1-P^2) at points, with P from monomial coefficients


def _parametric_values_np(coeffs, x):
    p = np.zeros_like(x)
    for c in coeffs[::-1]:
        p = p * x + c
    with np.errstate(invalid="ignore", divide="ignore"):  # callers screen |P| >= 1
        return p, p / np.sqrt((1.0 - p) * (1.0 + p))


@njit
def _parametric_values_nb(coeffs, x):
    n = x.shape[0]
    p = np.empty(n)
    f = np.empty(n)
    deg = coeffs.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(deg - 1, -1, -1):
            acc = acc * x[i] + coeffs[j]
        p[i] = acc
        f[i] = acc / np.sqrt((1.0 - acc) * (1.0 + acc))
    return p, f


# --------------------------------------------------------------------------
# alternating projection onto {W f = mu} and {f >= 0}


def _alternating_projection_np(f, w, mu, gram_inv, max_iter, tol):
    f = f.copy()
    viol = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f -= w.T @ (gram_inv @ (w @ f - mu))
        if f.min() >= 0.0:
            viol = np.abs(w @ f - mu).max()
            break
        np.maximum(f, 0.0, out=f)
        viol = np.abs(w @ f - mu).max()
        if viol <= tol:
            break
    return f, it, viol


@njit
def _alternating_projection_nb(f, w, mu, gram_inv, max_iter, tol):
    f = f.copy()
    m, n = w.shape
    res = np.empty(m)
    coef = np.empty(m)
    viol = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        for r in range(m):
            acc = -mu[r]
            for i in range(n):
                acc += w[r, i] * f[i]
            res[r] = acc
        for r in range(m):
            acc = 0.0
            for c in range(m):
                acc += gram_inv[r, c] * res[c]
            coef[r] = acc
        fmin = np.inf
        for i in range(n):
            acc = 0.0
            for r in range(m):
                acc += w[r, i] * coef[r]
            f[i] -= acc
            if f[i] < fmin:
                fmin = f[i]
        clipped = fmin < 0.0
        if clipped:
            for i in range(n):
                if f[i] < 0.0:
                    f[i] = 0.0
        viol = 0.0
        for r in range(m):
            acc = -mu[r]
            for i in range(n):
                acc += w[r, i] * f[i]
            if abs(acc) > viol:
                viol = abs(acc)
        if not clipped or viol <= tol:
            break
    return f, it, viol


if USE_NUMBA:
    arc_length_terms = _arc_length_terms_nb
    lowrank_newton_direction = _lowrank_newton_direction_nb
    parametric_values = _parametric_values_nb
    alternating_projection = _alternating_projection_nb
else:
    arc_length_terms = _arc_length_terms_np
    lowrank_newton_direction = _lowrank_newton_direction_np
    parametric_values = _parametric_values_np
    alternating_projection = _alternating_projection_np

BACKEND = "numba" if USE_NUMBA else "numpy"
