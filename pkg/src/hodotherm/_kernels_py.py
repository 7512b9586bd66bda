"""Pure-Python implementations of the hot kernels.

This module mirrors ``_kernels.pyx`` function for function and is used when
the compiled extension is unavailable (or ``HODOTHERM_PURE_PYTHON`` is set).
Both backends must return identical results up to rounding.
"""

import math

import numpy as np

MAX_PHASES = 16

# Taylor coefficients of coth(x) - 1/x (odd powers x, x^3, ...).
_LANGEVIN_SERIES = (
    0.3333333333333333,
    -0.022222222222222223,
    0.0021164021164021165,
    -0.00021164021164021165,
    2.1377799155576935e-05,
    -2.1644042808063972e-06,
    2.1925947851873778e-07,
    -2.2214608789979678e-08,
    2.2507846516808994e-09,
    -2.2805151204592183e-10,
    2.3106432599002624e-11,
    -2.3411706819824882e-12,
)
_LANGEVIN_SWITCH = 0.5
BRILLOUIN_Y_SMALL = 1e-4


def _check_size(n):
    if n > MAX_PHASES:
        raise ValueError(f"at most {MAX_PHASES} phases supported, got {n}")


def esp(values):
    """Elementary symmetric polynomials e_0..e_n of ``values``."""
    vals = [float(v) for v in values]
    _check_size(len(vals))
    e = [1.0] + [0.0] * len(vals)
    for m, v in enumerate(vals, start=1):
        for j in range(m, 0, -1):
            e[j] += v * e[j - 1]
    return e


def esp_excluding(theta, k):
    """e_0..e_{N-1} of theta with entry ``k`` removed."""
    th = [float(t) for t in theta]
    return esp(th[:k] + th[k + 1:])


def tsallis_entropy(q, theta):
    q = float(q)
    if q == 0.0:
        return math.fsum(float(t) for t in theta)
    e = esp(theta)
    acc = 0.0
    for j in range(len(e) - 1, 0, -1):
        acc = acc * q + e[j]
    return acc


def tsallis_gradient(q, theta):
    q = float(q)
    th = [float(t) for t in theta]
    n = len(th)
    if q == 0.0:
        return [1.0] * n
    fac = [1.0 + q * t for t in th]
    out = []
    for k in range(n):
        p = 1.0
        for j in range(n):
            if j != k:
                p *= fac[j]
        out.append(p)
    return out


def tsallis_hessian(q, theta):
    q = float(q)
    th = [float(t) for t in theta]
    n = len(th)
    fac = [1.0 + q * t for t in th]
    out = [[0.0] * n for _ in range(n)]
    if q == 0.0:
        return out
    for i in range(n):
        for k in range(i + 1, n):
            p = q
            for j in range(n):
                if j != i and j != k:
                    p *= fac[j]
            out[i][k] = p
            out[k][i] = p
    return out


def det(m):
    """Determinant: cofactor expansion for n <= 4, partial-pivot LU above."""
    a = [[float(x) for x in row] for row in m]
    n = len(a)
    if n == 0:
        return 1.0
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    if n <= 4:
        total = 0.0
        for c in range(n):
            if a[0][c] == 0.0:
                continue
            minor = [row[:c] + row[c + 1:] for row in a[1:]]
            sign = -1.0 if c % 2 else 1.0
            total += sign * a[0][c] * det(minor)
        return total
    d = 1.0
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(a[r][c]))
        if a[p][c] == 0.0:
            return 0.0
        if p != c:
            a[c], a[p] = a[p], a[c]
            d = -d
        piv = a[c][c]
        d *= piv
        for r in range(c + 1, n):
            f = a[r][c] / piv
            if f != 0.0:
                row_r, row_c = a[r], a[c]
                for cc in range(c + 1, n):
                    row_r[cc] -= f * row_c[cc]
    return d


def cofactor(m, row, col):
    rows = [list(r) for r in m]
    minor = [r[:col] + r[col + 1:] for i, r in enumerate(rows) if i != row]
    sign = -1.0 if (row + col) % 2 else 1.0
    return sign * det(minor)


def wnl_matrix(theta):
    """Rows j = 0..N-1 hold e_j of theta with column k's entry removed."""
    th = [float(t) for t in theta]
    n = len(th)
    _check_size(n)
    cols = [esp_excluding(th, k) for k in range(n)]
    return [[cols[k][j] for k in range(n)] for j in range(n)]


def wnl_cofactor_columns(theta, i, nodes):
    """Cofactors C(j, i), j = 0..N-1, of the wnl matrix with theta[i] set to each node."""
    th = [float(t) for t in theta]
    out = []
    for x in nodes:
        th[i] = float(x)
        w = wnl_matrix(th)
        out.append([cofactor(w, j, i) for j in range(len(th))])
    return out


def wnl_cofactor_ratios(theta, i, nodes, rtol):
    """Ratios C(j, i)/C(N-1, i) per node as an (m, N) array.

    Raises ZeroDivisionError when a denominator is below ``rtol`` times the
    largest cofactor magnitude (floored at 1).
    """
    cols = np.array(wnl_cofactor_columns(theta, i, nodes), dtype=float).reshape(-1, len(theta))
    den = cols[:, -1]
    scale = max(1.0, float(np.abs(cols).max())) if cols.size else 1.0
    if (np.abs(den) <= rtol * scale).any():
        raise ZeroDivisionError("vanishing denominator cofactor")
    return cols / den[:, None]


def langevin(x):
    """coth(x) - 1/x, accurate through the removable singularity."""
    x = float(x)
    ax = abs(x)
    if ax < _LANGEVIN_SWITCH:
        x2 = x * x
        acc = 0.0
        for c in reversed(_LANGEVIN_SERIES):
            acc = acc * x2 + c
        return acc * x
    if ax > 20.0:
        return math.copysign(1.0, x) - 1.0 / x
    return 1.0 / math.tanh(x) - 1.0 / x


def brillouin(s, y):
    s = float(s)
    y = float(y)
    two_s = 2.0 * s
    a = (two_s + 1.0) / two_s
    b = 1.0 / two_s
    if abs(y) < BRILLOUIN_Y_SMALL:
        c1 = (s + 1.0) / (3.0 * s)
        c3 = (a ** 4 - b ** 4) / 45.0
        return y * (c1 - c3 * y * y)
    return a * langevin(a * y) - b * langevin(b * y)


def brillouin_array(s, ys):
    ys = np.asarray(ys, dtype=float)
    return np.array([brillouin(s, y) for y in ys.ravel()]).reshape(ys.shape)
