# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

from libc.math cimport fabs, tanh, copysign

import math

import numpy as np

cdef enum:
    NMAX = 16

MAX_PHASES = NMAX
BRILLOUIN_Y_SMALL = 1e-4

cdef double[12] _LSER = [
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
]


cdef int _load(object values, double* out) except -1:
    cdef Py_ssize_t n = len(values)
    cdef Py_ssize_t i
    if n > NMAX:
        raise ValueError(f"at most {NMAX} phases supported, got {n}")
    for i in range(n):
        out[i] = <double>float(values[i])
    return <int>n


cdef void _esp(const double* v, int n, double* e) noexcept nogil:
    cdef int m, j
    e[0] = 1.0
    for j in range(1, n + 1):
        e[j] = 0.0
    for m in range(1, n + 1):
        for j in range(m, 0, -1):
            e[j] += v[m - 1] * e[j - 1]


cdef void _esp_excl(const double* th, int n, int k, double* e) noexcept nogil:
    cdef double buf[NMAX]
    cdef int i, c = 0
    for i in range(n):
        if i != k:
            buf[c] = th[i]
            c += 1
    _esp(buf, n - 1, e)


cdef double _det(double* a, int n, int lda) noexcept nogil:
    # a is row-major with leading dimension lda; destroyed for n > 4
    cdef double sub[NMAX * NMAX]
    cdef double total, d, piv, f, tmp
    cdef int c, r, cc, rr, p, sc
    if n == 0:
        return 1.0
    if n == 1:
        return a[0]
    if n == 2:
        return a[0] * a[lda + 1] - a[1] * a[lda]
    if n <= 4:
        total = 0.0
        for c in range(n):
            if a[c] == 0.0:
                continue
            for r in range(1, n):
                sc = 0
                for cc in range(n):
                    if cc != c:
                        sub[(r - 1) * NMAX + sc] = a[r * lda + cc]
                        sc += 1
            if c % 2:
                total -= a[c] * _det(sub, n - 1, NMAX)
            else:
                total += a[c] * _det(sub, n - 1, NMAX)
        return total
    d = 1.0
    for c in range(n):
        p = c
        for r in range(c + 1, n):
            if fabs(a[r * lda + c]) > fabs(a[p * lda + c]):
                p = r
        if a[p * lda + c] == 0.0:
            return 0.0
        if p != c:
            for cc in range(n):
                tmp = a[c * lda + cc]
                a[c * lda + cc] = a[p * lda + cc]
                a[p * lda + cc] = tmp
            d = -d
        piv = a[c * lda + c]
        d *= piv
        for r in range(c + 1, n):
            f = a[r * lda + c] / piv
            if f != 0.0:
                for cc in range(c + 1, n):
                    a[r * lda + cc] -= f * a[c * lda + cc]
    return d


cdef double _cofactor(const double* a, int n, int row, int col) noexcept nogil:
    cdef double sub[NMAX * NMAX]
    cdef int r, c, sr = 0, sc
    for r in range(n):
        if r == row:
            continue
        sc = 0
        for c in range(n):
            if c != col:
                sub[sr * NMAX + sc] = a[r * n + c]
                sc += 1
        sr += 1
    if (row + col) % 2:
        return -_det(sub, n - 1, NMAX)
    return _det(sub, n - 1, NMAX)


cdef void _wnl(const double* th, int n, double* w) noexcept nogil:
    cdef double e[NMAX + 1]
    cdef int j, k
    for k in range(n):
        _esp_excl(th, n, k, e)
        for j in range(n):
            w[j * n + k] = e[j]


def esp(values):
    cdef double v[NMAX]
    cdef double e[NMAX + 1]
    cdef int n = _load(values, v)
    _esp(v, n, e)
    return [e[j] for j in range(n + 1)]


def esp_excluding(theta, int k):
    cdef double th[NMAX]
    cdef double e[NMAX + 1]
    cdef int n = _load(theta, th)
    if k < 0 or k >= n:
        raise IndexError(k)
    _esp_excl(th, n, k, e)
    return [e[j] for j in range(n)]


def tsallis_entropy(double q, theta):
    cdef double th[NMAX]
    cdef double e[NMAX + 1]
    cdef int n = _load(theta, th)
    cdef int j
    cdef double acc = 0.0
    if q == 0.0:
        return math.fsum([th[j] for j in range(n)])
    _esp(th, n, e)
    for j in range(n, 0, -1):
        acc = acc * q + e[j]
    return acc


def tsallis_gradient(double q, theta):
    cdef double th[NMAX]
    cdef double fac[NMAX]
    cdef int n = _load(theta, th)
    cdef int j, k
    cdef double p
    if q == 0.0:
        return [1.0] * n
    for j in range(n):
        fac[j] = 1.0 + q * th[j]
    out = []
    for k in range(n):
        p = 1.0
        for j in range(n):
            if j != k:
                p *= fac[j]
        out.append(p)
    return out


def tsallis_hessian(double q, theta):
    cdef double th[NMAX]
    cdef double fac[NMAX]
    cdef int n = _load(theta, th)
    cdef int i, j, k
    cdef double p
    out = [[0.0] * n for _ in range(n)]
    if q == 0.0:
        return out
    for j in range(n):
        fac[j] = 1.0 + q * th[j]
    for i in range(n):
        for k in range(i + 1, n):
            p = q
            for j in range(n):
                if j != i and j != k:
                    p *= fac[j]
            out[i][k] = p
            out[k][i] = p
    return out


cdef int _load_matrix(object m, double* a) except -1:
    cdef Py_ssize_t n = len(m)
    cdef Py_ssize_t r, c
    if n > NMAX:
        raise ValueError(f"matrix too large: {n} > {NMAX}")
    for r in range(n):
        row = m[r]
        if len(row) != n:
            raise ValueError("matrix must be square")
        for c in range(n):
            a[r * n + c] = <double>float(row[c])
    return <int>n


def det(m):
    cdef double a[NMAX * NMAX]
    cdef int n = _load_matrix(m, a)
    return _det(a, n, n)


def cofactor(m, int row, int col):
    cdef double a[NMAX * NMAX]
    cdef int n = _load_matrix(m, a)
    if not (0 <= row < n and 0 <= col < n):
        raise IndexError((row, col))
    return _cofactor(a, n, row, col)


def wnl_matrix(theta):
    cdef double th[NMAX]
    cdef double w[NMAX * NMAX]
    cdef int n = _load(theta, th)
    cdef int j, k
    _wnl(th, n, w)
    return [[w[j * n + k] for k in range(n)] for j in range(n)]


def wnl_cofactor_columns(theta, int i, nodes):
    cdef double th[NMAX]
    cdef double w[NMAX * NMAX]
    cdef int n = _load(theta, th)
    cdef int j
    cdef double[::1] xs = np.ascontiguousarray(nodes, dtype=np.float64).ravel()
    cdef Py_ssize_t m, nn = xs.shape[0]
    cdef double[:, ::1] res = np.empty((nn, n), dtype=np.float64)
    if i < 0 or i >= n:
        raise IndexError(i)
    with nogil:
        for m in range(nn):
            th[i] = xs[m]
            _wnl(th, n, w)
            for j in range(n):
                res[m, j] = _cofactor(w, n, j, i)
    return [[res[m, j] for j in range(n)] for m in range(nn)]


def wnl_cofactor_ratios(theta, int i, nodes, double rtol):
    cdef double th[NMAX]
    cdef double w[NMAX * NMAX]
    cdef int n = _load(theta, th)
    cdef int j
    cdef double[::1] xs = np.ascontiguousarray(nodes, dtype=np.float64).ravel()
    cdef Py_ssize_t m, nn = xs.shape[0]
    out = np.empty((nn, n), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double den, big = 1.0
    cdef bint bad = False
    if i < 0 or i >= n:
        raise IndexError(i)
    with nogil:
        for m in range(nn):
            th[i] = xs[m]
            _wnl(th, n, w)
            for j in range(n):
                res[m, j] = _cofactor(w, n, j, i)
                if fabs(res[m, j]) > big:
                    big = fabs(res[m, j])
        for m in range(nn):
            if fabs(res[m, n - 1]) <= rtol * big:
                bad = True
        if not bad:
            for m in range(nn):
                den = res[m, n - 1]
                for j in range(n):
                    res[m, j] = res[m, j] / den
    if bad:
        raise ZeroDivisionError("vanishing denominator cofactor")
    return out


cdef double _langevin(double x) noexcept nogil:
    cdef double ax = fabs(x), x2, acc
    cdef int c
    if ax < 0.5:
        x2 = x * x
        acc = 0.0
        for c in range(11, -1, -1):
            acc = acc * x2 + _LSER[c]
        return acc * x
    if ax > 20.0:
        return copysign(1.0, x) - 1.0 / x
    return 1.0 / tanh(x) - 1.0 / x


cdef double _brillouin(double s, double y) noexcept nogil:
    cdef double two_s = 2.0 * s
    cdef double a = (two_s + 1.0) / two_s
    cdef double b = 1.0 / two_s
    cdef double c1, c3
    if fabs(y) < 1e-4:
        c1 = (s + 1.0) / (3.0 * s)
        c3 = (a * a * a * a - b * b * b * b) / 45.0
        return y * (c1 - c3 * y * y)
    return a * _langevin(a * y) - b * _langevin(b * y)


def langevin(double x):
    return _langevin(x)


def brillouin(double s, double y):
    return _brillouin(s, y)


def brillouin_array(double s, ys):
    arr = np.asarray(ys, dtype=np.float64)
    cdef double[::1] flat = np.ascontiguousarray(arr).ravel()
    out = np.empty(flat.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t m
    with nogil:
        for m in range(flat.shape[0]):
            o[m] = _brillouin(s, flat[m])
    return out.reshape(arr.shape)
