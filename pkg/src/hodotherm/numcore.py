"""Shared numerical building blocks.

Order-parameter points are 1-D float arrays. Scalar and vector fields wrap
plain callables and fall back to finite differences when no analytic
derivative is attached. Phase indices are zero-based throughout.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import DifferentiationError, PoleError, QuadratureError

EPS = np.finfo(float).eps
FD_STEP = EPS ** (1.0 / 3.0)
FD_STEP2 = EPS ** (1.0 / 6.0)
EPS_POLE = 1e-9


def as_point(theta) -> np.ndarray:
    """Validate an order-parameter point (returned as a float array, not copied)."""
    p = np.asarray(theta, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("an order-parameter point needs at least one entry")
    if not np.isfinite(p).all():
        raise ValueError(f"non-finite order parameter in {tuple(p)}")
    return p


def pole_gap(theta) -> float:
    """Smallest admissible separation for pole-carrying denominators at ``theta``."""
    return EPS_POLE * max(1.0, float(np.max(np.abs(theta))))


def check_gap(diff: float, theta, what: str) -> None:
    if abs(diff) <= pole_gap(theta):
        raise PoleError(f"coincident {what} at theta={tuple(np.asarray(theta, float))}")


def _finite(value, point):
    if not np.all(np.isfinite(value)):
        raise DifferentiationError(point)
    return value


def _step(theta, k, base):
    return base * max(1.0, abs(theta[k]))


def fd_partial(f: Callable, p, k: int, h: Optional[float] = None) -> float:
    """Central difference in direction ``k`` with one Richardson level.

    The default step is ``cbrt(eps) * max(1, |theta_k|)``; the extrapolated
    value is accurate to O(h^4) up to rounding.
    """
    x = as_point(p)
    h = _step(x, k, FD_STEP) if h is None else float(h)
    if h <= 0:
        raise ValueError("step must be positive")

    def central(step):
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        fp = _finite(f(xp), xp)
        fm = _finite(f(xm), xm)
        return (fp - fm) / (2.0 * step)

    d1 = central(h)
    d2 = central(0.5 * h)
    return (4.0 * d2 - d1) / 3.0


def fd_second(f: Callable, p, i: int, j: int, h: Optional[float] = None) -> float:
    """Second partial d_i d_j f by Richardson-extrapolated central stencils."""
    x = as_point(p)
    if h is None:
        hi = _step(x, i, FD_STEP2)
        hj = _step(x, j, FD_STEP2)
    else:
        hi = hj = float(h)

    def ev(di, dj):
        y = x.copy()
        y[i] += di
        y[j] += dj
        return _finite(f(y), y)

    def stencil(a, b):
        if i == j:
            return (ev(a, 0.0) - 2.0 * ev(0.0, 0.0) + ev(-a, 0.0)) / (a * a)
        return (ev(a, b) - ev(a, -b) - ev(-a, b) + ev(-a, -b)) / (4.0 * a * b)

    d1 = stencil(hi, hj)
    d2 = stencil(0.5 * hi, 0.5 * hj)
    return (4.0 * d2 - d1) / 3.0


def fd_gradient(f: Callable, p) -> np.ndarray:
    x = as_point(p)
    return np.array([fd_partial(f, x, k) for k in range(x.size)])


def fd_hessian(f: Callable, p) -> np.ndarray:
    x = as_point(p)
    n = x.size
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = fd_second(f, x, i, j)
    return out


def fd_jacobian(f: Callable, p) -> np.ndarray:
    """Jacobian ``J[k, l] = d_l f_k`` of a vector-valued function."""
    x = as_point(p)
    n = x.size
    cols = []
    for l in range(n):
        h = _step(x, l, FD_STEP)

        def central(step):
            xp = x.copy()
            xm = x.copy()
            xp[l] += step
            xm[l] -= step
            fp = _finite(np.asarray(f(xp), dtype=float), xp)
            fm = _finite(np.asarray(f(xm), dtype=float), xm)
            return (fp - fm) / (2.0 * step)

        cols.append((4.0 * central(0.5 * h) - central(h)) / 3.0)
    return np.column_stack(cols)


@dataclass(frozen=True)
class ScalarField:
    """A real function of the order parameters with optional analytic derivatives."""

    eval: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, theta) -> float:
        return float(self.eval(as_point(theta)))

    @property
    def analytic(self) -> bool:
        return self.grad is not None

    def gradient(self, theta) -> np.ndarray:
        x = as_point(theta)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return fd_gradient(self, x)

    def partial(self, theta, k: int) -> float:
        return float(self.gradient(theta)[k])

    def hessian(self, theta) -> np.ndarray:
        x = as_point(theta)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        if self.grad is not None:
            jac = fd_jacobian(self.grad, x)
            return 0.5 * (jac + jac.T)
        return fd_hessian(self, x)


@dataclass(frozen=True)
class VectorField:
    """N characteristic speeds ``v^k(theta)``.

    Optional analytic derivatives: ``jac`` gives ``J[k, l] = d_l v^k`` and
    ``hess`` gives ``H[k, l, s] = d_l d_s v^k``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, theta) -> np.ndarray:
        return np.asarray(self.eval(as_point(theta)), dtype=float)

    @property
    def analytic(self) -> bool:
        return self.jac is not None

    def jacobian(self, theta) -> np.ndarray:
        x = as_point(theta)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        return fd_jacobian(self, x)

    def hessian(self, theta) -> np.ndarray:
        x = as_point(theta)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        n = x.size
        if self.jac is not None:
            # H[:, :, s] = d_s J
            cols = [fd_jacobian(lambda y, s=s: np.asarray(self.jac(y))[:, s], x) for s in range(n)]
            h = np.stack(cols, axis=1)
            return 0.5 * (h + h.transpose(0, 2, 1))
        return np.stack([fd_hessian(lambda y, k=k: float(self.eval(y)[k]), x) for k in range(n)])

    def component(self, k: int) -> ScalarField:
        grad = None
        if self.jac is not None:
            grad = lambda x, k=k: np.asarray(self.jac(x))[k]  # noqa: E731
        return ScalarField(lambda x, k=k: float(self.eval(x)[k]), grad)

    @classmethod
    def constant(cls, values) -> "VectorField":
        v = np.array(values, dtype=float)
        n = v.size
        return cls(lambda x: v.copy(), lambda x: np.zeros((n, n)), lambda x: np.zeros((n, n, n)))

    @classmethod
    def ones(cls, n: int) -> "VectorField":
        return cls.constant(np.ones(n))


def det(m) -> float:
    """Determinant of a small square matrix (expansion for n <= 4, LU above)."""
    return kernels.det(np.asarray(m, dtype=float).tolist())


def cofactor(m, row: int, col: int) -> float:
    """Signed minor ``(-1)**(row+col) * det(m without row, col)``; 1 for a 1x1 matrix."""
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("cofactor needs a square matrix")
    if not (0 <= row < n and 0 <= col < n):
        raise IndexError(f"({row}, {col}) outside a {n}x{n} matrix")
    return kernels.cofactor(a.tolist(), row, col)


def cofactor_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    rows = a.tolist()
    return np.array([[kernels.cofactor(rows, r, c) for c in range(n)] for r in range(n)])


# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (non-negative half).
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
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes.
_G_WEIGHTS = np.zeros(15)
_G_WEIGHTS[1::2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(g, a, b, vectorized):
    c = 0.5 * (a + b)
    r = 0.5 * (b - a)
    x = c + r * GK_NODES
    if vectorized:
        fx = np.asarray(g(x), dtype=float)
        if fx.ndim == 0:
            fx = np.full(15, float(fx))
    else:
        fx = np.array([g(xi) for xi in x], dtype=float)
    if not np.isfinite(fx).all():
        raise QuadratureError(f"non-finite integrand on [{a}, {b}]")
    k = r * (GK_WEIGHTS @ fx)
    gs = r * (_G_WEIGHTS @ fx)
    resabs = abs(r) * float((GK_WEIGHTS @ np.abs(fx)).max())
    return k, float(np.abs(k - gs).max()), resabs


def quadrature(g: Callable, a: float, b: float, tol: float = 1e-10,
               max_intervals: int = 1000, vectorized: bool = False):
    """Globally adaptive Gauss-Kronrod (7, 15) integral of ``g`` over [a, b].

    ``g`` may be vector valued; the error bound then applies componentwise.
    With ``vectorized=True`` it is called once per panel with all 15 nodes.
    Refinement also stops once the error estimate reaches the rounding floor
    ``100 * eps * integral(|g|)``, so ``tol`` below that floor is not an error.

    Raises
    ------
    QuadratureError
        If the error estimate is still above ``tol`` after ``max_intervals``
        panels.
    """
    a = float(a)
    b = float(b)
    if a == b:
        probe = np.asarray(g(np.array([a])) if vectorized else g(a), dtype=float)
        if vectorized and probe.ndim >= 1:
            probe = probe[0]
        return 0.0 if probe.ndim == 0 else np.zeros_like(probe)
    if a > b:
        return -quadrature(g, b, a, tol, max_intervals, vectorized)
    total, err, resabs = _gk15(g, a, b, vectorized)
    heap = [(-err, a, b, total)]
    err_sum = err
    # requested accuracy below the rounding floor of the integrand is not attainable
    floor = 100.0 * EPS * resabs
    count = 0
    while err_sum > max(tol, floor):
        if len(heap) >= max_intervals:
            raise QuadratureError(
                f"no convergence on [{a}, {b}]: error estimate {err_sum:.3g} > {tol:.3g}")
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise QuadratureError(f"interval [{lo}, {hi}] cannot be subdivided further")
        v1, e1, _ = _gk15(g, lo, mid, vectorized)
        v2, e2, _ = _gk15(g, mid, hi, vectorized)
        total = total - val + v1 + v2
        err_sum += e1 + e2 + neg_err
        count += 1
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        if count % 64 == 0:
            # resum to stop drift in the running totals
            total = sum((item[3] for item in heap[1:]), heap[0][3])
            err_sum = math.fsum(-item[0] for item in heap)
    if np.ndim(total) == 0:
        return float(total)
    return total
