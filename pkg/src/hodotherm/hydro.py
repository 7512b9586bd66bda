"""Integrability machinery for diagonal systems of hydrodynamic type.

A flow is ``theta^k_tau = mu^k(theta) theta^k_T``. The residual functions
below return zero (to rounding) exactly when the corresponding compatibility
condition holds at the given point; symmetry and conservation residuals are
returned in cross-multiplied form so they stay finite near speed collisions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    CofactorSingularityError,
    ConditionVacuousError,
    DegenerateEntropyError,
    PathDependenceError,
    PoleError,
)
from .numcore import (
    ScalarField,
    VectorField,
    as_point,
    fd_jacobian,
    pole_gap,
    quadrature,
)
from .tsallis import TsallisEntropy


@dataclass(frozen=True)
class SpeedFamily:
    """Commuting flows ``mu_(i)``, i = 0..M; flow 0 is the unit (temperature) flow."""

    n: int
    flows: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one phase")
        if len(self.flows) < 1:
            raise ValueError("a speed family holds at least the unit flow")
        object.__setattr__(self, "flows", tuple(self.flows))

    @classmethod
    def with_unit_flow(cls, n: int, *flows) -> "SpeedFamily":
        return cls(n, (VectorField.ones(n),) + tuple(flows))

    @property
    def m(self) -> int:
        """Number of non-trivial flows (conjugate variables)."""
        return len(self.flows) - 1

    @property
    def analytic(self) -> bool:
        return all(getattr(f, "analytic", False) for f in self.flows)

    def speeds(self, flow: int, theta) -> np.ndarray:
        return self.flows[flow](theta)

    def jacobian(self, flow: int, theta) -> np.ndarray:
        return self.flows[flow].jacobian(theta)


@dataclass(frozen=True)
class ConservationPair:
    """A conserved density and, when known, its current."""

    density: ScalarField
    current: Optional[ScalarField] = None


@dataclass(frozen=True)
class LinearDegeneracyReport:
    degenerate: bool
    max_violation: float
    worst_point: Optional[tuple] = None
    worst_index: Optional[int] = None

    def __bool__(self):
        return self.degenerate


def semi_hamiltonian_residual(fam: SpeedFamily, flow: int, theta, k: int, l: int, s: int) -> float:
    """``d_s(d_l mu^k/(mu^l - mu^k)) - d_l(d_s mu^k/(mu^s - mu^k))``.

    Expanded by the quotient rule, so first and second partials of the flow
    are needed (analytic when attached, finite differences otherwise).
    """
    x = as_point(theta)
    if fam.n < 3:
        raise ConditionVacuousError("the semi-Hamiltonian condition needs N >= 3")
    if len({k, l, s}) != 3:
        raise ValueError("indices k, l, s must be pairwise distinct")
    f = fam.flows[flow]
    mu = f(x)
    jac = f.jacobian(x)
    hes = f.hessian(x)

    def term(a, b):
        # d_b (d_a mu^k / (mu^a - mu^k))
        gap = mu[a] - mu[k]
        if abs(gap) <= pole_gap(x):
            if jac[k, a] == 0.0 and hes[k, a, b] == 0.0:
                return 0.0
            raise PoleError(f"coincident speeds {k}, {a} at theta={tuple(x)}")
        return hes[k, a, b] / gap - jac[k, a] * (jac[a, b] - jac[k, b]) / (gap * gap)

    return float(term(l, s) - term(s, l))


def symmetry_residual(fam: SpeedFamily, flow: int, sym, theta, k: int, l: int) -> float:
    """``d_l lam^k (mu^l - mu^k) - d_l mu^k (lam^l - lam^k)``."""
    x = as_point(theta)
    if k == l:
        raise ValueError("symmetry_residual needs k != l")
    mu = fam.speeds(flow, x)
    jmu = fam.jacobian(flow, x)
    gap = mu[l] - mu[k]
    if abs(gap) <= pole_gap(x) and jmu[k, l] != 0.0:
        raise PoleError(f"coincident speeds {k}, {l} at theta={tuple(x)}")
    lam = np.asarray(sym(x), dtype=float)
    jlam = np.asarray(sym.jacobian(x), dtype=float)
    return float(jlam[k, l] * gap - jmu[k, l] * (lam[l] - lam[k]))


def conservation_residual(fam: SpeedFamily, flow: int, S, theta, i: int, j: int) -> float:
    """``(mu^i - mu^j) d_i d_j S - d_i mu^j d_j S + d_j mu^i d_i S``."""
    x = as_point(theta)
    if i == j:
        raise ValueError("conservation_residual needs i != j")
    if not isinstance(S, ScalarField):
        S = ScalarField(S)
    mu = fam.speeds(flow, x)
    jmu = fam.jacobian(flow, x)
    g = S.gradient(x)
    h = S.hessian(x)
    return float((mu[i] - mu[j]) * h[i, j] - jmu[j, i] * g[j] + jmu[i, j] * g[i])


def lax_speed(S, Lambda, theta, k: int, eps: float = 1e-300) -> float:
    """Characteristic speed ``-d_k Lambda / d_k S`` of the flow conjugate to Lambda."""
    x = as_point(theta)
    if not isinstance(S, ScalarField):
        S = ScalarField(S)
    if not isinstance(Lambda, ScalarField):
        Lambda = ScalarField(Lambda)
    ds = S.partial(x, k)
    if abs(ds) <= eps:
        raise DegenerateEntropyError(f"d_{k} S vanishes at theta={tuple(x)}")
    return -Lambda.partial(x, k) / ds


def is_linearly_degenerate(fam: SpeedFamily, flow: int, samples, tol: float = 1e-9) -> LinearDegeneracyReport:
    """Check ``d_k mu^k == 0`` for every k over the sample points."""
    pts = [as_point(p) for p in samples]
    if not pts:
        raise ValueError("need at least one sample point")
    worst = (-1.0, None, None)
    for p in pts:
        diag = np.abs(np.diag(fam.jacobian(flow, p)))
        k = int(np.argmax(diag))
        if diag[k] > worst[0]:
            worst = (float(diag[k]), tuple(p), k)
    return LinearDegeneracyReport(worst[0] <= tol, worst[0], worst[1], worst[2])


def wnl_speed(theta, k: int, j: int) -> float:
    """``e_j`` of theta with entry k removed (residue of the generating product)."""
    x = as_point(theta)
    n = x.size
    if not 0 <= j <= n - 1:
        raise IndexError(f"flow index {j} outside 0..{n - 1}")
    if not 0 <= k < n:
        raise IndexError(f"phase index {k} out of range for N={n}")
    return kernels.esp_excluding(x, k)[j]


def wnl_matrix(theta) -> np.ndarray:
    """Matrix whose row j holds the speeds of the j-th weakly nonlinear flow."""
    return np.array(kernels.wnl_matrix(as_point(theta)))


def _wnl_row_hessian(x, j):
    n = x.size
    hes = np.zeros((n, n, n))
    if j < 2:
        return hes
    for k, l, s in itertools.permutations(range(n), 3):
        rest = [x[m] for m in range(n) if m not in (k, l, s)]
        hes[k, l, s] = kernels.esp(rest)[j - 2]
    return hes


def _wnl_row_jacobian(x, j):
    n = x.size
    jac = np.zeros((n, n))
    if j == 0:
        return jac
    for k in range(n):
        for l in range(n):
            if l != k:
                rest = [x[m] for m in range(n) if m != k and m != l]
                jac[k, l] = kernels.esp(rest)[j - 1]
    return jac


def wnl_flow(n: int, j: int) -> VectorField:
    if not 0 <= j <= n - 1:
        raise IndexError(f"flow index {j} outside 0..{n - 1}")
    if j == 0:
        return VectorField.ones(n)

    def speeds(x):
        return np.array([kernels.esp_excluding(x, k)[j] for k in range(n)])

    return VectorField(speeds, lambda x: _wnl_row_jacobian(x, j), lambda x: _wnl_row_hessian(x, j))


def wnl_basis(n: int) -> SpeedFamily:
    """The N linearly degenerate flows; row 1 is ``mu^k = sum(theta) - theta^k``."""
    return SpeedFamily(n, tuple(wnl_flow(n, j) for j in range(n)))


def tsallis_family(n: int, q: float) -> SpeedFamily:
    """Unit flow plus the flow generated by S_q (conjugate to tau_q)."""
    return SpeedFamily.with_unit_flow(n, TsallisEntropy(q).speeds())


def _call_phi(phi, x):
    x = np.asarray(x, dtype=float)
    try:
        v = np.asarray(phi(x), dtype=float)
    except Exception:
        v = np.array([phi(float(t)) for t in np.ravel(x)], dtype=float).reshape(x.shape)
    if v.shape != x.shape:
        v = np.broadcast_to(v, x.shape)
    return v


class GeneralSymmetry:
    """Symmetry ``lam^k = sum_j c_j(theta) mu_(j)^k`` of the weakly nonlinear family.

    ``c_j(theta) = sum_i int_{base_i}^{theta_i} W(j, i) / W(N-1, i) phi_i dx``
    where W(j, i) are signed cofactors of the wnl matrix and each integral
    runs along coordinate i with the other coordinates held at theta.
    Instances are immutable; evaluation is deterministic for fixed tolerances.
    """

    analytic = True

    def __init__(self, n: int, phi: Sequence[Callable], base, quad_tol: float = 1e-13):
        if len(phi) != n:
            raise ValueError(f"need {n} functions phi_i, got {len(phi)}")
        self.n = n
        self.phi = tuple(phi)
        self.base = as_point(base)
        if self.base.size != n:
            raise ValueError("base point has the wrong dimension")
        self.quad_tol = quad_tol
        self._coeffs = lru_cache(maxsize=256)(self._coefficients)

    def ratios(self, theta, i: int, nodes) -> np.ndarray:
        """Cofactor ratios ``W(j, i)/W(N-1, i)`` at theta with theta_i replaced by each node."""
        x = as_point(theta)
        try:
            return kernels.wnl_cofactor_ratios(x, i, np.atleast_1d(nodes), 1e-13)
        except ZeroDivisionError:
            raise CofactorSingularityError(
                f"cofactor W({self.n - 1},{i}) vanishes on the path at theta={tuple(x)}") from None

    def _coefficients(self, key):
        x = np.array(key)
        c = np.zeros(self.n)
        for i in range(self.n):
            phi_i = self.phi[i]

            def integrand(nodes, i=i, phi_i=phi_i):
                return self.ratios(x, i, nodes) * _call_phi(phi_i, nodes)[:, None]

            c += quadrature(integrand, self.base[i], x[i], tol=self.quad_tol, vectorized=True)
        return c

    def coefficients(self, theta) -> np.ndarray:
        return self._coeffs(tuple(as_point(theta).tolist())).copy()

    def eval(self, theta) -> np.ndarray:
        x = as_point(theta)
        return self.coefficients(x) @ wnl_matrix(x)

    __call__ = eval

    def jac(self, theta) -> np.ndarray:
        x = as_point(theta)
        n = self.n
        c = self.coefficients(x)
        w = wnl_matrix(x)
        # d_l c_j = ratio_{j,l}(theta) * phi_l(theta_l)
        dc = np.empty((n, n))
        for l in range(n):
            r = self.ratios(x, l, [x[l]])[0]
            dc[:, l] = r * float(_call_phi(self.phi[l], np.array([x[l]]))[0])
        out = w.T @ dc
        for j in range(1, n):
            out += c[j] * _wnl_row_jacobian(x, j)
        return out

    jacobian = jac

    def hessian(self, theta) -> np.ndarray:
        """``H[k, l, s] = d_l d_s lam^k`` by differencing the analytic Jacobian."""
        return VectorField(self.eval, self.jac).hessian(theta)

    def ratio_drift(self, theta) -> float:
        """Largest partial of any cofactor ratio in a variable other than its own."""
        x = as_point(theta)
        worst = 0.0
        for i in range(self.n):
            jac = fd_jacobian(lambda y, i=i: self.ratios(y, i, [y[i]])[0], x)
            jac[:, i] = 0.0
            worst = max(worst, float(np.max(np.abs(jac))))
        return worst


def default_check_points(base, count: int = 3, seed: int = 0, min_gap: float = 0.05):
    """Deterministic sample points around ``base`` with well separated coordinates."""
    base = as_point(base)
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        p = base + rng.uniform(-1.0, 1.0, base.size)
        d = np.abs(p[:, None] - p[None, :]) + np.eye(p.size) * 1e9
        if d.min() >= min_gap:
            pts.append(p)
    return pts


def build_general_symmetry(n: int, phi: Sequence[Callable], base, check_points=None,
                           quad_tol: float = 1e-13, ratio_tol: float = 1e-6,
                           residual_tol: float = 1e-8) -> GeneralSymmetry:
    """Construct the symmetry generated by ``phi`` and verify it before returning.

    Raises
    ------
    PathDependenceError
        If a cofactor ratio depends on variables other than its own, or the
        result fails the symmetry test against the wnl row-1 flow.
    CofactorSingularityError
        If a denominator cofactor vanishes on an integration path.
    """
    sym = GeneralSymmetry(n, phi, base, quad_tol=quad_tol)
    if check_points is None:
        check_points = default_check_points(sym.base)
    fam = wnl_basis(n)
    for p in check_points:
        drift = sym.ratio_drift(p)
        if drift > ratio_tol:
            raise PathDependenceError(
                f"cofactor ratio depends on foreign variables at {tuple(p)} (|d| = {drift:.3g})")
        if n < 2:
            continue
        for k, l in itertools.permutations(range(n), 2):
            try:
                r = symmetry_residual(fam, 1, sym, p, k, l)
            except PoleError:
                continue
            if abs(r) > residual_tol:
                raise PathDependenceError(
                    f"constructed field is not a symmetry at {tuple(p)}: residual {r:.3g}")
    return sym
