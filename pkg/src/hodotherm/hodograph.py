"""Implicit multi-phase equations of state ``T + sum_i mu_(i)^k tau^i = lam^k``.

Systems are duck-typed: anything with ``n``, ``analytic``, ``residual(theta,
coords)`` and ``jacobian(theta, coords)`` can be solved, swept and checked.
:class:`PhaseSystem` is the hodograph form; the one-phase module adds others.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BadSeedError, MixedBranchError, PathDependenceError, PoleError
from .hydro import SpeedFamily, default_check_points, symmetry_residual
from .numcore import as_point

MAX_ITER = 50
MAX_HALVINGS = 30
ARMIJO_C = 1e-4
SINGULAR_TOL = 1e-14
SINGULAR_RETRIES = 3


@dataclass(frozen=True)
class ThermoCoordinates:
    """Temperature plus the conjugate variables tau^1..tau^M."""

    T: float
    tau: tuple = ()

    def __post_init__(self):
        tau = tuple(float(t) for t in np.atleast_1d(self.tau)) if np.ndim(self.tau) else (float(self.tau),)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "tau", tau)
        if not all(math.isfinite(v) for v in (self.T,) + self.tau):
            raise ValueError("thermodynamic coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array((self.T,) + self.tau)

    @classmethod
    def from_array(cls, values) -> "ThermoCoordinates":
        v = np.asarray(values, dtype=float)
        return cls(v[0], tuple(v[1:]))


class PhaseSystem:
    """Speeds of M commuting flows plus a symmetry; the data of the hodograph form.

    On construction the symmetry is checked against every flow at sample
    points (``check_points``; random points in [-1, 1]^N by default).
    """

    def __init__(self, speeds: SpeedFamily, symmetry, check: bool = True,
                 check_points=None, check_tol: float = 1e-6):
        self.speeds = speeds
        self.symmetry = symmetry
        if check and speeds.n >= 2:
            pts = check_points if check_points is not None else default_check_points(np.zeros(speeds.n))
            for p in pts:
                for i in range(1, speeds.m + 1):
                    for k, l in itertools.permutations(range(speeds.n), 2):
                        try:
                            r = symmetry_residual(speeds, i, symmetry, p, k, l)
                        except PoleError:
                            continue
                        if abs(r) > check_tol:
                            raise PathDependenceError(
                                f"symmetry does not commute with flow {i} at {tuple(p)} "
                                f"(residual {r:.3g})")

    @property
    def n(self) -> int:
        return self.speeds.n

    @property
    def m(self) -> int:
        return self.speeds.m

    @property
    def analytic(self) -> bool:
        return self.speeds.analytic and getattr(self.symmetry, "analytic", False)

    def _tau(self, coords):
        tau = np.asarray(coords.tau, dtype=float)
        if tau.size != self.m:
            raise ValueError(f"system has {self.m} conjugate variables, got {tau.size}")
        return tau

    def residual(self, theta, coords: ThermoCoordinates) -> np.ndarray:
        x = as_point(theta)
        tau = self._tau(coords)
        out = np.full(self.n, coords.T)
        for i in range(1, self.m + 1):
            if tau[i - 1] != 0.0:
                out = out + tau[i - 1] * self.speeds.speeds(i, x)
        return out - np.asarray(self.symmetry(x), dtype=float)

    def jacobian(self, theta, coords: ThermoCoordinates) -> np.ndarray:
        x = as_point(theta)
        tau = self._tau(coords)
        out = -np.asarray(self.symmetry.jacobian(x), dtype=float)
        for i in range(1, self.m + 1):
            if tau[i - 1] != 0.0:
                out = out + tau[i - 1] * self.speeds.jacobian(i, x)
        return out

    def flow_speeds(self, flow: int, theta) -> np.ndarray:
        return self.speeds.speeds(flow, theta)


def state_residual(system, theta, coords: ThermoCoordinates) -> np.ndarray:
    """Residual vector of the equation of state; zero exactly at a solution."""
    return np.asarray(system.residual(as_point(theta), coords), dtype=float)


@dataclass(frozen=True)
class NewtonResult:
    theta: np.ndarray
    residual: float
    status: str
    iterations: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _safe_residual(system, x, coords):
    try:
        r = np.asarray(system.residual(x, coords), dtype=float)
    except (ValueError, ArithmeticError):
        return None
    return r if np.all(np.isfinite(r)) else None


def _nearly_singular(jac) -> bool:
    # |det| against the Hadamard bound: a cheap scale-free singularity test
    bound = float(np.prod(np.linalg.norm(jac, axis=1)))
    return bound == 0.0 or abs(np.linalg.det(jac)) <= SINGULAR_TOL * bound


def newton(system, coords: ThermoCoordinates, x0, tol: float = 1e-10,
           max_iter: int = MAX_ITER, max_halvings: int = MAX_HALVINGS) -> NewtonResult:
    """Damped Newton with Armijo backtracking on ``|F|^2``.

    A singular Jacobian is retried with a least-squares step; after
    ``SINGULAR_RETRIES`` such steps the run stops with status
    ``"singular-jacobian"``.
    """
    x = as_point(x0)
    f = _safe_residual(system, x, coords)
    if f is None:
        return NewtonResult(x, math.inf, "domain", 0)
    singular = 0
    for it in range(max_iter + 1):
        norm = float(np.max(np.abs(f)))
        if norm <= tol:
            return NewtonResult(x, norm, "converged", it)
        if it == max_iter:
            break
        jac = np.asarray(system.jacobian(x, coords), dtype=float)
        if not np.all(np.isfinite(jac)):
            return NewtonResult(x, norm, "diverged", it)
        try:
            if _nearly_singular(jac):
                raise np.linalg.LinAlgError
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            singular += 1
            if singular > SINGULAR_RETRIES:
                return NewtonResult(x, norm, "singular-jacobian", it)
            step = np.linalg.lstsq(jac, -f, rcond=None)[0]
            if not np.any(step):
                return NewtonResult(x, norm, "singular-jacobian", it)
        phi = 0.5 * float(f @ f)
        t = 1.0
        for _ in range(max_halvings + 1):
            xt = x + t * step
            ft = _safe_residual(system, xt, coords)
            if ft is not None and 0.5 * float(ft @ ft) <= (1.0 - 2.0 * ARMIJO_C * t) * phi:
                break
            t *= 0.5
        else:
            return NewtonResult(x, norm, "line-search", it)
        x, f = xt, ft
        if not np.all(np.isfinite(x)):
            return NewtonResult(x, math.inf, "diverged", it)
    return NewtonResult(x, float(np.max(np.abs(f))), "max-iter", max_iter)


def seed_grid(box, n: Optional[int] = None, per_axis: int = 5) -> list:
    """Uniform lattice of ``per_axis**N`` seeds over ``box``.

    ``box`` is a sequence of (lo, hi) pairs, or a single pair used for all
    ``n`` axes.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        if n is None:
            raise ValueError("give n when box is a single (lo, hi) pair")
        box = np.tile(box, (n, 1))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    return [np.array(p) for p in itertools.product(*axes)]


def box_diagonal(box, n: Optional[int] = None) -> float:
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = np.tile(box, (n or 1, 1))
    return float(np.linalg.norm(box[:, 1] - box[:, 0]))


@dataclass(frozen=True)
class SeedFailure:
    seed: tuple
    status: str
    point: tuple
    residual: float


@dataclass
class RootSet:
    """Deduplicated roots (sorted lexicographically) plus per-seed failures."""

    roots: list
    residuals: list
    failures: list = field(default_factory=list)
    jacobian: str = "analytic"

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)


def solve_state(system, coords: ThermoCoordinates, seeds=None, tol: float = 1e-10,
                box=None, dedupe_radius: Optional[float] = None, per_axis: int = 5) -> RootSet:
    """Damped Newton from every seed; converged points are deduplicated.

    Seeds default to a ``per_axis**N`` lattice over ``box``. The dedupe
    radius defaults to ``1e-6`` times the box diagonal (or the seeds'
    bounding-box diagonal when no box is given). Divergence is reported in
    ``failures``, never raised.
    """
    if seeds is None:
        if box is None:
            raise ValueError("give seeds or a box")
        seeds = seed_grid(box, system.n, per_axis)
    seeds = [as_point(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    if dedupe_radius is None:
        if box is not None:
            diag = box_diagonal(box, system.n)
        else:
            pts = np.array(seeds)
            diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        dedupe_radius = 1e-6 * (diag if diag > 0 else 1.0)
    found = []
    failures = []
    for s in seeds:
        res = newton(system, coords, s, tol)
        if res.converged:
            found.append(res)
        else:
            failures.append(SeedFailure(tuple(s), res.status, tuple(res.theta), res.residual))
    kept = []
    for res in sorted(found, key=lambda r: r.residual):
        if all(np.linalg.norm(res.theta - k.theta) > dedupe_radius for k in kept):
            kept.append(res)
    kept.sort(key=lambda r: tuple(r.theta))
    return RootSet([k.theta for k in kept], [k.residual for k in kept], failures,
                   "analytic" if system.analytic else "fd")


@dataclass
class SolutionBranch:
    """Solutions at the path nodes reached, in order.

    ``points`` holds ``(coords, theta, residual)`` triples. A branch that
    stops early carries ``end_reason == "turning-point"`` and the last
    accepted continuation state in ``turning_point``.
    """

    points: list
    label: str = "branch"
    end_reason: str = "complete"
    turning_point: Optional[tuple] = None
    jacobian: str = "analytic"

    @property
    def thetas(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def coords(self) -> list:
        return [p[0] for p in self.points]


def _jac_sign(system, x, coords):
    d = np.linalg.det(np.asarray(system.jacobian(x, coords), dtype=float))
    return 0 if d == 0 or not np.isfinite(d) else (1 if d > 0 else -1)


def sweep(system, path: Sequence[ThermoCoordinates], initial, tol: float = 1e-10,
          max_step: Optional[float] = None, min_step: float = 1e-10,
          label: str = "branch") -> SolutionBranch:
    """Follow a root along ``path`` by secant-predictor / Newton-corrector continuation.

    Each path segment is traversed in sub-steps; a sub-step is rejected when
    Newton fails, the root moves by more than ``max_step`` (infinity norm),
    or the sign of the Jacobian determinant changes. Rejected sub-steps are
    halved; below ``min_step`` (fraction of a segment) the branch ends at a
    turning point.
    """
    path = list(path)
    if not path:
        raise ValueError("empty path")
    x = as_point(initial)
    r0 = _safe_residual(system, x, path[0])
    if r0 is None or float(np.max(np.abs(r0))) > tol:
        raise BadSeedError(f"initial point {tuple(x)} does not solve the state at {path[0]}")
    if max_step is None:
        max_step = 0.25 * max(1.0, float(np.max(np.abs(x))))
    jac_kind = "analytic" if system.analytic else "fd"
    branch = SolutionBranch([(path[0], x.copy(), float(np.max(np.abs(r0))))], label,
                            jacobian=jac_kind)
    sign = _jac_sign(system, x, path[0])
    t_cur, x_cur = 0.0, x
    t_prev, x_prev = None, None
    for m in range(len(path) - 1):
        a = path[m].as_array()
        b = path[m + 1].as_array()
        s, h = 0.0, 1.0
        while s < 1.0:
            h = min(h, 1.0 - s)
            s_new = 1.0 if s + h >= 1.0 else s + h
            t_new = m + s_new
            coords = ThermoCoordinates.from_array(a + s_new * (b - a))
            if x_prev is not None:
                pred = x_cur + (x_cur - x_prev) * ((t_new - t_cur) / (t_cur - t_prev))
            else:
                pred = x_cur
            res = newton(system, coords, pred, tol)
            ok = res.converged and float(np.max(np.abs(res.theta - x_cur))) <= max_step
            if ok:
                new_sign = _jac_sign(system, res.theta, coords)
                ok = new_sign == sign and new_sign != 0
            if ok:
                t_prev, x_prev = t_cur, x_cur
                t_cur, x_cur = t_new, res.theta
                s = s_new
                h = min(2.0 * h, 1.0)
            else:
                h *= 0.5
                if h < min_step:
                    here = ThermoCoordinates.from_array(a + s * (b - a))
                    branch.end_reason = "turning-point"
                    branch.turning_point = (here, x_cur.copy())
                    return branch
        branch.points.append((path[m + 1], x_cur.copy(), res.residual))
    return branch


def linear_path(start: ThermoCoordinates, stop: ThermoCoordinates, num: int) -> list:
    a, b = start.as_array(), stop.as_array()
    return [ThermoCoordinates.from_array(a + (b - a) * t) for t in np.linspace(0.0, 1.0, num)]


@dataclass
class SolutionGrid:
    """Solutions on a rectangular (T, tau^flow) grid; other tau fixed at ``base``."""

    T: np.ndarray
    tau: np.ndarray
    theta: np.ndarray  # shape (len(T), len(tau), N)
    flow: int = 1
    base: tuple = ()

    def coords(self, a: int, b: int) -> ThermoCoordinates:
        tau = list(self.base)
        tau[self.flow - 1] = self.tau[b]
        return ThermoCoordinates(self.T[a], tuple(tau))


def solve_grid(system, T_values, tau_values, seed, flow: int = 1, base=None,
               tol: float = 1e-12) -> SolutionGrid:
    """Fill a grid by continuation outward from the centre node.

    ``seed`` should lie near the root at the centre node; neighbours are
    seeded by linear extrapolation from already solved nodes.
    """
    T_values = np.asarray(T_values, dtype=float)
    tau_values = np.asarray(tau_values, dtype=float)
    base = tuple(base) if base is not None else (0.0,) * system.m
    grid = SolutionGrid(T_values, tau_values,
                        np.full((T_values.size, tau_values.size, system.n), np.nan), flow, base)
    ca, cb = T_values.size // 2, tau_values.size // 2

    def solve_at(a, b, guess):
        res = newton(system, grid.coords(a, b), guess, tol)
        if not res.converged:
            raise MixedBranchError(f"continuation lost the branch at grid node ({a}, {b})")
        grid.theta[a, b] = res.theta

    solve_at(ca, cb, as_point(seed))

    def walk(line, fixed_axis_index, indices, along):
        prev2 = None
        prev = line(indices[0])
        for idx in indices[1:]:
            guess = prev if prev2 is None else 2 * prev - prev2
            along(idx, guess)
            prev2, prev = prev, line(idx)

    row = lambda b: grid.theta[ca, b]  # noqa: E731
    walk(row, None, list(range(cb, tau_values.size)), lambda b, g: solve_at(ca, b, g))
    walk(row, None, list(range(cb, -1, -1)), lambda b, g: solve_at(ca, b, g))
    for b in range(tau_values.size):
        col = lambda a, b=b: grid.theta[a, b]  # noqa: E731
        walk(col, None, list(range(ca, T_values.size)), lambda a, g, b=b: solve_at(a, b, g))
        walk(col, None, list(range(ca, -1, -1)), lambda a, g, b=b: solve_at(a, b, g))
    return grid


def _check_single_branch(theta, spike: float = 20.0):
    scale = 1e-9 * (1.0 + float(np.nanmax(np.abs(theta))))
    if not np.all(np.isfinite(theta)):
        raise MixedBranchError("grid contains unsolved nodes")
    for axis in (0, 1):
        d = np.abs(np.diff(theta, axis=axis))
        if d.shape[axis] < 3:
            continue
        mid = np.take(d, range(1, d.shape[axis] - 1), axis=axis)
        lo = np.take(d, range(0, d.shape[axis] - 2), axis=axis)
        hi = np.take(d, range(2, d.shape[axis]), axis=axis)
        if np.any(mid > spike * np.maximum(lo, hi) + scale):
            raise MixedBranchError("discontinuity between neighbouring grid nodes")


def grid_residual(grid: SolutionGrid, speeds) -> np.ndarray:
    """``|d theta/d tau - mu * d theta/d T|`` by central differences at interior nodes.

    ``speeds(theta)`` returns the N speeds of the flow. Output has shape
    ``(len(T) - 2, len(tau) - 2)`` (max over components).
    """
    th = grid.theta
    _check_single_branch(th)
    dT = np.diff(grid.T)
    dtau = np.diff(grid.tau)
    if not (np.allclose(dT, dT[0]) and np.allclose(dtau, dtau[0])):
        raise ValueError("grid must be uniformly spaced")
    hT, htau = dT[0], dtau[0]
    d_T = (th[2:, 1:-1] - th[:-2, 1:-1]) / (2 * hT)
    d_tau = (th[1:-1, 2:] - th[1:-1, :-2]) / (2 * htau)
    inner = th[1:-1, 1:-1]
    mu = np.apply_along_axis(lambda v: np.asarray(speeds(v), dtype=float), -1, inner)
    return np.max(np.abs(d_tau - mu * d_T), axis=-1)


@dataclass(frozen=True)
class PdeCheckReport:
    max_residual: float
    residuals: tuple
    spacings: tuple
    orders: tuple

    @property
    def order(self) -> Optional[float]:
        return self.orders[-1] if self.orders else None


def _common_mask(grid, ref_T, ref_tau):
    T = grid.T[1:-1]
    tau = grid.tau[1:-1]
    tolT = 1e-9 * max(1.0, float(np.max(np.abs(grid.T))))
    toltau = 1e-9 * max(1.0, float(np.max(np.abs(grid.tau))))
    mT = np.array([np.any(np.abs(ref_T - t) <= tolT) for t in T])
    mtau = np.array([np.any(np.abs(ref_tau - t) <= toltau) for t in tau])
    return np.outer(mT, mtau)


def pde_check(system, grids: Sequence[SolutionGrid], flow: Optional[int] = None) -> PdeCheckReport:
    """Verify that solved surfaces satisfy ``theta_tau = mu_(i) theta_T``.

    With several grids of decreasing spacing the empirical order is taken
    from the residuals at the physical nodes common to all grids.
    """
    grids = list(grids)
    if not grids:
        raise ValueError("need at least one grid")
    flow = grids[0].flow if flow is None else flow
    speeds = lambda v: system.flow_speeds(flow, v)  # noqa: E731
    res = [grid_residual(g, speeds) for g in grids]
    spacing = [float(g.T[1] - g.T[0]) for g in grids]
    orders = []
    if len(grids) > 1:
        common_T = grids[0].T[1:-1]
        common_tau = grids[0].tau[1:-1]
        for g in grids[1:]:
            keepT = [t for t in common_T if np.any(np.abs(g.T[1:-1] - t) <= 1e-9 * max(1, abs(t)))]
            keeptau = [t for t in common_tau if np.any(np.abs(g.tau[1:-1] - t) <= 1e-9 * max(1, abs(t)))]
            common_T, common_tau = np.array(keepT), np.array(keeptau)
        if common_T.size and common_tau.size:
            errs = [float(np.max(r[_common_mask(g, common_T, common_tau)])) for r, g in zip(res, grids)]
        else:
            errs = [float(np.max(r)) for r in res]
        for e1, e2, h1, h2 in zip(errs, errs[1:], spacing, spacing[1:]):
            orders.append(math.log(e1 / e2) / math.log(h1 / h2) if e1 > 0 and e2 > 0 else math.nan)
    return PdeCheckReport(float(np.max(res[-1])), tuple(float(np.max(r)) for r in res),
                          tuple(spacing), tuple(orders))
