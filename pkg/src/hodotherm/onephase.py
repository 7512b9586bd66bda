"""One-phase equations of state ``T - alpha(L) tau - f(L) = 0``.

Includes the van der Waals gas, the effective molecular field model with the
Brillouin function, root enumeration along isotherms, and reconstruction of
``alpha`` and ``f`` from two tabulated isotherms.
"""

from __future__ import annotations

import io
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq, minimize_scalar

from . import kernels
from ._kernels_py import _LANGEVIN_SERIES, _LANGEVIN_SWITCH
from .errors import (
    ClampWarning,
    DegenerateIsothermsError,
    DomainError,
    EdgeRootWarning,
    IsothermParseError,
    RootOverflowError,
    SingularNodeError,
)
from .hodograph import PdeCheckReport, PhaseSystem, ThermoCoordinates, pde_check
from .hydro import SpeedFamily
from .numcore import VectorField, as_point, fd_partial, fd_second

SCAN_CELLS = 2048
TANGENT_TOL = 1e-13
EPS = float(np.finfo(float).eps)


def _vectorize(fn):
    def call(x):
        x = np.asarray(x, dtype=float)
        try:
            v = np.asarray(fn(x), dtype=float)
            return np.broadcast_to(v, x.shape) if v.shape != x.shape else v
        except (TypeError, ValueError):
            return np.array([fn(float(t)) for t in x.ravel()]).reshape(x.shape)
    return call


@dataclass(frozen=True)
class OnePhaseEOS:
    """State surface ``T - alpha(L) tau - f(L) = 0`` for one state function L."""

    alpha: Callable
    f: Callable
    dalpha: Optional[Callable] = None
    df: Optional[Callable] = None
    lambda_label: str = "lambda"
    tau_label: str = "tau"
    entropy_prime: Optional[Callable] = None

    @classmethod
    def from_entropy(cls, entropy_prime: Callable, f: Callable, **kw) -> "OnePhaseEOS":
        """Separable entropy with derivative ``S~'(L)``: alpha is ``1 / S~'(L)``."""
        return cls(lambda x: 1.0 / entropy_prime(x), f, entropy_prime=entropy_prime, **kw)

    def residual(self, lam, T, tau):
        lam = np.asarray(lam, dtype=float)
        out = T - _vectorize(self.alpha)(lam) * tau - _vectorize(self.f)(lam)
        return float(out) if out.ndim == 0 else out

    def isotherm(self, lam, T):
        """Conjugate variable along the isotherm at temperature T."""
        lam = np.asarray(lam, dtype=float)
        out = (T - _vectorize(self.f)(lam)) / _vectorize(self.alpha)(lam)
        return float(out) if out.ndim == 0 else out

    def _d(self, fn, dfn, x):
        if dfn is not None:
            return float(dfn(x))
        return fd_partial(lambda v: float(fn(v[0])), [x], 0)

    def as_system(self) -> PhaseSystem:
        """The same surface as a one-phase hodograph system (speed -alpha, symmetry f)."""
        speed = VectorField(lambda x: np.array([-float(self.alpha(x[0]))]),
                            lambda x: np.array([[-self._d(self.alpha, self.dalpha, x[0])]]))
        sym = VectorField(lambda x: np.array([float(self.f(x[0]))]),
                          lambda x: np.array([[self._d(self.f, self.df, x[0])]]))
        system = PhaseSystem(SpeedFamily.with_unit_flow(1, speed), sym, check=False)
        return system


# --- van der Waals -----------------------------------------------------------

@dataclass(frozen=True)
class VdwParams:
    n: float = 1.0
    a: float = 3.0
    b: float = 1.0 / 3.0
    R: float = 8.0 / 3.0

    def __post_init__(self):
        if not (self.n > 0 and self.R > 0 and self.b >= 0 and self.a >= 0):
            raise ValueError("van der Waals parameters need n, R > 0 and a, b >= 0")

    @property
    def critical(self) -> tuple:
        """Closed-form (V_c, T_c, P_c); requires a, b > 0."""
        return (3 * self.n * self.b, 8 * self.a / (27 * self.R * self.b), self.a / (27 * self.b ** 2))

    def pressure(self, V, T):
        V = np.asarray(V, dtype=float)
        return self.n * self.R * T / (V - self.n * self.b) - self.a * self.n ** 2 / V ** 2


def vdw_eos(p: VdwParams) -> OnePhaseEOS:
    """alpha(V) = (V - nb)/(nR), f(V) = (na/R)/V - (a n^2 b/R)/V^2."""
    nb = p.n * p.b

    def domain(V):
        V = np.asarray(V, dtype=float)
        if np.any(V <= nb):
            raise DomainError(f"van der Waals volume must exceed nb = {nb!r}")
        return V

    def alpha(V):
        return (domain(V) - nb) / (p.n * p.R)

    def f(V):
        V = domain(V)
        return (p.n * p.a / p.R) / V - (p.a * p.n ** 2 * p.b / p.R) / V ** 2

    def dalpha(V):
        domain(V)
        return 1.0 / (p.n * p.R)

    def df(V):
        V = domain(V)
        return -(p.n * p.a / p.R) / V ** 2 + 2 * (p.a * p.n ** 2 * p.b / p.R) / V ** 3

    return OnePhaseEOS(alpha, f, dalpha, df, "V", "P")


def critical_point(eos: OnePhaseEOS, bracket, cells: int = 256) -> tuple:
    """Inflection point of the isotherms, where dP/dV = d2P/dV2 = 0.

    Along an isotherm ``P = T u(V) - w(V)`` with ``u = 1/alpha`` and
    ``w = f/alpha``. The first condition fixes ``T*(V) = w'/u'``; the second
    is then a scalar root in V, found by scan and bisection inside
    ``bracket``. Derivatives are finite differences. Returns (V_c, T_c, P_c).
    """
    u = lambda v: 1.0 / float(eos.alpha(v[0]))  # noqa: E731
    w = lambda v: float(eos.f(v[0])) / float(eos.alpha(v[0]))  # noqa: E731

    def t_star(V):
        return fd_partial(w, [V], 0) / fd_partial(u, [V], 0)

    def inflection(V):
        return t_star(V) * fd_second(u, [V], 0, 0) - fd_second(w, [V], 0, 0)

    roots = scan_roots(lambda V: np.vectorize(inflection)(V), bracket, max_roots=4, cells=cells)
    if not roots:
        raise ArithmeticError(f"no isotherm inflection in {bracket!r}")
    V = roots[0].value
    T = t_star(V)
    return float(V), float(T), float(eos.isotherm(V, T))


def spinodals(eos: OnePhaseEOS, T: float, bracket, cells: int = SCAN_CELLS) -> list:
    """Local extrema ``(V, P)`` of the isotherm ``P(V)`` inside ``bracket``."""
    lo, hi = bracket
    xs = np.linspace(lo, hi, cells + 1)
    dp = lambda v: fd_partial(lambda z: float(eos.isotherm(z[0], T)), [v], 0)  # noqa: E731
    d = np.array([dp(v) for v in xs])
    out = []
    for m in range(cells):
        if d[m] == 0.0 or d[m] * d[m + 1] < 0:
            v = xs[m] if d[m] == 0.0 else brentq(dp, xs[m], xs[m + 1], xtol=1e-14, rtol=1e-14)
            out.append((float(v), float(eos.isotherm(v, T))))
    return out


# --- root enumeration --------------------------------------------------------

class Root(NamedTuple):
    value: float
    residual: float
    tangential: bool = False


def _bisect(g, a, b, ga, rel=4.0 * EPS):
    for _ in range(400):
        m = 0.5 * (a + b)
        if abs(b - a) <= rel * max(abs(m), 1e-300) or m in (a, b):
            break
        gm = g(m)
        if gm == 0.0:
            return m
        if (gm < 0) == (ga < 0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


def scan_roots(g: Callable, bracket, max_roots: int = 16, cells: int = SCAN_CELLS) -> list:
    """All roots of a scalar function in ``bracket`` by dense scan plus bisection.

    Sign changes are bisected to float resolution (well inside the
    relative 1e-12 contract). At a local minimum of ``|g|`` without sign
    change the signed residual is minimised over the two adjacent cells: a
    dip through zero yields two roots, a touch within 1e-13 one root with
    ``tangential=True``.
    """
    lo, hi = (float(v) for v in bracket)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid bracket {bracket!r}")
    xs = np.linspace(lo, hi, cells + 1)
    gv = _vectorize(g)(xs)
    gs = lambda x: float(_vectorize(g)(np.array(x)))  # noqa: E731
    found = []
    for m in range(cells + 1):
        if gv[m] == 0.0:
            if not found or found[-1].value != xs[m]:
                found.append(Root(float(xs[m]), 0.0))
            continue
        if m < cells and gv[m + 1] != 0.0 and (gv[m] < 0) != (gv[m + 1] < 0):
            r = _bisect(gs, xs[m], xs[m + 1], gv[m])
            found.append(Root(r, abs(gs(r))))
        elif 0 < m < cells and abs(gv[m]) < abs(gv[m - 1]) and abs(gv[m]) < abs(gv[m + 1]) \
                and (gv[m - 1] < 0) == (gv[m] < 0) == (gv[m + 1] < 0):
            # minimise the signed residual: a dip through zero hides two roots
            sgn = 1.0 if gv[m] > 0 else -1.0
            opt = minimize_scalar(lambda x: sgn * gs(x), bounds=(xs[m - 1], xs[m + 1]),
                                  method="bounded", options={"xatol": 1e-14})
            x0, g0 = float(opt.x), sgn * float(opt.fun)
            if abs(g0) <= TANGENT_TOL:
                found.append(Root(x0, abs(g0), True))
            elif (g0 < 0) != (gv[m] < 0):
                for a, b, ga in ((xs[m - 1], x0, gv[m - 1]), (x0, xs[m + 1], g0)):
                    r = _bisect(gs, a, b, ga)
                    found.append(Root(r, abs(gs(r))))
        if len(found) > max_roots:
            raise RootOverflowError(f"more than {max_roots} roots in {bracket!r}")
    width = hi - lo
    for r in found:
        if min(r.value - lo, hi - r.value) <= 1e-9 * width:
            warnings.warn(f"root {r.value!r} at the bracket edge", EdgeRootWarning, stacklevel=3)
    return sorted(found)


def solve_onephase(eos: OnePhaseEOS, T: float, tau: float, bracket, max_roots: int = 16,
                   cells: int = SCAN_CELLS) -> list:
    """Roots of ``T - alpha(L) tau - f(L)`` in ``bracket``, ascending."""
    return scan_roots(lambda lam: eos.residual(lam, T, tau), bracket, max_roots, cells)


# --- Brillouin and the molecular field model ---------------------------------

def _check_spin(s):
    if s <= 0 or abs(2 * s - round(2 * s)) > 1e-12:
        raise ValueError(f"spin must be a positive multiple of 1/2, got {s!r}")


def brillouin(s: float, y):
    """B_s(y); odd in y with values in (-1, 1). Accepts scalars or arrays."""
    _check_spin(s)
    if np.ndim(y):
        return kernels.brillouin_array(float(s), y)
    return kernels.brillouin(float(s), float(y))


def _langevin_prime(x):
    ax = abs(x)
    if ax < _LANGEVIN_SWITCH:
        x2 = x * x
        acc = 0.0
        for n in range(len(_LANGEVIN_SERIES) - 1, -1, -1):
            acc = acc * x2 + (2 * n + 1) * _LANGEVIN_SERIES[n]
        return acc
    if ax > 350.0:
        return 1.0 / (x * x)
    return 1.0 / (x * x) - 1.0 / math.sinh(x) ** 2


def brillouin_prime(s: float, y: float) -> float:
    _check_spin(s)
    a = (2 * s + 1) / (2 * s)
    b = 1 / (2 * s)
    return a * a * _langevin_prime(a * y) - b * b * _langevin_prime(b * y)


@dataclass(frozen=True)
class MagnetParams:
    M0: float = 1.0
    mubar: float = 2.0
    kappa: float = 1.0
    s: float = 0.5
    lam: float = 0.0

    def __post_init__(self):
        if not (self.M0 > 0 and self.mubar > 0 and self.kappa > 0):
            raise ValueError("M0, mubar and kappa must be positive")
        _check_spin(self.s)
        if self.lam < 0:
            raise ValueError("interaction constant must be non-negative")

    @property
    def curie_temperature(self) -> float:
        """Temperature where the H = 0 solution M = 0 loses uniqueness."""
        return self.lam * self.M0 * self.mubar * (self.s + 1) / (3 * self.kappa)


def magnet_residual(p: MagnetParams, M, T: float, H: float):
    M = np.asarray(M, dtype=float)
    y = p.mubar * p.s / (p.kappa * T) * (H + p.lam * M)
    out = M - p.M0 * brillouin(p.s, y)
    return float(out) if np.ndim(out) == 0 else out


def halfspin_residual(p: MagnetParams, M, T: float, H: float):
    """``H - (2 kappa/mubar) artanh(M/M0) T + lam M`` (spin 1/2 hodograph form)."""
    M = np.asarray(M, dtype=float)
    out = H - 2 * p.kappa / p.mubar * np.arctanh(M / p.M0) * T + p.lam * M
    return float(out) if np.ndim(out) == 0 else out


def magnet_solve(p: MagnetParams, T: float, H: float, bracket=None, max_roots: int = 16,
                 cells: int = SCAN_CELLS) -> list:
    """Roots M of ``M = M0 B_s(mubar s (H + lam M)/(kappa T))``, ascending."""
    if T <= 0:
        raise DomainError("temperature must be positive")
    edge = p.M0 * (1 - 1e-12)
    if bracket is None:
        bracket = (-edge, edge)
    else:
        lo, hi = bracket
        if lo <= -p.M0 or hi >= p.M0:
            warnings.warn("bracket touches the saturation magnetisation; clamped", ClampWarning,
                          stacklevel=2)
            bracket = (max(lo, -edge), min(hi, edge))
    return scan_roots(lambda M: magnet_residual(p, M, T, H), bracket, max_roots, cells)


class MagnetSystem:
    """The molecular field equation as a one-phase state equation in (T, H)."""

    n = 1
    m = 1
    analytic = True

    def __init__(self, params: MagnetParams):
        self.params = params

    def residual(self, theta, coords: ThermoCoordinates) -> np.ndarray:
        return np.array([magnet_residual(self.params, as_point(theta)[0], coords.T, coords.tau[0])])

    def jacobian(self, theta, coords: ThermoCoordinates) -> np.ndarray:
        p = self.params
        c = p.mubar * p.s / (p.kappa * coords.T)
        y = c * (coords.tau[0] + p.lam * as_point(theta)[0])
        return np.array([[1.0 - p.M0 * brillouin_prime(p.s, y) * c * p.lam]])


def hopf_residual(eos: OnePhaseEOS, grids) -> PdeCheckReport:
    """Finite-difference check of ``L_tau + alpha(L) L_T = 0`` on sampled surfaces.

    ``grids`` holds one or more :class:`SolutionGrid` (N = 1) of decreasing
    spacing; the report carries the empirical order when several are given.
    """
    if not isinstance(grids, (list, tuple)):
        grids = [grids]
    return pde_check(eos.as_system(), grids, flow=1)


# --- isotherm tables and reconstruction --------------------------------------

@dataclass(frozen=True)
class IsothermTable:
    T: float
    lam: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        if lam.ndim != 1 or lam.shape != tau.shape:
            raise ValueError("lambda and tau columns must be 1-D and of equal length")
        if lam.size < 2:
            raise ValueError("an isotherm table needs at least 2 rows")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("lambda must be strictly increasing")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(tau)) and math.isfinite(self.T)):
            raise ValueError("isotherm table entries must be finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "T", float(self.T))

    def interpolator(self) -> PchipInterpolator:
        return PchipInterpolator(self.lam, self.tau, extrapolate=False)


_T_LINE = re.compile(r"^#\s*T\s*=\s*(\S+)\s*$")


def parse_isotherm_csv(text: str) -> IsothermTable:
    """Strict parser: ``# T=<value>`` line, ``lambda,tau`` header, numeric rows."""
    lines = [ln.strip() for ln in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if len(lines) < 2:
        raise IsothermParseError("isotherm file too short")
    m = _T_LINE.match(lines[0])
    if not m:
        raise IsothermParseError("first line must be '# T=<value>'")
    try:
        T = float(m.group(1))
    except ValueError:
        raise IsothermParseError(f"bad temperature {m.group(1)!r}") from None
    if lines[1].replace(" ", "") != "lambda,tau":
        raise IsothermParseError("second line must be the header 'lambda,tau'")
    lam, tau = [], []
    for no, ln in enumerate(lines[2:], start=3):
        parts = ln.split(",")
        if len(parts) != 2:
            raise IsothermParseError(f"line {no}: expected two comma-separated values")
        try:
            lam.append(float(parts[0]))
            tau.append(float(parts[1]))
        except ValueError:
            raise IsothermParseError(f"line {no}: non-numeric value") from None
    try:
        return IsothermTable(T, np.array(lam), np.array(tau))
    except ValueError as exc:
        raise IsothermParseError(str(exc)) from None


def read_isotherm_csv(path) -> IsothermTable:
    return parse_isotherm_csv(Path(path).read_text(encoding="utf-8"))


def format_isotherm_csv(table: IsothermTable) -> str:
    buf = io.StringIO()
    buf.write(f"# T={table.T!r}\nlambda,tau\n")
    for l, t in zip(table.lam, table.tau):
        buf.write(f"{float(l)!r},{float(t)!r}\n")
    return buf.getvalue()


def write_isotherm_csv(table: IsothermTable, path) -> None:
    Path(path).write_text(format_isotherm_csv(table), encoding="utf-8")


@dataclass(frozen=True)
class AlphaF:
    """Tabulated alpha(L) and f(L) recovered from two isotherms."""

    lam: np.ndarray
    alpha: np.ndarray
    f: np.ndarray

    def eos(self) -> OnePhaseEOS:
        """Cubic-spline interpolation of the tables (alpha and f need not be monotone)."""
        a = CubicSpline(self.lam, self.alpha, extrapolate=False)
        f = CubicSpline(self.lam, self.f, extrapolate=False)
        return OnePhaseEOS(a, f, a.derivative(), f.derivative())


def reconstruct_alpha_f(iso1: IsothermTable, iso2: IsothermTable, grid) -> AlphaF:
    """Pointwise solve of ``T_i = alpha tau_i(L) + f`` for i = 1, 2.

    The isotherms are interpolated with monotone piecewise cubics; grid
    points outside both tables are dropped with a warning.
    """
    if iso1.T == iso2.T:
        raise DegenerateIsothermsError("the two isotherms have the same temperature")
    grid = np.asarray(grid, dtype=float)
    lo = max(iso1.lam[0], iso2.lam[0])
    hi = min(iso1.lam[-1], iso2.lam[-1])
    inside = (grid >= lo) & (grid <= hi)
    if not inside.all():
        warnings.warn(f"{int((~inside).sum())} grid points outside the tables dropped",
                      ClampWarning, stacklevel=2)
        grid = grid[inside]
    if grid.size == 0:
        raise DegenerateIsothermsError("the isotherm tables do not overlap the grid")
    t1 = iso1.interpolator()(grid)
    t2 = iso2.interpolator()(grid)
    d = t1 - t2
    scale = np.maximum(np.abs(t1), np.abs(t2))
    bad = np.abs(d) <= 1e-12 * np.maximum(scale, 1e-300)
    if bad.any():
        raise SingularNodeError(grid[np.argmax(bad)])
    alpha = (iso1.T - iso2.T) / d
    f = iso1.T - alpha * t1
    return AlphaF(grid, alpha, f)
