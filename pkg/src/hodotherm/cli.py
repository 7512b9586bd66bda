"""Command-line front end.

Commands
--------
verify          integrability residuals of the configured system (JSON report)
solve           all roots of the state equation at one (T, tau)
sweep           continuation of every root along a straight path
reconstruct     alpha(L) and f(L) from two isotherm CSV files
tsallis-table   S_q, its speeds and the EPD residual over a grid

Exit codes: 0 success, 1 verified failure or diagnostic, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import itertools
import json
import math
import os
import re
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import (
    BadSeedError,
    DegenerateIsothermsError,
    HodothermError,
    IsothermParseError,
    PoleError,
    SingularNodeError,
)
from .expr import ExprError, parse
from .hodograph import (
    PhaseSystem,
    ThermoCoordinates,
    linear_path,
    pde_check,
    solve_grid,
    solve_state,
    sweep,
)
from .hydro import (
    SpeedFamily,
    build_general_symmetry,
    conservation_residual,
    semi_hamiltonian_residual,
    symmetry_residual,
    tsallis_family,
    wnl_basis,
)
from .numcore import ScalarField, VectorField
from .onephase import (
    MagnetParams,
    MagnetSystem,
    OnePhaseEOS,
    VdwParams,
    brillouin,
    critical_point,
    halfspin_residual,
    magnet_solve,
    read_isotherm_csv,
    reconstruct_alpha_f,
    solve_onephase,
    vdw_eos,
)
from .tsallis import TsallisEntropy, epd_residual

MODELS = ("tsallis", "wnl-benchmark", "vdw", "magnet", "custom")

EXPR_HELP = """\
custom model file (--speeds): one 'name = expression' per line, '#' comments.
  mu1 .. muN       speeds of the flow conjugate to tau (required unless alpha/f)
  lambda1 .. lambdaN  symmetry speeds (needed by solve and sweep)
  alpha, f         one-phase model T - alpha(theta1) tau - f(theta1) = 0
  other names      constants, usable in later lines
expressions: + - * / ^ (or **), parentheses, numbers, theta1..thetaN
(also t1 or θ1), constants pi and e, functions exp log sqrt sin cos tanh.
"""


class ConfigError(HodothermError):
    """Invalid configuration (exit code 2)."""


_FIELD_KINDS = {
    "model": "str", "n": "num?", "speeds": "str?", "out": "str?",
    "points": "int", "seed": "int", "per_axis": "int", "num": "int",
    "box": "list", "tau": "list", "bracket": "list?", "path_from": "list?", "path_to": "list?",
    "initial": "list?", "grid": "list?",
    **{k: "num" for k in ("q", "a", "b", "R", "spin", "lam", "M0", "mubar", "kappa", "tol",
                          "solver_tol", "T")},
}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


@dataclass
class RunConfig:
    """All settings of one run; round-trips through JSON."""

    model: str = "tsallis"
    n: Optional[float] = None
    q: float = 0.5
    a: float = 3.0
    b: float = 1.0 / 3.0
    R: float = 8.0 / 3.0
    spin: float = 0.5
    lam: float = 1.0
    M0: float = 1.0
    mubar: float = 2.0
    kappa: float = 1.0
    speeds: Optional[str] = None
    tol: float = 1e-6
    solver_tol: float = 1e-10
    points: int = 20
    seed: int = 0
    box: list = field(default_factory=lambda: [-2.0, 2.0])
    per_axis: int = 5
    T: float = 1.0
    tau: list = field(default_factory=lambda: [0.0])
    bracket: Optional[list] = None
    path_from: Optional[list] = None
    path_to: Optional[list] = None
    num: int = 101
    initial: Optional[list] = None
    grid: Optional[list] = None
    out: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            kind = _FIELD_KINDS[f.name]
            value = getattr(self, f.name)
            if value is None and kind.endswith("?"):
                continue
            kind = kind.rstrip("?")
            ok = (_is_number(value) if kind == "num"
                  else _is_number(value) and float(value) == int(value) if kind == "int"
                  else isinstance(value, str) if kind == "str"
                  else isinstance(value, list) and all(_is_number(v) for v in value))
            if not ok:
                raise ConfigError(f"config key {f.name!r} has invalid value {value!r}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if len(self.box) != 2 or not self.box[0] < self.box[1]:
            raise ConfigError("box must be two increasing numbers")
        if self.bracket is not None and (len(self.bracket) != 2 or not self.bracket[0] < self.bracket[1]):
            raise ConfigError("bracket must be two increasing numbers")
        if self.points < 1 or self.num < 2 or self.per_axis < 1:
            raise ConfigError("points, per_axis must be >= 1 and num >= 2")
        if self.model == "custom" and not self.speeds:
            raise ConfigError("the custom model needs --speeds FILE")

    @property
    def phases(self) -> int:
        n = 2 if self.n is None else self.n
        if n != int(n) or n < 1:
            raise ConfigError(f"number of phases must be a positive integer, got {n}")
        return int(n)


# --- formatting --------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def jnum(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    x = float(x)
    return None if not math.isfinite(x) else x


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v) for v in r) + "\n")
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _color(ok: bool, stream) -> str:
    word = "PASS" if ok else "FAIL"
    if os.environ.get("NO_COLOR") is not None or not getattr(stream, "isatty", lambda: False)():
        return word
    return f"\033[{32 if ok else 31}m{word}\033[0m"


# --- models ------------------------------------------------------------------

_KEY = re.compile(r"^\s*([A-Za-z_μλα]\w*)\s*=\s*(.+?)\s*$")


@dataclass
class CustomSpec:
    mu: list
    lam: list
    alpha: Optional[object] = None
    f: Optional[object] = None


def parse_custom(path) -> CustomSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read speeds file {path}: {exc.strerror}") from None
    consts, mu, lam, alpha, f = {}, {}, {}, None, None
    entries = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _KEY.match(line)
        if not m:
            raise ConfigError(f"{path}:{no}: expected 'name = expression'")
        entries.append((no, m.group(1), m.group(2)))
    nvars = sum(1 for _, k, _ in entries if re.fullmatch(r"(mu|μ)\d+", k)) or 1
    try:
        for no, key, src in entries:
            km = re.fullmatch(r"(mu|μ|lambda|λ)(\d+)", key)
            if km:
                target = mu if km.group(1) in ("mu", "μ") else lam
                target[int(km.group(2))] = parse(src, consts, nvars)
            elif key in ("alpha", "α"):
                alpha = parse(src, consts, 1)
            elif key == "f":
                f = parse(src, consts, 1)
            else:
                consts[key] = parse(src, consts, 0)([])
    except ExprError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if (alpha is None) != (f is None):
        raise ConfigError(f"{path}: one-phase models need both alpha and f")
    if alpha is None:
        if sorted(mu) != list(range(1, len(mu) + 1)) or not mu:
            raise ConfigError(f"{path}: speeds must be mu1..muN")
        if lam and sorted(lam) != sorted(mu):
            raise ConfigError(f"{path}: symmetry must be lambda1..lambda{len(mu)}")
    return CustomSpec([mu[k] for k in sorted(mu)], [lam[k] for k in sorted(lam)], alpha, f)


def expression_field(exprs) -> VectorField:
    n = len(exprs)
    d1 = [[e.derivative(l) for l in range(n)] for e in exprs]
    d2 = [[[d.derivative(s) for s in range(n)] for d in row] for row in d1]
    return VectorField(
        lambda x: np.array([e(x) for e in exprs]),
        lambda x: np.array([[d(x) for d in row] for row in d1]),
        lambda x: np.array([[[d(x) for d in col] for col in row] for row in d2]),
    )


@dataclass
class Model:
    """The configured system, in whichever forms the commands need."""

    kind: str  # "multi" or "one"
    cfg: RunConfig
    family: Optional[SpeedFamily] = None
    symmetry_factory: Optional[object] = None
    eos: Optional[OnePhaseEOS] = None
    magnet: Optional[MagnetParams] = None
    entropy: Optional[TsallisEntropy] = None
    labels: tuple = ()
    _system: Optional[object] = None

    @property
    def n(self) -> int:
        return self.family.n if self.kind == "multi" else 1

    @property
    def m(self) -> int:
        return self.family.m if self.kind == "multi" else 1

    def system(self):
        if self._system is None:
            if self.kind == "multi":
                if self.symmetry_factory is None:
                    raise ConfigError("this model has no symmetry; add lambda1..lambdaN")
                self._system = PhaseSystem(self.family, self.symmetry_factory(), check=False)
            elif self.magnet is not None:
                self._system = MagnetSystem(self.magnet)
            else:
                self._system = self.eos.as_system()
        return self._system

    def bracket(self):
        cfg = self.cfg
        if cfg.bracket is not None:
            return tuple(float(v) for v in cfg.bracket)
        if self.magnet is not None:
            return None
        if self.cfg.model == "vdw":
            nb = self._vdw().n * self._vdw().b
            return (nb + 1e-9 * max(nb, 1.0), max(100.0 * nb, 10.0))
        return tuple(float(v) for v in cfg.box)

    def _vdw(self) -> VdwParams:
        cfg = self.cfg
        return VdwParams(1.0 if cfg.n is None else float(cfg.n), cfg.a, cfg.b, cfg.R)

    def roots(self, coords: ThermoCoordinates) -> list:
        """Every root at ``coords`` as arrays with their residual norms."""
        cfg = self.cfg
        if self.kind == "multi":
            rs = solve_state(self.system(), coords, tol=cfg.solver_tol, box=tuple(cfg.box),
                             per_axis=cfg.per_axis)
            return [(r, float(np.max(np.abs(res)))) for r, res in zip(rs.roots, rs.residuals)]
        if self.magnet is not None:
            found = magnet_solve(self.magnet, coords.T, coords.tau[0], self.bracket())
        else:
            found = solve_onephase(self.eos, coords.T, coords.tau[0], self.bracket())
        return [(np.array([r.value]), r.residual) for r in found]


def build_model(cfg: RunConfig) -> Model:
    if cfg.model in ("tsallis", "wnl-benchmark"):
        n = cfg.phases
        fam = tsallis_family(n, cfg.q) if cfg.model == "tsallis" else wnl_basis(n)
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))  # noqa: E731

        def factory():
            return build_general_symmetry(n, [one] * n, np.zeros(n))

        ent = TsallisEntropy(cfg.q) if cfg.model == "tsallis" else None
        return Model("multi", cfg, fam, factory, entropy=ent,
                     labels=tuple(f"theta{k + 1}" for k in range(n)))
    if cfg.model == "vdw":
        try:
            p = VdwParams(1.0 if cfg.n is None else float(cfg.n), cfg.a, cfg.b, cfg.R)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return Model("one", cfg, eos=vdw_eos(p), labels=("V",))
    if cfg.model == "magnet":
        try:
            p = MagnetParams(cfg.M0, cfg.mubar, cfg.kappa, cfg.spin, cfg.lam)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return Model("one", cfg, magnet=p, labels=("M",))
    custom = parse_custom(cfg.speeds)
    if custom.alpha is not None:
        a, f = custom.alpha, custom.f
        da, df = a.derivative(0), f.derivative(0)
        eos = OnePhaseEOS(lambda v: a([v]), lambda v: f([v]), lambda v: da([v]), lambda v: df([v]))
        return Model("one", cfg, eos=eos, labels=("lambda",))
    n = len(custom.mu)
    fam = SpeedFamily.with_unit_flow(n, expression_field(custom.mu))
    factory = (lambda: expression_field(custom.lam)) if custom.lam else None
    return Model("multi", cfg, fam, factory, labels=tuple(f"theta{k + 1}" for k in range(n)))


def coords_of(model: Model, T, tau) -> ThermoCoordinates:
    tau = tuple(float(v) for v in tau)
    if len(tau) != model.m:
        raise ConfigError(f"model {model.cfg.model} takes {model.m} tau value(s), got {len(tau)}")
    return ThermoCoordinates(float(T), tau)


# --- verify ------------------------------------------------------------------

def _sample_points(cfg: RunConfig, n: int) -> list:
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.box
    min_gap = 0.02 * (hi - lo)
    pts = []
    while len(pts) < cfg.points:
        x = rng.uniform(lo, hi, n)
        if n == 1 or np.min(np.diff(np.sort(x))) >= min_gap:
            pts.append(x)
    return pts


class _Worst:
    def __init__(self, name: str, tol: float):
        self.name, self.tol = name, tol
        self.value, self.where, self.index, self.skipped = 0.0, None, None, 0

    def add(self, value, where, index):
        if not math.isfinite(value) or abs(value) > self.value:
            self.value = abs(value) if math.isfinite(value) else math.inf
            self.where, self.index = where, index

    def report(self) -> dict:
        out = {"max_residual": jnum(self.value), "tolerance": self.tol,
               "ok": bool(self.value <= self.tol), "skipped": self.skipped}
        if self.where is not None:
            out["point"] = [jnum(v) for v in self.where]
            out["indices"] = list(self.index)
        return out


def _verify_multi(model: Model, cfg: RunConfig) -> dict:
    fam = model.family
    n = fam.n
    pts = _sample_points(cfg, n)
    checks = {}
    if n >= 3:
        sh = _Worst("semi_hamiltonian", cfg.tol)
        for i in range(1, fam.m + 1):
            for x in pts:
                for k in range(n):
                    for l, s in itertools.combinations([j for j in range(n) if j != k], 2):
                        try:
                            r = semi_hamiltonian_residual(fam, i, x, k, l, s)
                        except PoleError:
                            sh.skipped += 1
                            continue
                        sh.add(r, x, (i, k + 1, l + 1, s + 1))
        checks["semi_hamiltonian"] = sh.report()
    if model.symmetry_factory is not None:
        sym = model.symmetry_factory()
        sr = _Worst("symmetry", cfg.tol)
        for i in range(1, fam.m + 1):
            for x in pts:
                for k, l in itertools.permutations(range(n), 2):
                    try:
                        r = symmetry_residual(fam, i, sym, x, k, l)
                    except PoleError:
                        sr.skipped += 1
                        continue
                    sr.add(r, x, (i, k + 1, l + 1))
        checks["symmetry"] = sr.report()
    if model.entropy is not None and n >= 2:
        field_ = model.entropy.field()
        ep = _Worst("epd", cfg.tol)
        for x in pts:
            for i, j in itertools.combinations(range(n), 2):
                ep.add(epd_residual(field_, x, i, j), x, (i + 1, j + 1))
        checks["epd"] = ep.report()
        # the additive entropy S_0 is a conserved density of the S_q flow
        s0 = ScalarField(lambda x: float(np.sum(x)), lambda x: np.ones_like(x),
                         lambda x: np.zeros((x.size, x.size)))
        cl = _Worst("conservation", cfg.tol)
        for x in pts:
            for i, j in itertools.combinations(range(n), 2):
                cl.add(conservation_residual(fam, 1, s0, x, i, j), x, (1, i + 1, j + 1))
        checks["conservation"] = cl.report()
    return checks


def _order_check(system, centre, seed, h0: float, cfg: RunConfig) -> dict:
    grids = []
    for h in (h0, h0 / 2, h0 / 4):
        offs = h * np.arange(-8, 9)
        grids.append(solve_grid(system, centre.T + offs, centre.tau[0] + offs, seed, flow=1))
    rep = pde_check(system, grids, flow=1)
    order = rep.order
    ok = (order is not None and 1.8 <= order <= 2.2) or rep.max_residual <= cfg.tol
    return {"max_residual": jnum(rep.max_residual),
            "order": None if order is None else jnum(order),
            "ok": bool(ok), "tolerance": cfg.tol}


def _verify_one(model: Model, cfg: RunConfig) -> dict:
    checks = {}
    if model.magnet is not None:
        p = model.magnet
        ys = np.linspace(-20, 20, 2001)
        b = brillouin(p.s, ys)
        checks["brillouin_odd"] = {"max_residual": jnum(np.max(np.abs(b + b[::-1]))),
                                   "tolerance": 1e-14,
                                   "ok": bool(np.max(np.abs(b + b[::-1])) <= 1e-14)}
        if p.s == 0.5:
            rng = np.random.default_rng(cfg.seed)
            worst = 0.0
            for _ in range(cfg.points):
                T = rng.uniform(0.2, 2.0)
                H = rng.uniform(-1.0, 1.0)
                for r in magnet_solve(p, T, H):
                    worst = max(worst, abs(halfspin_residual(p, r.value, T, H)))
            checks["halfspin"] = {"max_residual": jnum(worst), "tolerance": 1e-10,
                                  "ok": bool(worst <= 1e-10)}
        return checks
    eos = model.eos
    if cfg.model == "vdw":
        p = model._vdw()
        if p.a > 0 and p.b > 0:
            exact = p.critical
            found = critical_point(eos, (exact[0] * 0.5, exact[0] * 5.0))
            err = max(abs(u - v) / abs(v) for u, v in zip(found, exact))
            checks["critical_point"] = {"max_residual": jnum(err), "tolerance": 1e-6,
                                        "ok": bool(err <= 1e-6),
                                        "point": [jnum(v) for v in found]}
            centre = ThermoCoordinates(1.5 * exact[1], (0.5 * exact[2],))
        else:
            centre = ThermoCoordinates(1.0, (1.0,))
    else:
        centre = ThermoCoordinates(float(cfg.T), (float(cfg.tau[0]),))
    roots = model.roots(centre)
    if len(roots) != 1:
        raise ConfigError(f"hopf check needs a unique root at {centre}; found {len(roots)}")
    checks["hopf"] = _order_check(model.system(), centre, roots[0][0], 1e-2, cfg)
    return checks


def cmd_verify(cfg: RunConfig, as_json: bool, out) -> int:
    model = build_model(cfg)
    checks = _verify_multi(model, cfg) if model.kind == "multi" else _verify_one(model, cfg)
    ok = all(c["ok"] for c in checks.values())
    report = {"command": "verify", "model": cfg.model, "ok": ok, "checks": checks}
    if as_json:
        out.write(json_text(report))
    else:
        for name, c in checks.items():
            line = f"{name:18s} max={fmt(c['max_residual'])}"
            if "indices" in c and not c["ok"]:
                line += f" at indices {tuple(c['indices'])}"
            out.write(f"{line}  {_color(c['ok'], out)}\n")
    return 0 if ok else 1


# --- solve -------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, as_json: bool, out) -> int:
    model = build_model(cfg)
    coords = coords_of(model, cfg.T, cfg.tau)
    roots = model.roots(coords)
    columns = ["root", *model.labels, "residual"]
    rows = [(i, *r, res) for i, (r, res) in enumerate(roots)]
    if not rows:
        warnings.warn(f"no roots found at T={coords.T!r}, tau={coords.tau!r}", stacklevel=1)
    if as_json:
        out.write(json_text({
            "command": "solve", "model": cfg.model, "T": coords.T, "tau": list(coords.tau),
            "columns": columns, "rows": [[jnum(v) for v in r] for r in rows]}))
    else:
        out.write(csv_text(columns, rows))
    return 0


# --- sweep -------------------------------------------------------------------

@dataclass
class _Branch:
    start: int
    thetas: list
    residuals: list
    trailers: list


def _follow(model: Model, path, idx: int, root, branches) -> _Branch:
    """Trace a root both ways from node ``idx``.

    Each side stops early where it meets an existing branch, so a branch that
    passes through a pitchfork is not traced twice.
    """
    system = model.system()
    tol = model.cfg.solver_tol

    def side(points):
        kept = [points[0]]
        step = 1 if points is fwd_pts else -1
        for j, p in enumerate(points[1:], start=1):
            if _covered(branches, idx + step * j, p[1]):
                return kept, True
            kept.append(p)
        return kept, False

    fwd = sweep(system, path[idx:], root, tol=tol)
    fwd_pts = fwd.points
    ahead, merged_ahead = side(fwd_pts)
    thetas = [p[1] for p in ahead]
    residuals = [p[2] for p in ahead]
    trailers = []
    start = idx
    if idx > 0:
        bwd = sweep(system, path[idx::-1], root, tol=tol)
        behind, merged_behind = side(bwd.points)
        back = behind[1:]
        thetas = [p[1] for p in reversed(back)] + thetas
        residuals = [p[2] for p in reversed(back)] + residuals
        start = idx - len(back)
        if bwd.turning_point is not None and not merged_behind:
            trailers.append(bwd.turning_point)
    if fwd.turning_point is not None and not merged_ahead:
        trailers.append(fwd.turning_point)
    return _Branch(start, thetas, residuals, trailers)


def _covered(branches, idx, x) -> bool:
    for b in branches:
        j = idx - b.start
        if 0 <= j < len(b.thetas):
            y = b.thetas[j]
            if np.max(np.abs(y - x)) <= 1e-6 * max(1.0, float(np.max(np.abs(x)))):
                return True
    return False


def run_sweep(model: Model, cfg: RunConfig) -> tuple:
    if cfg.path_from is None or cfg.path_to is None:
        raise ConfigError("sweep needs --from T tau... and --to T tau...")
    a = coords_of(model, cfg.path_from[0], cfg.path_from[1:])
    b = coords_of(model, cfg.path_to[0], cfg.path_to[1:])
    path = linear_path(a, b, cfg.num)
    branches = []
    if cfg.initial is not None:
        x0 = np.asarray(cfg.initial, dtype=float)
        if x0.size != model.n:
            raise ConfigError(f"initial point needs {model.n} values")
        branches.append(_follow(model, path, 0, x0, branches))
    else:
        probes = range(len(path)) if model.kind == "one" else sorted({0, len(path) // 2, len(path) - 1})
        for idx in probes:
            for x, _ in model.roots(path[idx]):
                if not _covered(branches, idx, x):
                    br = _follow(model, path, idx, x, branches)
                    # a lone node sits exactly on a fold or bifurcation
                    if len(br.thetas) > 1:
                        branches.append(br)
    branches.sort(key=lambda br: (br.start, tuple(br.thetas[0])))
    return path, branches


def cmd_sweep(cfg: RunConfig, as_json: bool, out) -> int:
    model = build_model(cfg)
    path, branches = run_sweep(model, cfg)
    m = model.m
    columns = ["s", "T", *(f"tau{i + 1}" for i in range(m)), *model.labels, "residual"]
    last = len(path) - 1
    blocks = []
    for k, br in enumerate(branches):
        rows = []
        for j, (x, res) in enumerate(zip(br.thetas, br.residuals)):
            c = path[br.start + j]
            rows.append((( br.start + j) / last, c.T, *c.tau, *x, res))
        trailers = [(c.T, *c.tau, *x) for c, x in br.trailers]
        blocks.append((f"branch_{k:03d}", rows, trailers))
    if as_json:
        out.write(json_text({
            "command": "sweep", "model": cfg.model, "columns": columns,
            "branches": [{"label": lab, "rows": [[jnum(v) for v in r] for r in rows],
                          "turning_points": [[jnum(v) for v in t] for t in trl]}
                         for lab, rows, trl in blocks]}))
        return 0

    def block_text(lab, rows, trl):
        text = f"# {lab}\n" + csv_text(columns, rows)
        for t in trl:
            text += "# turning-point," + ",".join(fmt(v) for v in t) + "\n"
        return text

    if cfg.out:
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        for lab, rows, trl in blocks:
            (outdir / f"{lab}.csv").write_text(block_text(lab, rows, trl), encoding="utf-8")
            out.write(f"{lab}.csv,{len(rows)},{len(trl)}\n")
    else:
        out.write("\n\n".join(block_text(*blk) for blk in blocks))
    return 0


# --- reconstruct -------------------------------------------------------------

def cmd_reconstruct(cfg: RunConfig, iso1: str, iso2: str, as_json: bool, out) -> int:
    t1 = read_isotherm_csv(iso1)
    t2 = read_isotherm_csv(iso2)
    if cfg.grid is not None:
        if len(cfg.grid) != 3:
            raise ConfigError("grid must be: lo hi count")
        grid = np.linspace(cfg.grid[0], cfg.grid[1], int(cfg.grid[2]))
    else:
        grid = np.linspace(max(t1.lam[0], t2.lam[0]), min(t1.lam[-1], t2.lam[-1]), 201)
    res = reconstruct_alpha_f(t1, t2, grid)
    columns = ["lambda", "alpha", "f"]
    rows = list(zip(res.lam, res.alpha, res.f))
    text = (json_text({"command": "reconstruct", "columns": columns,
                       "rows": [[jnum(v) for v in r] for r in rows]})
            if as_json else csv_text(columns, rows))
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return 0


# --- tsallis-table -----------------------------------------------------------

def cmd_tsallis_table(cfg: RunConfig, as_json: bool, out) -> int:
    n = cfg.phases
    lo, hi, count = cfg.grid if cfg.grid is not None else (-1.0, 1.0, 5)
    axis = np.linspace(lo, hi, int(count))
    ent = TsallisEntropy(cfg.q)
    field_ = ent.field()
    columns = [*(f"theta{k + 1}" for k in range(n)), "S", *(f"mu{k + 1}" for k in range(n)), "epd"]
    rows = []
    for x in itertools.product(axis, repeat=n):
        x = np.array(x)
        worst = 0.0
        for i, j in itertools.combinations(range(n), 2):
            try:
                worst = max(worst, abs(epd_residual(field_, x, i, j)))
            except PoleError:
                worst = math.nan
                break
        rows.append((*x, ent(x), *ent.gradient(x), worst))
    if as_json:
        out.write(json_text({"command": "tsallis-table", "q": cfg.q, "columns": columns,
                             "rows": [[jnum(v) for v in r] for r in rows]}))
    else:
        out.write(csv_text(columns, rows))
    return 0


# --- argument parsing --------------------------------------------------------

_D = RunConfig()


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    g = p.add_argument_group("run options")
    g.add_argument("--config", default=S, metavar="FILE", help="JSON config; flags override its keys")
    g.add_argument("--save-config", default=S, metavar="FILE",
                   help="write the resolved config as JSON and continue")
    g.add_argument("--json", action="store_true", default=S, help="emit JSON instead of CSV/text")
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODELS, default=S, help=f"system to use (default: {_D.model})")
    g.add_argument("--n", type=float, default=S,
                   help="phases for tsallis/wnl-benchmark (default: 2); moles for vdw (default: 1)")
    g.add_argument("--q", type=float, default=S, help=f"Tsallis parameter (default: {_D.q})")
    g.add_argument("--a", type=float, default=S, help=f"vdW attraction (default: {_D.a})")
    g.add_argument("--b", type=float, default=S, help=f"vdW covolume (default: {_D.b!r})")
    g.add_argument("--R", type=float, default=S, help=f"gas constant (default: {_D.R!r})")
    g.add_argument("--spin", type=float, default=S, help=f"magnet spin s (default: {_D.spin})")
    g.add_argument("--lam", type=float, default=S,
                   help=f"magnet interaction constant (default: {_D.lam})")
    g.add_argument("--M0", type=float, default=S, help=f"saturation magnetisation (default: {_D.M0})")
    g.add_argument("--mubar", type=float, default=S, help=f"magnetic moment (default: {_D.mubar})")
    g.add_argument("--kappa", type=float, default=S, help=f"Boltzmann constant (default: {_D.kappa})")
    g.add_argument("--speeds", default=S, metavar="FILE", help="custom model file (see below)")
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, default=S,
                   help=f"verification tolerance (default: {_D.tol})")
    g.add_argument("--solver-tol", dest="solver_tol", type=float, default=S,
                   help=f"state residual tolerance (default: {_D.solver_tol})")
    g.add_argument("--points", type=int, default=S,
                   help=f"random sample points for verify (default: {_D.points})")
    g.add_argument("--seed", type=int, default=S, help=f"sampling seed (default: {_D.seed})")
    g.add_argument("--box", type=float, nargs=2, default=S, metavar=("LO", "HI"),
                   help=f"seed and sampling box per coordinate (default: {_D.box})")
    g.add_argument("--per-axis", dest="per_axis", type=int, default=S,
                   help=f"Newton seeds per axis (default: {_D.per_axis})")
    g.add_argument("--bracket", type=float, nargs=2, default=S, metavar=("LO", "HI"),
                   help="one-phase root bracket (default: (nb, 100 nb) for vdw, (-M0, M0) for magnet)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    fmt_cls = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="hodotherm", description=__doc__.split("\n\n")[0],
                                     formatter_class=fmt_cls, epilog=EXPR_HELP)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    sub.add_parser("verify", parents=[common], formatter_class=fmt_cls, epilog=EXPR_HELP,
                   help="check integrability conditions; exit 1 on violation")

    p = sub.add_parser("solve", parents=[common], formatter_class=fmt_cls, epilog=EXPR_HELP,
                       help="all roots of the state equation")
    p.add_argument("--T", type=float, default=S, help=f"temperature (default: {_D.T})")
    p.add_argument("--tau", type=float, nargs="+", default=S,
                   help=f"conjugate variables, one per flow (default: {_D.tau})")

    p = sub.add_parser("sweep", parents=[common], formatter_class=fmt_cls, epilog=EXPR_HELP,
                       help="continue every root along a straight path")
    p.add_argument("--from", dest="path_from", type=float, nargs="+", default=S,
                   metavar="V", help="path start: T tau...")
    p.add_argument("--to", dest="path_to", type=float, nargs="+", default=S,
                   metavar="V", help="path end: T tau...")
    p.add_argument("--num", type=int, default=S, help=f"path nodes (default: {_D.num})")
    p.add_argument("--initial", type=float, nargs="+", default=S, metavar="X",
                   help="follow only this root at the path start")
    p.add_argument("--out", default=S, metavar="DIR",
                   help="write one CSV per branch into DIR (default: all blocks to stdout)")

    p = sub.add_parser("reconstruct", parents=[common], formatter_class=fmt_cls,
                       help="alpha and f from two isotherm files")
    p.add_argument("iso1")
    p.add_argument("iso2")
    p.add_argument("--grid", type=float, nargs=3, default=S, metavar=("LO", "HI", "COUNT"),
                   help="lambda grid (default: 201 points over the common range)")
    p.add_argument("--out", default=S, metavar="FILE", help="output file (default: stdout)")

    p = sub.add_parser("tsallis-table", parents=[common], formatter_class=fmt_cls,
                       help="S_q, speeds and EPD residual on a grid")
    p.add_argument("--grid", type=float, nargs=3, default=S, metavar=("LO", "HI", "COUNT"),
                   help="axis grid for every theta (default: -1 1 5)")
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    data = RunConfig().to_dict()
    if getattr(ns, "config", None):
        data.update(RunConfig.load(ns.config).to_dict())
    names = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in vars(ns).items():
        if key in names:
            data[key] = value
    return RunConfig.from_dict(data)


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    as_json = bool(getattr(ns, "json", False))
    try:
        cfg = resolve_config(ns)
        if getattr(ns, "save_config", None):
            Path(ns.save_config).write_text(cfg.dumps(), encoding="utf-8")
        if ns.command == "verify":
            return cmd_verify(cfg, as_json, out)
        if ns.command == "solve":
            return cmd_solve(cfg, as_json, out)
        if ns.command == "sweep":
            return cmd_sweep(cfg, as_json, out)
        if ns.command == "reconstruct":
            return cmd_reconstruct(cfg, ns.iso1, ns.iso2, as_json, out)
        return cmd_tsallis_table(cfg, as_json, out)
    except (ConfigError, IsothermParseError, ExprError, OSError) as exc:
        print(f"hodotherm: error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateIsothermsError, SingularNodeError, BadSeedError) as exc:
        print(f"hodotherm: {exc}", file=sys.stderr)
        return 1
    except HodothermError as exc:
        print(f"hodotherm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
