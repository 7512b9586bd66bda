import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from hodotherm.cli import RunConfig, main
from hodotherm.onephase import IsothermTable, VdwParams, vdw_eos, write_isotherm_csv
from hodotherm.tsallis import TsallisEntropy, tsallis_speed

from oracles import grid_roots_2d

WITNESS = "# non-integrable witness\nmu1 = theta2^2 + theta3\nmu2 = theta1\nmu3 = 2*theta1\n"


def run(*argv):
    out = io.StringIO()
    rc = main([str(a) for a in argv], out=out)
    return rc, out.getvalue()


def csv_rows(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [[float(v) for v in ln.split(",")] for ln in lines[1:]]


def sweep_blocks(text):
    blocks = []
    for chunk in text.split("\n\n\n"):
        lines = [ln for ln in chunk.splitlines() if ln]
        if not lines:
            continue
        label = lines[0][2:]
        tps = [[float(v) for v in ln.split(",")[1:]] for ln in lines if ln.startswith("# turning-point")]
        rows = [[float(v) for v in ln.split(",")] for ln in lines[2:] if not ln.startswith("#")]
        blocks.append((label, lines[1].split(","), rows, tps))
    return blocks


@pytest.fixture
def witness(tmp_path):
    p = tmp_path / "witness.txt"
    p.write_text(WITNESS)
    return p


@pytest.fixture
def isotherms(tmp_path):
    lam = np.linspace(0.5, 4.0, 801)
    paths = {}
    for name, T in (("g1", 1.0), ("g2", 2.0), ("g3", 1.0)):
        tab = IsothermTable(T, lam, (8 / 3) * T / lam)
        paths[name] = tmp_path / f"{name}.csv"
        write_isotherm_csv(tab, paths[name])
    eos = vdw_eos(VdwParams())
    vl = np.linspace(0.6, 6.0, 1201)
    for name, T in (("v1", 1.2), ("v2", 1.6)):
        paths[name] = tmp_path / f"{name}.csv"
        write_isotherm_csv(IsothermTable(T, vl, eos.isotherm(vl, T)), paths[name])
    paths["bad"] = tmp_path / "bad.csv"
    paths["bad"].write_text("T=1\nlambda,tau\n1,2\n")
    return paths


class TestVerify:
    def test_tsallis(self):
        rc, out = run("verify", "--model", "tsallis", "--n", 3, "--q", 0.7, "--json")
        rep = json.loads(out)
        assert rc == 0 and rep["ok"]
        assert set(rep["checks"]) == {"semi_hamiltonian", "symmetry", "epd", "conservation"}
        assert all(c["max_residual"] <= 1e-6 for c in rep["checks"].values())

    def test_witness_fails(self, witness):
        rc, out = run("verify", "--model", "custom", "--speeds", witness, "--json")
        rep = json.loads(out)
        assert rc == 1 and not rep["ok"]
        sh = rep["checks"]["semi_hamiltonian"]
        assert sh["max_residual"] >= 1e-2 and not sh["ok"]
        i, k, l, s = sh["indices"]
        assert i == 1 and len({k, l, s}) == 3 and {k, l, s} <= {1, 2, 3}

    def test_text_report(self, witness):
        rc, out = run("verify", "--model", "custom", "--speeds", witness)
        assert rc == 1 and "semi_hamiltonian" in out and "FAIL" in out

    @pytest.mark.parametrize("argv", [
        ("--model", "wnl-benchmark", "--n", 3),
        ("--model", "tsallis", "--n", 4, "--q", 1.3, "--points", 5),
        ("--model", "vdw",),
        ("--model", "magnet",),
    ])
    def test_builtin_models_pass(self, argv):
        rc, out = run("verify", *argv)
        assert rc == 0, out

    def test_missing_config(self, tmp_path, capsys):
        rc, _ = run("verify", "--config", tmp_path / "nope.json")
        assert rc == 2
        assert "error" in capsys.readouterr().err

    @pytest.mark.parametrize("text", ['{"bogus": 1}', "{not json", '{"model": "ising"}', '{"q": "x"}'])
    def test_bad_config(self, tmp_path, text):
        p = tmp_path / "c.json"
        p.write_text(text)
        assert run("verify", "--config", p)[0] == 2

    def test_usage_error(self):
        assert run("verify", "--q")[0] == 2
        assert run("frobnicate")[0] == 2


class TestSolve:
    def test_vdw_three_rows(self):
        rc, out = run("solve", "--model", "vdw", "--a", 3, "--b", 0.333333, "--n", 1, "--R", 2.666667,
                      "--T", 0.9, "--tau", 0.647)
        header, rows = csv_rows(out)
        assert rc == 0 and header == ["root", "V", "residual"]
        assert len(rows) == 3
        assert all(r[2] <= 1e-10 for r in rows)
        assert [r[1] for r in rows] == sorted(r[1] for r in rows)

    def test_magnet_noninteracting(self):
        rc, out = run("solve", "--model", "magnet", "--spin", 0.5, "--lam", 0, "--T", 1, "--tau", 0)
        _, rows = csv_rows(out)
        assert rc == 0 and len(rows) == 1 and rows[0][1] == 0.0

    def test_tsallis_unit_level(self):
        rc, out = run("solve", "--model", "tsallis", "--n", 2, "--q", 0.5, "--T", 1, "--tau", 0)
        header, rows = csv_rows(out)
        assert rc == 0 and header == ["root", "theta1", "theta2", "residual"]

        def lam_minus_one(x):
            a = -(x[0] ** 2 + x[1] ** 2) / 2
            return np.array([a + (x[0] + x[1]) * x[1] - 1, a + (x[0] + x[1]) * x[0] - 1])

        ref = grid_roots_2d(lam_minus_one, (-2, 2), cells=80)
        np.testing.assert_allclose([r[1:3] for r in rows], ref, atol=1e-9)

    def test_no_roots(self, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("alpha = 1\nf = theta1^2 + 1\n")
        with pytest.warns(UserWarning, match="no roots"):
            rc, out = run("solve", "--model", "custom", "--speeds", p, "--T", 0, "--tau", 0,
                          "--bracket", -3, 3)
        assert rc == 0
        assert csv_rows(out)[1] == []

    def test_tau_count(self):
        assert run("solve", "--model", "vdw", "--T", 0.9, "--tau", 0.5, 0.6)[0] == 2

    def test_bad_expression(self, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("mu1 = theta1 +\n")
        assert run("verify", "--model", "custom", "--speeds", p)[0] == 2

    def test_vdw_parameter_error(self):
        assert run("solve", "--model", "vdw", "--R", -1, "--T", 1, "--tau", 1)[0] == 2


class TestSweep:
    def test_vdw_s_shape(self):
        rc, out = run("sweep", "--model", "vdw", "--from", 0.9, 0.3, "--to", 0.9, 0.9, "--num", 61)
        assert rc == 0
        blocks = sweep_blocks(out)
        assert len(blocks) == 3
        header = blocks[0][1]
        assert header == ["s", "T", "tau1", "V", "residual"]
        tps = sorted(tp[1] for b in blocks for tp in b[3])
        # turning points at the two spinodal pressures of the T = 0.9 isotherm
        assert min(tps) == pytest.approx(0.41984, abs=1e-4)
        assert max(tps) == pytest.approx(0.72401, abs=1e-4)
        for b in blocks:
            assert all(r[-1] <= 1e-10 for r in b[2])

    def test_magnet_pitchfork(self):
        rc, out = run("sweep", "--model", "magnet", "--lam", 1, "--from", 1.5, 0, "--to", 0.5, 0,
                      "--num", 21)
        assert rc == 0
        rows = [r for b in sweep_blocks(out) for r in b[2]]
        by_T = {}
        for r in rows:
            by_T.setdefault(round(r[1], 9), set()).add(round(r[3], 6))
        assert by_T[1.5] == {0.0}
        assert len(by_T[0.5]) == 3
        ms = max(by_T[0.5])
        assert ms == pytest.approx(math.tanh(ms / 0.5), abs=1e-6)

    def test_linear_transport(self, tmp_path):
        p = tmp_path / "lt.txt"
        p.write_text("c = 2\nalpha = c\nf = theta1\n")
        rc, out = run("sweep", "--model", "custom", "--speeds", p, "--from", 1, 0, "--to", 1, 1,
                      "--num", 11, "--bracket", -5, 5)
        assert rc == 0
        (label, header, rows, tps), = sweep_blocks(out)
        assert tps == [] and len(rows) == 11
        for s, T, tau, lam, res in rows:
            assert lam == pytest.approx(T - 2 * tau, abs=1e-12)

    def test_out_dir(self, tmp_path):
        d = tmp_path / "branches"
        rc, out = run("sweep", "--model", "vdw", "--from", 0.9, 0.5, "--to", 0.9, 0.8, "--num", 11,
                      "--out", d)
        assert rc == 0
        files = sorted(d.glob("*.csv"))
        assert [f.name for f in files] == ["branch_000.csv", "branch_001.csv", "branch_002.csv"]
        assert files[0].read_text().startswith("# branch_000\n")

    def test_initial(self):
        rc, out = run("sweep", "--model", "tsallis", "--n", 2, "--from", 1, 0, "--to", 1, 0.4,
                      "--num", 5, "--initial", 1, 1)
        blocks = sweep_blocks(out)
        assert rc == 0 and len(blocks) == 1 and len(blocks[0][2]) == 5

    def test_bad_seed(self):
        rc, _ = run("sweep", "--model", "tsallis", "--n", 2, "--from", 1, 0, "--to", 1, 0.4,
                    "--initial", 0.3, 0.2)
        assert rc == 1


class TestReconstruct:
    def test_ideal_gas(self, isotherms):
        rc, out = run("reconstruct", isotherms["g1"], isotherms["g2"])
        header, rows = csv_rows(out)
        assert rc == 0 and header == ["lambda", "alpha", "f"]
        assert len(rows) == 201
        assert max(abs(r[2]) for r in rows) <= 1e-8

    def test_vdw(self, isotherms):
        rc, out = run("reconstruct", isotherms["v1"], isotherms["v2"], "--grid", 0.7, 5.9, 53)
        _, rows = csv_rows(out)
        for lam, alpha, f in rows:
            assert alpha == pytest.approx((lam - 1 / 3) / (8 / 3), rel=1e-6)

    def test_same_temperature(self, isotherms, capsys):
        assert run("reconstruct", isotherms["g1"], isotherms["g3"])[0] == 1

    def test_parse_error(self, isotherms, tmp_path):
        assert run("reconstruct", isotherms["g1"], isotherms["bad"])[0] == 2
        assert run("reconstruct", isotherms["g1"], tmp_path / "missing.csv")[0] == 2

    def test_out_file(self, isotherms, tmp_path):
        dest = tmp_path / "af.csv"
        rc, out = run("reconstruct", isotherms["g1"], isotherms["g2"], "--out", dest)
        assert rc == 0 and out == "" and dest.read_text().startswith("lambda,alpha,f\n")


class TestTsallisTable:
    def test_values(self):
        rc, out = run("tsallis-table", "--n", 3, "--q", 0.3, "--grid", -1, 1, 4)
        header, rows = csv_rows(out)
        assert rc == 0
        assert header == ["theta1", "theta2", "theta3", "S", "mu1", "mu2", "mu3", "epd"]
        assert len(rows) == 64
        ent = TsallisEntropy(0.3)
        for r in rows:
            x = r[:3]
            assert r[3] == pytest.approx(ent(x), rel=1e-15, abs=1e-15)
            for k in range(3):
                assert r[4 + k] == pytest.approx(tsallis_speed(0.3, x, k), rel=1e-15, abs=1e-15)
            assert math.isnan(r[7]) or abs(r[7]) <= 1e-10

    def test_poles_marked(self):
        _, rows = csv_rows(run("tsallis-table", "--n", 2, "--grid", -1, 1, 3)[1])
        assert math.isnan(rows[0][-1]) and rows[1][-1] == 0.0


COMMANDS = [
    ("verify", "--model", "tsallis", "--n", 3, "--points", 5),
    ("solve", "--model", "vdw", "--T", 0.9, "--tau", 0.647),
    ("solve", "--model", "tsallis", "--n", 2, "--T", 0.7, "--tau", 0.3),
    ("sweep", "--model", "vdw", "--from", 0.9, 0.5, "--to", 0.9, 0.8, "--num", 7),
    ("tsallis-table", "--n", 2, "--grid", -1, 1, 3),
]


def numbers(obj):
    if isinstance(obj, dict):
        return [v for k in sorted(obj) for v in numbers(obj[k])]
    if isinstance(obj, list):
        return [v for x in obj for v in numbers(x)]
    return [obj] if isinstance(obj, (int, float)) and not isinstance(obj, bool) else []


class TestOutputContract:
    @pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: a[0])
    def test_deterministic(self, argv):
        assert run(*argv) == run(*argv)
        assert run(*argv, "--json") == run(*argv, "--json")

    @pytest.mark.parametrize("argv", COMMANDS[1:], ids=lambda a: a[0])
    def test_json_matches_csv(self, argv):
        _, text = run(*argv)
        _, js = run(*argv, "--json")
        rep = json.loads(js)
        if argv[0] == "sweep":
            csv_vals = [v for b in sweep_blocks(text) for r in b[2] for v in r]
            js_vals = [v for b in rep["branches"] for r in b["rows"] for v in r]
            tp_csv = [v for b in sweep_blocks(text) for t in b[3] for v in t]
            tp_js = [v for b in rep["branches"] for t in b["turning_points"] for v in numbers(t)]
            assert tp_csv == tp_js
        else:
            csv_vals = [v for r in csv_rows(text)[1] for v in r]
            js_vals = [math.nan if v is None else v for r in rep["rows"] for v in r]
        np.testing.assert_array_equal(np.array(csv_vals), np.array(js_vals, dtype=float))

    def test_save_and_load_config(self, tmp_path):
        cfg = tmp_path / "run.json"
        argv = ("solve", "--model", "vdw", "--a", 2.5, "--T", 0.7, "--tau", 0.3)
        first = run(*argv, "--save-config", cfg)
        saved = json.loads(cfg.read_text())
        assert saved["a"] == 2.5 and saved["model"] == "vdw"
        assert run("solve", "--config", cfg) == first
        # flags override the file
        assert run("solve", "--config", cfg, "--a", 3) == run("solve", "--model", "vdw", "--T", 0.7,
                                                               "--tau", 0.3)

    def test_config_round_trip(self):
        cfg = RunConfig(model="magnet", lam=0.25, tau=[0.1], bracket=[-0.5, 0.5], grid=[0, 1, 3])
        again = RunConfig.from_dict(json.loads(cfg.dumps()))
        assert again == cfg
        assert again.dumps() == cfg.dumps()

    def test_no_color(self, witness, monkeypatch):
        class Tty(io.StringIO):
            def isatty(self):
                return True

        out = Tty()
        main(["verify", "--model", "custom", "--speeds", str(witness)], out=out)
        assert "\033[" in out.getvalue()
        monkeypatch.setenv("NO_COLOR", "1")
        out = Tty()
        main(["verify", "--model", "custom", "--speeds", str(witness)], out=out)
        assert "\033[" not in out.getvalue()

    def test_help_lists_defaults(self, capsys):
        assert run("solve", "--help")[0] == 0
        text = capsys.readouterr().out
        assert "default: 1e-10" in text and "mu1 .. muN" in text

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "hodotherm", "--version"], capture_output=True,
                              text=True, check=False)
        assert proc.returncode == 0 and proc.stdout.strip().endswith("0.1.0")
