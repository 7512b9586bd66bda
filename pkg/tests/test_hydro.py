import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from hodotherm.errors import (
    CofactorSingularityError,
    ConditionVacuousError,
    DegenerateEntropyError,
    PathDependenceError,
    PoleError,
)
from hodotherm.hydro import (
    GeneralSymmetry,
    SpeedFamily,
    build_general_symmetry,
    conservation_residual,
    is_linearly_degenerate,
    lax_speed,
    semi_hamiltonian_residual,
    symmetry_residual,
    tsallis_family,
    wnl_basis,
    wnl_flow,
    wnl_matrix,
    wnl_speed,
)
from hodotherm.numcore import ScalarField, VectorField, det, fd_jacobian
from hodotherm.onephase import VdwParams, vdw_eos
from hodotherm.tsallis import TsallisEntropy, tsallis_speed

from oracles import residue_speed, semi_hamiltonian_symbolic


def witness_family():
    mu = VectorField(lambda x: np.array([x[1] ** 2 + x[2], x[0], 2 * x[0]]))
    return SpeedFamily.with_unit_flow(3, mu)


def swap_family():
    """mu^1 = theta^2, mu^2 = theta^1 (the N = 2 weakly nonlinear flow)."""
    return SpeedFamily.with_unit_flow(2, VectorField(
        lambda x: np.array([x[1], x[0]]), lambda x: np.array([[0.0, 1.0], [1.0, 0.0]]),
        lambda x: np.zeros((2, 2, 2))))


def two_phase_lambda(x):
    a = -(x[0] ** 2 + x[1] ** 2) / 2
    return np.array([a + (x[0] + x[1]) * x[1], a + (x[0] + x[1]) * x[0]])


def random_points(n, count, seed, lo=-1.0, hi=1.0, gap=0.05):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = rng.uniform(lo, hi, n)
        if n == 1 or np.min(np.diff(np.sort(p))) > gap:
            out.append(p)
    return out


class TestSemiHamiltonian:
    def test_tsallis_example(self):
        fam = tsallis_family(3, 0.7)
        assert abs(semi_hamiltonian_residual(fam, 1, [1, 2, 3], 0, 1, 2)) <= 1e-6

    def test_constant_speeds_exact_zero(self):
        fam = SpeedFamily.with_unit_flow(3, VectorField.constant([1.0, 2.0, 3.0]))
        assert semi_hamiltonian_residual(fam, 1, [0.1, 0.2, 0.3], 0, 1, 2) == 0.0

    def test_witness_matches_symbolic_oracle(self):
        t = sp.symbols("t1:4")
        mu = [t[1] ** 2 + t[2], t[0], 2 * t[0]]
        fam = witness_family()
        for k, l, s in itertools.permutations(range(3)):
            ref = semi_hamiltonian_symbolic(mu, t, (1, 2, 3), k, l, s)
            got = semi_hamiltonian_residual(fam, 1, [1, 2, 3], k, l, s)
            assert got == pytest.approx(ref, rel=1e-5, abs=1e-7)
        assert abs(semi_hamiltonian_residual(fam, 1, [1, 2, 3], 1, 0, 2)) > 1e-2

    def test_needs_three_phases(self):
        with pytest.raises(ConditionVacuousError):
            semi_hamiltonian_residual(tsallis_family(2, 0.5), 1, [1, 2], 0, 1, 1)

    def test_distinct_indices(self):
        with pytest.raises(ValueError):
            semi_hamiltonian_residual(tsallis_family(3, 0.5), 1, [1, 2, 3], 0, 0, 1)

    def test_coincident_speeds(self):
        fam = tsallis_family(3, 0.5)
        with pytest.raises(PoleError):
            semi_hamiltonian_residual(fam, 1, [1.0, 1.0, 3.0], 0, 1, 2)

    @pytest.mark.parametrize("q", [0.0, 0.5, 1.3])
    @pytest.mark.parametrize("n", [3, 4])
    def test_tsallis_all_triples(self, q, n):
        fam = tsallis_family(n, q)
        for x in random_points(n, 10, seed=n):
            for k, l, s in itertools.permutations(range(n), 3):
                assert abs(semi_hamiltonian_residual(fam, 1, x, k, l, s)) <= 1e-6

    def test_fd_speeds_agree_with_analytic(self):
        s = TsallisEntropy(0.6)
        fd = SpeedFamily.with_unit_flow(3, VectorField(s.gradient))
        an = tsallis_family(3, 0.6)
        x = [0.2, -0.5, 0.9]
        for k, l, m in itertools.permutations(range(3)):
            assert abs(semi_hamiltonian_residual(fd, 1, x, k, l, m)) <= 1e-5
            assert abs(semi_hamiltonian_residual(an, 1, x, k, l, m)) <= 1e-12

    def test_wnl_rows_semi_hamiltonian(self):
        fam = wnl_basis(4)
        for x in random_points(4, 5, seed=3):
            for j in range(1, 4):
                for k, l, s in itertools.permutations(range(4), 3):
                    assert abs(semi_hamiltonian_residual(fam, j, x, k, l, s)) <= 1e-9


class TestSymmetry:
    def test_two_phase_closed_form(self):
        sym = VectorField(two_phase_lambda, lambda x: np.array(
            [[-x[0] + x[1], x[0] + x[1]], [x[0] + x[1], x[0] - x[1]]]))
        assert sym([1, 2]).tolist() == [3.5, 0.5]
        for k, l in ((0, 1), (1, 0)):
            assert abs(symmetry_residual(swap_family(), 1, sym, [1, 2], k, l)) <= 1e-10

    def test_flow_commutes_with_itself(self):
        fam = tsallis_family(3, 0.4)
        for k, l in itertools.permutations(range(3), 2):
            assert symmetry_residual(fam, 1, fam.flows[1], [0.1, 0.5, -0.3], k, l) == 0.0

    def test_translation_symmetry(self):
        fam = tsallis_family(3, 0.4)
        for k, l in itertools.permutations(range(3), 2):
            assert symmetry_residual(fam, 1, VectorField.ones(3), [0.1, 0.5, -0.3], k, l) == 0.0

    def test_pole(self):
        with pytest.raises(PoleError):
            symmetry_residual(swap_family(), 1, VectorField(two_phase_lambda), [1.0, 1.0], 0, 1)


class TestConservation:
    def test_additive_entropy_conserved_by_tsallis_flow(self):
        s0 = ScalarField(lambda x: float(np.sum(x)))
        assert abs(conservation_residual(tsallis_family(2, 0.5), 1, s0, [1, 2], 0, 1)) <= 1e-8

    def test_constant_speeds(self):
        fam = SpeedFamily.with_unit_flow(2, VectorField.constant([1.0, 3.0]))
        s = ScalarField(lambda x: x[0] ** 2 + 3 * x[1], lambda x: np.array([2 * x[0], 3.0]),
                        lambda x: np.diag([2.0, 0.0]))
        assert conservation_residual(fam, 1, s, [0.4, 0.2], 0, 1) == 0.0

    def test_hand_example(self):
        s = ScalarField(lambda x: x[0] * x[1], lambda x: np.array([x[1], x[0]]),
                        lambda x: np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert conservation_residual(swap_family(), 1, s, [1, 2], 0, 1) == pytest.approx(2.0)


class TestLax:
    def test_tsallis_speed_from_lax(self):
        s0 = ScalarField(lambda x: float(np.sum(x)))
        lam = ScalarField(lambda x: -TsallisEntropy(0.5)(x))
        assert lax_speed(s0, lam, [1, 2], 0) == pytest.approx(2.0, abs=1e-9)

    def test_self_conjugate(self):
        s = TsallisEntropy(0.3).field()
        neg = ScalarField(lambda x: -s(x), lambda x: -s.gradient(x))
        for k in range(3):
            assert lax_speed(s, neg, [0.2, 0.4, 0.9], k) == pytest.approx(1.0)

    def test_one_phase_alpha(self):
        eos = vdw_eos(VdwParams())
        s = ScalarField(lambda x: x[0], lambda x: np.array([1.0]))
        lam = ScalarField(lambda x: 0.0, lambda x: np.array([-float(eos.alpha(x[0]))]))
        assert lax_speed(s, lam, [2.0], 0) == pytest.approx(float(eos.alpha(2.0)))

    def test_degenerate_entropy(self):
        s = ScalarField(lambda x: x[1], lambda x: np.array([0.0, 1.0]))
        with pytest.raises(DegenerateEntropyError):
            lax_speed(s, s, [1.0, 2.0], 0)

    @given(st.floats(-1.5, 1.5), st.lists(st.floats(-1, 1), min_size=2, max_size=4), st.data())
    def test_matches_tsallis_speed(self, q, theta, data):
        k = data.draw(st.integers(0, len(theta) - 1))
        s0 = ScalarField(lambda x: float(np.sum(x)), lambda x: np.ones_like(x))
        ent = TsallisEntropy(q)
        lam = ScalarField(lambda x: -ent(x), lambda x: -ent.gradient(x))
        assert lax_speed(s0, lam, theta, k) == pytest.approx(tsallis_speed(q, theta, k), abs=1e-14)


class TestLinearDegeneracy:
    def test_tsallis(self):
        for q in (-0.5, 0.0, 0.7, 2.0):
            rep = is_linearly_degenerate(tsallis_family(4, q), 1, random_points(4, 5, 0))
            assert rep and rep.max_violation == 0.0

    def test_decoupled_hopf(self):
        fam = SpeedFamily.with_unit_flow(2, VectorField(lambda x: x.copy()))
        rep = is_linearly_degenerate(fam, 1, [[0.3, 0.4]])
        assert not rep
        assert rep.max_violation == pytest.approx(1.0)

    def test_wnl_rows(self):
        fam = wnl_basis(4)
        for j in range(4):
            assert is_linearly_degenerate(fam, j, random_points(4, 5, 1), tol=1e-9)

    def test_needs_samples(self):
        with pytest.raises(ValueError):
            is_linearly_degenerate(wnl_basis(2), 1, [])


class TestWnl:
    def test_examples(self):
        assert wnl_speed([9, 2, 3], 0, 2) == 6
        assert wnl_speed([1, 9, 3], 1, 1) == 4
        for n in range(1, 5):
            assert wnl_speed(list(range(n)), 0, 0) == 1

    def test_range(self):
        with pytest.raises(IndexError):
            wnl_speed([1, 2, 3], 0, 3)
        with pytest.raises(IndexError):
            wnl_flow(3, -1)

    @pytest.mark.parametrize("theta", [(1, 2, 3), (0.5, -1.5, 2.25, 3), (2, -1)])
    def test_symbolic_residue(self, theta):
        n = len(theta)
        for k in range(n):
            for j in range(n):
                assert wnl_speed(theta, k, j) == pytest.approx(residue_speed(theta, k, j), abs=1e-12)

    def test_basis_rows(self):
        np.testing.assert_array_equal(wnl_matrix([1, 2]), [[1, 1], [2, 1]])
        np.testing.assert_array_equal(wnl_matrix([5.0]), [[1.0]])
        assert wnl_matrix([1, 2, 3])[2].tolist() == [6, 3, 2]
        fam = wnl_basis(3)
        assert fam.m == 2
        np.testing.assert_array_equal(fam.speeds(1, [1, 2, 3]), [5, 4, 3])

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_vandermonde_determinant(self, n):
        for x in random_points(n, 5, n, lo=-2, hi=2):
            vdm = np.prod([x[i] - x[j] for i, j in itertools.combinations(range(n), 2)])
            assert abs(det(wnl_matrix(x))) == pytest.approx(abs(vdm), rel=1e-8)

    def test_analytic_derivatives(self):
        x = np.array([0.3, -0.7, 1.2, 0.5])
        for j in range(4):
            f = wnl_flow(4, j)
            np.testing.assert_allclose(f.jacobian(x), fd_jacobian(f, x), atol=1e-9)
            np.testing.assert_allclose(f.hessian(x), VectorField(f.eval, f.jac).hessian(x), atol=1e-7)

    @given(st.floats(-2, 2), st.lists(st.floats(-2, 2), min_size=1, max_size=5), st.data())
    def test_generating_identity(self, q, theta, data):
        k = data.draw(st.integers(0, len(theta) - 1))
        total = sum(q ** j * wnl_speed(theta, k, j) for j in range(len(theta)))
        assert total == pytest.approx(tsallis_speed(q, theta, k), abs=1e-12)


def one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


class TestGeneralSymmetry:
    def test_two_phase_unit_data(self):
        sym = build_general_symmetry(2, [one, one], (0, 0))
        c = sym.coefficients([1, 2])
        np.testing.assert_allclose(c, [-(1 + 4) / 2, 3.0], atol=1e-13)
        np.testing.assert_allclose(sym([1, 2]), [3.5, 0.5], atol=1e-13)
        for x in random_points(2, 10, 4, -3, 3):
            np.testing.assert_allclose(sym(x), two_phase_lambda(x), atol=1e-12)

    def test_zero_data(self):
        sym = build_general_symmetry(2, [zero, zero], (0, 0))
        assert np.all(sym([0.3, 1.4]) == 0)

    def test_one_sided_data(self):
        sym = build_general_symmetry(2, [one, zero], (0, 0))
        x = np.array([0.7, -1.3])
        np.testing.assert_allclose(sym.coefficients(x), [-0.7 ** 2 / 2, 0.7], atol=1e-13)
        fam = wnl_basis(2)
        for p in random_points(2, 10, 5):
            for k, l in ((0, 1), (1, 0)):
                assert abs(symmetry_residual(fam, 1, sym, p, k, l)) <= 1e-8

    def test_symbolic_three_phase_oracle(self):
        rng = np.random.default_rng(11)
        coeffs = rng.uniform(-1, 1, (3, 4))
        phi = [np.polynomial.Polynomial(c) for c in coeffs]
        base = (0.1, -0.2, 0.3)
        sym = build_general_symmetry(3, phi, base)
        # oracle: sympy cofactors, ratios and integrals
        t = sp.symbols("t1:4")
        xs = sp.Symbol("x")
        w = sp.Matrix(3, 3, lambda j, k: sp.Add(*[sp.Mul(*c) for c in itertools.combinations(
            [t[i] for i in range(3) if i != k], j)]) if j else 1)
        cs = []
        for j in range(3):
            cj = 0
            for i in range(3):
                ratio = sp.simplify(w.cofactor(j, i) / w.cofactor(2, i))
                assert ratio.free_symbols <= {t[i]}
                poly = sum(sp.Float(c) * xs ** p for p, c in enumerate(coeffs[i]))
                cj += sp.integrate(poly * ratio.subs(t[i], xs), (xs, base[i], t[i]))
            cs.append(cj)
        lam = (sp.Matrix([cs]) * w)
        f = sp.lambdify([t], list(lam), "numpy")
        for p in random_points(3, 5, 12):
            np.testing.assert_allclose(sym(p), f(p), atol=1e-11)

    @pytest.mark.parametrize("n", [2, 3])
    def test_random_polynomial_data(self, n):
        rng = np.random.default_rng(20 + n)
        phi = [np.polynomial.Polynomial(rng.uniform(-1, 1, rng.integers(1, 5))) for _ in range(n)]
        sym = build_general_symmetry(n, phi, np.zeros(n))
        fam = wnl_basis(n)
        for p in random_points(n, 15, 7):
            np.testing.assert_allclose(sym.jacobian(p), fd_jacobian(sym, p), atol=1e-7)
            for j in range(1, n):
                for k, l in itertools.permutations(range(n), 2):
                    assert abs(symmetry_residual(fam, j, sym, p, k, l)) <= 1e-8

    def test_commutes_with_tsallis_flow(self):
        sym = build_general_symmetry(3, [one] * 3, np.zeros(3))
        fam = tsallis_family(3, 0.8)
        for p in random_points(3, 5, 9):
            for k, l in itertools.permutations(range(3), 2):
                assert abs(symmetry_residual(fam, 1, sym, p, k, l)) <= 1e-8

    def test_hessian(self):
        sym = build_general_symmetry(2, [one, lambda x: x ** 2], (0, 0))
        h = sym.hessian([0.3, 0.9])
        ref = np.stack([VectorField(lambda y, k=k: fd_jacobian(sym, y)[k]).jacobian([0.3, 0.9])
                        for k in range(2)])
        np.testing.assert_allclose(h, ref, atol=1e-5)

    def test_cofactor_singularity(self):
        sym = GeneralSymmetry(3, [one] * 3, np.zeros(3))
        with pytest.raises(CofactorSingularityError):
            sym([0.5, 1.0, 1.0])

    def test_phi_count(self):
        with pytest.raises(ValueError):
            GeneralSymmetry(3, [one] * 2, np.zeros(3))

    def test_path_dependence_guard(self, monkeypatch):
        monkeypatch.setattr(GeneralSymmetry, "ratio_drift", lambda self, p: 1e-3)
        with pytest.raises(PathDependenceError):
            build_general_symmetry(2, [one, one], (0, 0))
