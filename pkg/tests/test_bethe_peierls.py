import numpy as np
import pytest

from ptising.bethe_peierls import (
    BPCluster,
    ClusterKind,
    Phase,
    bp_phase_line,
    bp_residual,
    bp_roots,
    build_effective_af,
    build_effective_f,
    build_six_spin,
    cluster_ground,
    solve_bp,
)

# spin-up first, spin 0 as the leading Kronecker factor
X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])
I2 = np.eye(2)


def op(o, i, n):
    return np.kron(np.kron(np.eye(2**i), o), np.eye(2 ** (n - i - 1)))


def af_oracle(m, d, j, g):
    j = abs(j)
    return (
        d * (np.kron(X, I2) + 2 * np.kron(I2, X))
        - 2 * j * np.kron(Z, Z)
        - 2 * j * m * np.kron(I2, Z)
        + 1j * g * (np.kron(Z, I2) + 2 * np.kron(I2, Z))
    )


def f_oracle(m, d, j, g):
    return (
        d * (np.kron(X, I2) + 2 * np.kron(I2, X))
        - 2 * j * np.kron(Z, Z)
        - 2 * j * m * np.kron(I2, Z)
        + 1j * g * (np.kron(Z, I2) - 2 * np.kron(I2, Z))
    )


def six_oracle(m, d, j, g):
    n = 6
    a = abs(j)
    h = sum(d * op(X, i, n) for i in range(n)).astype(complex)
    for i in range(n):
        sign = 1.0 if (j < 0 or i % 2 == 0) else -1.0
        h += 1j * g * sign * op(Z, i, n)
    for i in range(n - 1):
        h -= a * op(Z, i, n) @ op(Z, i + 1, n)
    h -= 2 * a * m * (op(Z, 0, n) + op(Z, n - 1, n))
    return h


def cl(kind, j, g, d=1.0):
    return BPCluster(ClusterKind(kind), d, j, g)


@pytest.mark.parametrize("m, j, g", [(0.0, -0.5, 0.0), (0.3, -0.5, 0.4), (-0.7, -1.2, 1.1)])
def test_af_matrix_oracle(m, j, g):
    np.testing.assert_allclose(build_effective_af(m, cl("two_spin_af", j, g)), af_oracle(m, 1.0, j, g), atol=1e-15)


@pytest.mark.parametrize("m, j, g", [(0.0, 0.3, 0.5), (0.4, 0.8, 1.2)])
def test_f_matrix_oracle(m, j, g):
    np.testing.assert_allclose(build_effective_f(m, cl("two_spin_f", j, g)), f_oracle(m, 1.0, j, g), atol=1e-15)


@pytest.mark.parametrize("m, j, g", [(0.2, 0.7, 0.3), (0.5, -0.6, 0.9)])
def test_six_spin_oracle(m, j, g):
    h = build_six_spin(m, cl("six_spin", j, g))
    assert h.shape == (64, 64)
    np.testing.assert_allclose(h, six_oracle(m, 1.0, j, g), atol=1e-14)


def test_matrices_traceless():
    for m in (0.0, 0.4, 1.3):
        for g in (0.0, 0.7):
            assert abs(np.trace(build_effective_af(m, cl("two_spin_af", -0.8, g)))) < 1e-14
            assert abs(np.trace(build_effective_f(m, cl("two_spin_f", 0.8, g)))) < 1e-14
            assert abs(np.trace(build_six_spin(m, cl("six_spin", 0.8, g)))) < 1e-13


def test_even_center_is_conjugate():
    p = cl("two_spin_f", 0.6, 0.9)
    for m in (0.0, 0.35, 1.7):
        np.testing.assert_array_equal(build_effective_f(m, p, even_center=True), np.conj(build_effective_f(m, p)))


def test_hermitian_limit_af_equals_f():
    np.testing.assert_allclose(
        build_effective_af(0.3, cl("two_spin_af", -0.7, 0.0)), build_effective_f(0.3, cl("two_spin_f", 0.7, 0.0))
    )


def test_classical_limit_polarized():
    _, v, _ = cluster_ground(build_effective_af(1.0, cl("two_spin_af", -200.0, 0.0)))
    sz0 = np.real(np.vdot(v, np.kron(Z, I2) @ v))
    assert sz0 == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("kind, j", [("two_spin_af", -0.7), ("two_spin_f", 0.9), ("six_spin", 0.9)])
def test_residual_zero_and_odd_at_gamma_zero(kind, j):
    p = cl(kind, j, 0.0)
    assert abs(bp_residual(0.0, kind, p)) < 1e-12
    for m in (0.05, 0.3, 0.9, 2.5):
        r = bp_residual(m, kind, p)
        assert abs(r.imag) == 0.0
        assert abs(bp_residual(-m, kind, p) + r) <= 1e-12


def test_residual_growth_sign_strong_coupling():
    # at strong coupling the cluster magnetization exceeds the imposed field
    assert bp_residual(0.9, "two_spin_f", cl("two_spin_f", 3.0, 0.0)).real > 0


def test_even_odd_residual_conjugation():
    p = cl("two_spin_f", 0.5, 0.7)
    for m in (0.1, 0.6):
        _, v_odd, _ = cluster_ground(build_effective_f(m, p))
        _, v_even, _ = cluster_ground(build_effective_f(m, p, even_center=True))
        zdiff = np.kron(Z, I2) - np.kron(I2, Z)
        r_odd = np.vdot(v_odd, zdiff @ v_odd)
        r_even = np.vdot(v_even, zdiff @ v_even)
        assert r_even == pytest.approx(np.conj(r_odd), abs=1e-12)


def test_no_coupling_is_paramagnetic():
    for kind in ClusterKind:
        s = solve_bp(kind, cl(kind, 0.0, 0.4))
        assert s.phase is Phase.PARAMAGNETIC
        assert s.roots == (0.0,)


def test_hermitian_onset_matches_residual_scan():
    js = np.linspace(0.2, 1.2, 51)
    ms = np.linspace(1e-3, 3.0, 600)
    ordered = []
    for j in js:
        r = np.array([bp_residual(m, "two_spin_f", cl("two_spin_f", j, 0.0)).real for m in ms])
        ordered.append(bool(np.any(r[:-1] * r[1:] < 0)))
    onset = js[np.argmax(ordered)]
    pts, _ = bp_phase_line("two_spin_f", 0.0, j_grid=np.linspace(0.02, 1.5, 75))
    assert len(pts) == 1 and pts[0].ordered_side == "above"
    assert abs(pts[0].j_over_delta - onset) <= 0.03


def test_onset_is_continuous():
    pts, _ = bp_phase_line("two_spin_f", 0.0, j_grid=np.linspace(0.3, 1.2, 31))
    jc = pts[0].j_over_delta
    s = solve_bp("two_spin_f", cl("two_spin_f", jc + 0.01, 0.0), M_init=0.01)
    assert 0 < abs(s.magnetization) < 0.3


def test_ferro_reentrance_near_breaking_threshold():
    pts, _ = bp_phase_line("two_spin_f", 1.08, j_grid=np.linspace(0.02, 1.5, 75))
    assert [p.ordered_side for p in pts] == ["below", "above"]
    assert pts[0].j_over_delta < pts[1].j_over_delta


def test_roots_are_roots():
    p = cl("two_spin_af", -1.2, 0.3)
    for m in bp_roots("two_spin_af", p):
        assert abs(bp_residual(m, "two_spin_af", p)) < 1e-10


def test_solution_classification():
    s = solve_bp("two_spin_af", cl("two_spin_af", -1.4, 0.2))
    assert s.phase is Phase.ORDERED and s.converged
    assert abs(s.residual) < 1e-10
    assert s.roots[0] == 0.0
