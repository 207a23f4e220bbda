import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from qemlab import (CellPartition, ConvergenceError, NoiseKernel, UlamOperator, assemble,
                    build_map, constant_weight, detect_period, dual, power_leading,
                    quasi_ergodic, solve_triple)
from qemlab.oracle import dense_perron, exact_conditioned_average
from qemlab.spectral import cyclic_eigenvectors, dump_triple, spectral_radius

from conftest import GOLDEN_RATE, random_substochastic


def test_power_leading_on_averaging_matrix():
    lam, v = power_leading(UlamOperator.from_matrix([[0.5, 0.5], [0.5, 0.5]]))
    assert lam == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(v, [1.0, 1.0])


def test_power_leading_golden_hole(golden_benchmark):
    _, _, op = golden_benchmark
    lam, v = power_leading(op)
    assert abs(lam - GOLDEN_RATE) <= 1e-2
    assert np.all(v >= 0) and v.max() == 1.0
    assert np.max(np.abs(op.matrix @ v - lam * v)) <= 1e-12 * lam


def test_power_leading_hole_half_to_three_quarters():
    # the [1/2, 3/4) hole forbids the word "10": the survivors have zero entropy
    # and the growth rate tends to 1/2 (see the golden-hole test for (1+sqrt 5)/4)
    m = build_map("doubling", hole=[(0.5, 0.75)])
    p = CellPartition(m.state_space, 4096)
    lam, _ = power_leading(assemble(m, NoiseKernel(1e-3), None, p))
    assert 0.5 < lam < 0.65


def test_power_leading_flags_two_cycle():
    with pytest.raises(ConvergenceError) as info:
        power_leading(UlamOperator.from_matrix([[0.0, 2.0], [0.5, 0.0]]), max_iter=500)
    assert info.value.residual > 0


def test_power_leading_zero_operator():
    with pytest.raises(ValueError):
        power_leading(UlamOperator.from_matrix(np.zeros((3, 3))))


def test_spectral_radius_dense_and_sparse(golden_benchmark):
    _, _, op = golden_benchmark
    lam, _ = power_leading(op)
    assert spectral_radius(op) == pytest.approx(lam, rel=1e-10)
    assert spectral_radius(np.array([[0.0, 2.0], [0.5, 0.0]])) == pytest.approx(1.0)


# period


def test_doubling_operator_is_aperiodic():
    m = build_map("doubling")
    p = CellPartition(m.state_space, 64)
    assert detect_period(assemble(m, NoiseKernel(1e-2), None, p)).period == 1


def test_two_block_cycle():
    A = np.array([[0, 0, .3, .6], [0, 0, .5, .2], [.4, .4, 0, 0], [.1, .7, 0, 0]])
    ps = detect_period(UlamOperator.from_matrix(A))
    assert ps.period == 2
    got = sorted(tuple(c.tolist()) for c in ps.classes)
    assert got == [(0, 1), (2, 3)]


def _three_cycle(rng):
    A = np.zeros((6, 6))
    blocks = [(0, 2), (2, 4), (4, 0)]
    for src, dst in blocks:
        A[src:src + 2, dst:dst + 2] = rng.uniform(0.1, 0.5, (2, 2))
    return A


def test_three_cycle_and_rotated_eigenvectors():
    A = _three_cycle(np.random.default_rng(4))
    op = UlamOperator.from_matrix(A)
    ps = detect_period(op)
    assert ps.period == 3
    tri = solve_triple(op)
    assert tri.period == 3
    assert tri.lam == pytest.approx(dense_perron(A).lam, rel=1e-10)
    # mass of C_i lands in C_{i-1}
    for i, c in enumerate(tri.cyclic_classes):
        ind = np.zeros(6)
        ind[c] = 1.0
        carried = np.flatnonzero(A @ ind > 0)
        assert set(carried) <= set(tri.cyclic_classes[(i - 1) % 3].tolist())
    for ell, f in enumerate(cyclic_eigenvectors(op, tri, tri.lam, tri.cyclic_classes)):
        mu = tri.lam * np.exp(2j * np.pi * ell / 3)
        np.testing.assert_allclose(A @ f, mu * f, atol=1e-9)
        assert np.linalg.norm(f) > 0.1


# triple


def test_closed_doubling_triple():
    m = build_map("doubling")
    p = CellPartition(m.state_space, 256)
    tri = solve_triple(assemble(m, NoiseKernel(1e-2), None, p))
    assert tri.lam == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(tri.g, 1.0, atol=1e-9)
    np.testing.assert_allclose(tri.m, 1.0, atol=1e-9)
    np.testing.assert_allclose(quasi_ergodic(tri).weights, 1 / 256, atol=1e-12)


def test_constant_log_two_weight_gives_entropy():
    m = build_map("doubling")
    p = CellPartition(m.state_space, 256)
    tri = solve_triple(assemble(m, NoiseKernel(1e-2), constant_weight(np.log(2)), p))
    assert tri.log_lambda == pytest.approx(np.log(2), abs=1e-12)
    np.testing.assert_allclose(tri.g, 1.0, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_random_triple_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    Q = random_substochastic(rng, 5)
    vols = rng.uniform(0.5, 2.0, 5)
    tri = solve_triple(UlamOperator.from_matrix(Q, volumes=vols))
    ref = dense_perron(Q, vols)
    assert tri.lam == pytest.approx(ref.lam, abs=1e-8)
    np.testing.assert_allclose(tri.g, ref.g, atol=1e-8)
    np.testing.assert_allclose(tri.m, ref.m, atol=1e-8)
    assert np.sum(tri.g * tri.m * vols) == pytest.approx(1.0, abs=1e-9)
    assert tri.residual <= 1e-10


def test_triple_invariants_on_logistic():
    m = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
    p = CellPartition(m.state_space, 2048)
    op = assemble(m, NoiseKernel(1e-3), None, p)
    tri = solve_triple(op)
    assert np.all(tri.g >= 0) and np.all(tri.m >= 0)
    assert abs(tri.lam - tri.lam_dual) <= 1e-8
    assert np.max(np.abs(op.matrix @ tri.g - tri.lam * tri.g)) <= 1e-9
    nu = quasi_ergodic(tri)
    assert nu.weights.sum() == pytest.approx(1.0, abs=1e-12)
    pos = set(np.flatnonzero(tri.g > 0)) & set(np.flatnonzero(tri.m > 0))
    assert set(nu.support.tolist()) <= pos


@given(st.floats(-4.0, 4.0))
def test_weight_shift_invariance(c):
    m = build_map("doubling", hole=[(0.75, 1.0)])
    p = CellPartition(m.state_space, 128)
    k = NoiseKernel(1e-2)
    base = solve_triple(assemble(m, k, None, p))
    moved = solve_triple(assemble(m, k, constant_weight(c), p))
    assert moved.lam == pytest.approx(np.exp(c) * base.lam, rel=1e-10)
    np.testing.assert_allclose(moved.g, base.g, atol=1e-10)
    np.testing.assert_allclose(moved.m, base.m, atol=1e-10)
    np.testing.assert_allclose(quasi_ergodic(moved).weights, quasi_ergodic(base).weights,
                               atol=1e-10)


def test_dual_and_primal_rates_agree(golden_benchmark):
    _, _, op = golden_benchmark
    assert power_leading(op)[0] == pytest.approx(power_leading(dual(op))[0], abs=1e-8)


def test_g_positive_on_dominant_core(golden_benchmark):
    from qemlab import survivor_cells
    m, p, op = golden_benchmark
    tri = solve_triple(op)
    cover = survivor_cells(m, p, 12)
    assert np.all(tri.g[op.positions(cover)] > 0)
    # cells of [3/8, 1/2), away from the noise layer at its ends, land in the hole
    assert np.all(tri.g[op.positions(np.arange(1536 + 4, 2048 - 4))] == 0)


def test_quasi_ergodic_rejects_disjoint_supports():
    from qemlab.spectral import SpectralTriple
    tri = SpectralTriple(1.0, np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.ones(2), np.arange(2))
    with pytest.raises(ValueError):
        quasi_ergodic(tri)


def test_dump_triple(tmp_path, golden_benchmark):
    import json
    _, _, op = golden_benchmark
    tri = solve_triple(op)
    paths = dump_triple(tri, tmp_path, quasi_ergodic(tri))
    assert json.loads(paths[0].read_text())["lambda"] == tri.lam
    assert paths[3].read_text().startswith("cell_index,weight\n")
    assert len(paths[1].read_text().splitlines()) == op.n + 1


# conditioned averages against the exact Feynman-Kac formula


def _chain_errors(seed, size, n, relative=False):
    rng = np.random.default_rng(seed)
    Q = random_substochastic(rng, size)
    w = rng.uniform(0.5, 1.5, size)
    nu = quasi_ergodic(solve_triple(UlamOperator.from_matrix(w[:, None] * Q))).weights
    errs = []
    for j in range(size):
        h = np.eye(size)[j]
        est = exact_conditioned_average(Q, w, h, n)
        e = np.abs(est - nu[j])
        errs.append(np.max(e / nu[j] if relative else e))
    return max(errs), Q, w, nu


@pytest.mark.xfail(strict=True, reason="finite-n average carries an O(1/n) bias of ~5e-3 at n=200")
def test_five_state_occupation_to_1e_3_at_n_200():
    worst, *_ = _chain_errors(0, 5, 200)
    assert worst <= 1e-3


@pytest.mark.xfail(strict=True, reason="relative O(1/n) bias exceeds 1e-2 at n=500 on most chains")
def test_relative_error_at_n_500_for_small_chains():
    for seed in range(20):
        worst, *_ = _chain_errors(seed, 2 + seed % 7, 500, relative=True)
        assert worst <= 1e-2


@pytest.mark.parametrize("seed", range(8))
def test_occupation_bias_is_order_one_over_n(seed):
    size = 2 + seed % 7
    e200 = _chain_errors(seed, size, 200)[0]
    e800 = _chain_errors(seed, size, 800)[0]
    assert 200 * e200 < 5.0
    assert e800 <= 0.3 * e200 + 1e-12


@pytest.mark.parametrize("seed", range(8))
def test_richardson_extrapolated_occupation(seed):
    size = 2 + seed % 7
    _, Q, w, nu = _chain_errors(seed, size, 10)
    for j in range(size):
        h = np.eye(size)[j]
        a1 = exact_conditioned_average(Q, w, h, 400)
        a2 = exact_conditioned_average(Q, w, h, 800)
        np.testing.assert_allclose(2 * a2 - a1, nu[j], atol=1e-4)


def test_absolute_error_at_n_500():
    for seed in range(30):
        assert _chain_errors(seed, 2 + seed % 7, 500)[0] <= 1e-2
