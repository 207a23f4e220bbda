import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from qemlab import (CellPartition, NoiseKernel, UlamOperator, active_cells, apply, assemble,
                    build_map, constant_weight, dual, dump_operator, load_operator)
from qemlab.dynamics import WeightFunction, geometric_weight

from conftest import random_substochastic


def _doubling(hole=None, res=64, eps=1e-2, weight=None):
    m = build_map("doubling", hole=hole)
    p = CellPartition(m.state_space, res)
    return m, p, assemble(m, NoiseKernel(eps), weight, p)


def test_four_cell_doubling_is_the_classic_ulam_matrix():
    _, _, op = _doubling(res=4, eps=1e-6)
    expected = np.array([[.5, .5, 0, 0], [0, 0, .5, .5], [.5, .5, 0, 0], [0, 0, .5, .5]])
    np.testing.assert_allclose(op.row_sums(), 1.0, atol=1e-9)
    np.testing.assert_allclose(op.matrix.toarray(), expected, atol=1e-5)


def test_markov_rows_without_hole():
    m = build_map("logistic", {"a": 3.83})
    p = CellPartition(m.state_space, 256)
    op = assemble(m, NoiseKernel(1e-2), None, p)
    # interval: only rows pushing mass past 0 or 1 lose anything
    rs = op.row_sums()
    assert np.all(op.matrix.data >= 0)
    assert np.all(rs <= 1 + 1e-9)
    interior = (p.centers() > 0.05) & (p.centers() < 0.45)
    np.testing.assert_allclose(rs[interior], 1.0, atol=1e-9)


def _hole_loss(centers, eps, lo=0.5, hi=0.75):
    c = (2 * centers) % 1.0
    return np.clip(np.minimum(c + eps, hi) - np.maximum(c - eps, lo), 0, None) / (2 * eps)


def test_hole_rows_lose_exactly_the_overlap():
    m, p, op = _doubling(hole=[(0.5, 0.75)], res=128, eps=1e-2)
    # Gauss nodes of each active cell, overlap averaged with Gauss weights
    nodes, w = p.quadrature(3, op.cells)
    loss = (_hole_loss(nodes, 1e-2) * w).sum(axis=1)
    np.testing.assert_allclose(op.row_sums(), 1.0 - loss, atol=1e-12)
    assert np.any(loss > 0)


def test_hole_cells_are_inactive():
    m, p, op = _doubling(hole=[(0.5, 0.75)], res=8)
    np.testing.assert_array_equal(op.cells, [0, 1, 2, 3, 6, 7])


def test_weight_shift_is_exact_scaling():
    m = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
    p = CellPartition(m.state_space, 256)
    k = NoiseKernel(5e-3)
    w = geometric_weight(m, 0.5)
    c = -0.7
    base = assemble(m, k, w, p)
    shifted = assemble(m, k, w.shifted(c), p)
    np.testing.assert_allclose(shifted.matrix.toarray(), np.exp(c) * base.matrix.toarray(),
                               rtol=1e-14, atol=0)


def test_constant_weight_scales_markov_matrix():
    _, p, base = _doubling(res=32)
    m = build_map("doubling")
    op = assemble(m, NoiseKernel(1e-2), constant_weight(np.log(2)), p)
    np.testing.assert_allclose(op.matrix.toarray(), 2 * base.matrix.toarray(), rtol=1e-14)
    assert op.weight_applied and not base.weight_applied


@given(st.floats(-3, 0), st.floats(1e-3, 0.2), st.sampled_from([16, 32, 64]))
def test_sub_markov_with_nonpositive_weight(c, eps, res):
    m = build_map("doubling", hole=[(0.75, 1.0)])
    p = CellPartition(m.state_space, res)
    op = assemble(m, NoiseKernel(eps), WeightFunction(lambda x: c * np.abs(np.sin(7 * x))), p)
    assert np.all(op.matrix.data >= 0)
    assert np.all(op.row_sums() <= 1 + 1e-9)


def test_two_dimensional_rows_are_markov_inside():
    m = build_map("quadratic", {"c_re": -1.0, "c_im": 0.0, "radius": 2.0})
    p = CellPartition(m.state_space, 32)
    op = assemble(m, NoiseKernel(0.05, dim=2), None, p)
    assert np.all(op.row_sums() <= 1 + 1e-9)
    assert np.isclose(op.row_sums().max(), 1.0, atol=1e-9)


# dual


def test_dual_with_unit_volumes_is_transpose():
    rng = np.random.default_rng(0)
    Q = random_substochastic(rng, 5)
    L = dual(UlamOperator.from_matrix(Q))
    np.testing.assert_array_equal(L.matrix.toarray(), Q.T)


def test_pairing_identity():
    m = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
    p = CellPartition(m.state_space, 200)  # non-dyadic volumes
    op = assemble(m, NoiseKernel(1e-2), None, p)
    L = dual(op)
    v = op.volumes
    rng = np.random.default_rng(1)
    for _ in range(100):
        f, g = rng.standard_normal((2, op.n))
        lhs = np.sum(v * (L.matrix @ f) * g)
        rhs = np.sum(v * f * (op.matrix @ g))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_dual_spectrum_matches():
    _, _, op = _doubling(hole=[(0.75, 1.0)], res=64)
    ep = np.sort(np.abs(np.linalg.eigvals(op.matrix.toarray())))[::-1][:4]
    el = np.sort(np.abs(np.linalg.eigvals(dual(op).matrix.toarray())))[::-1][:4]
    np.testing.assert_allclose(ep, el, atol=1e-12)


# apply


def test_apply_zero_and_linearity():
    _, _, op = _doubling(res=64)
    assert not np.any(apply(op, np.zeros(op.n)))
    rng = np.random.default_rng(2)
    f, g = rng.random((2, op.n))
    np.testing.assert_allclose(apply(op, f + g), apply(op, f) + apply(op, g), atol=1e-12)
    out = np.empty(op.n)
    assert apply(op, f, out=out) is out


def test_apply_dimension_mismatch():
    _, _, op = _doubling(res=16)
    with pytest.raises(ValueError):
        apply(op, np.ones(15))


def test_fixed_point_cell_maps_near_itself():
    m = build_map("logistic", {"a": 3.83})
    p = CellPartition(m.state_space, 1024)
    op = assemble(m, NoiseKernel(1e-6), None, p)
    e0 = np.zeros(op.n)
    e0[0] = 1.0
    # P 1_{C0}(x) is the chance to land in cell 0: only cells near 0 and near 1 reach it
    reach = np.flatnonzero(apply(op, e0) > 1e-12)
    np.testing.assert_array_equal(reach, [0, 1023])
    # and mass started in cell 0 stays in a few cells near 0
    stay = np.flatnonzero(dual(op).matrix @ e0 > 1e-12)
    assert stay.max() <= 4


# assembly errors and persistence


def test_assembly_errors():
    m = build_map("doubling")
    p = CellPartition(m.state_space, 8)
    with pytest.raises(ValueError):
        assemble(m, NoiseKernel(0.0), None, p)
    with pytest.raises(ValueError):
        assemble(m, NoiseKernel(0.1), None, p, active=[])
    with pytest.raises(ValueError):
        assemble(m, NoiseKernel(0.1), WeightFunction(lambda x: np.log(x - 0.5)), p)


def test_zero_operator_is_flagged():
    m = build_map("doubling", hole=[(0.0, 0.5)])
    p = CellPartition(m.state_space, 8)
    # [3/8, 1/2) maps onto [3/4, 1), which is not active
    op = assemble(m, NoiseKernel(0.0), None, p, active=[3], deterministic=True)
    assert op.is_zero and "zero" in op.flags


def test_deterministic_ulam_rows():
    m = build_map("doubling")
    p = CellPartition(m.state_space, 8)
    op = assemble(m, NoiseKernel(0.0), None, p, deterministic=True)
    np.testing.assert_allclose(op.row_sums(), 1.0, atol=1e-14)
    assert set(op.matrix[0].indices) == {0, 1}


def test_dump_round_trip_is_bit_exact(tmp_path):
    m = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
    p = CellPartition(m.state_space, 300)
    op = assemble(m, NoiseKernel(3e-3), geometric_weight(m, 0.3), p)
    csv_path, json_path = dump_operator(op, tmp_path / "op")
    back = load_operator(tmp_path / "op", partition=p)
    assert (back.matrix != op.matrix).nnz == 0
    np.testing.assert_array_equal(back.matrix.data, op.matrix.data)
    np.testing.assert_array_equal(back.cells, op.cells)
    assert back.epsilon == op.epsilon and back.weight_id == op.weight_id
    # dump of the reload is byte-identical
    dump_operator(back, tmp_path / "again")
    assert (tmp_path / "again.csv").read_bytes() == csv_path.read_bytes()


def test_load_rejects_wrong_volumes(tmp_path):
    _, p, op = _doubling(res=16)
    dump_operator(op, tmp_path / "op")
    with pytest.raises(ValueError):
        load_operator(tmp_path / "op", volumes=np.full(16, 0.5))


def test_submatrix_and_positions():
    _, _, op = _doubling(hole=[(0.5, 0.75)], res=8)
    sub = op.submatrix(np.array([0, 1, 7]))
    np.testing.assert_array_equal(sub.matrix.toarray(),
                                  op.matrix.toarray()[np.ix_([0, 1, 5], [0, 1, 5])])
    np.testing.assert_array_equal(op.positions([6, 7]), [4, 5])
    with pytest.raises(ValueError):
        op.submatrix(np.array([4]))
