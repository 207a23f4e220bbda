import numpy as np
import pytest
from hypothesis import given, strategies as st

from qemlab import CellPartition, Hole, build_map, geometric_weight, survivor_cells
from qemlab.dynamics import attracting_cycle, tabulated_weight
from qemlab.oracle import survivor_intervals


def test_logistic_value_at_half():
    m = build_map("logistic", {"a": 3.83})
    assert m.eval(0.5) == pytest.approx(3.83 * 0.25, abs=1e-15)
    assert float(m.eval(0.5)) == pytest.approx(0.9575)


def test_doubling_value_and_derivative():
    m = build_map("doubling")
    assert float(m.step(0.3)) == pytest.approx(0.6)
    assert float(m.deriv(0.3)) == 2.0
    assert float(m.step(0.7)) == pytest.approx(0.4)


def test_boole_hole_membership():
    m = build_map("boole", {"s": 0.06})
    assert bool(m.hole(0.03))
    assert bool(m.hole(0.97))
    assert not bool(m.hole(0.5))


def test_boole_inverse_branches_invert():
    m = build_map("boole", {"s": 0.06})
    y = np.linspace(0.01, 0.99, 50)
    for lo, hi, fwd, inv in m.branches:
        x = inv(y)
        assert np.all((x >= lo - 1e-12) & (x <= hi + 1e-12))
        np.testing.assert_allclose(fwd(x), y, atol=1e-12)


@pytest.mark.parametrize("id_, params", [
    ("nope", {}), ("logistic", {"a": 4.5}), ("logistic", {"a": 0.0}), ("boole", {"s": 0.2}),
])
def test_invalid_families_rejected(id_, params):
    with pytest.raises(ValueError):
        build_map(id_, params)


def test_overlapping_holes_rejected():
    with pytest.raises(ValueError):
        Hole.intervals([(0.1, 0.3), (0.2, 0.4)])


def test_attracting_cycle_of_logistic():
    m = build_map("logistic", {"a": 3.83})
    cyc = attracting_cycle(m, 3)
    np.testing.assert_allclose(np.sort(cyc), [0.1561493, 0.5046665, 0.9574166], atol=1e-6)
    # period-3 orbit
    x = cyc[0]
    for _ in range(3):
        x = float(m.eval(x))
    assert x == pytest.approx(cyc[0], abs=1e-12)


def test_quadratic_map_on_rectangle():
    m = build_map("quadratic", {"c_re": -1.0, "c_im": 0.0, "radius": 2.0})
    z = np.array([0.5, 0.25])
    np.testing.assert_allclose(m.eval(z), [0.25 - 0.0625 - 1.0, 0.25], atol=1e-15)
    assert float(m.deriv(z)) == pytest.approx(4 * (0.25 + 0.0625))


@given(st.integers(1, 6).map(lambda k: 2 ** k + 3), st.integers(1, 2))
def test_partition_volumes_cover(res, dim):
    from qemlab.dynamics import StateSpace
    space = StateSpace("rectangle", (-1.0,) * dim, (2.0,) * dim) if dim == 2 else \
        StateSpace("interval", (0.0,), (1.0,))
    p = CellPartition(space, res)
    assert abs(p.volumes.sum() - space.volume) <= 1e-12 * space.volume
    lo = p.cells[..., 0]
    hi = p.cells[..., 1]
    assert np.all(hi > lo)


def test_locate_round_trips_centers():
    p = CellPartition(build_map("doubling").state_space, 64)
    np.testing.assert_array_equal(p.locate(p.centers()), np.arange(64))


def test_quadrature_weights_sum_to_one():
    p = CellPartition(build_map("quadratic").state_space, 8)
    nodes, w = p.quadrature(3)
    assert nodes.shape == (64, 9, 2)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_geometric_weight_family():
    m = build_map("logistic", {"a": 3.83})
    x = np.array([0.1, 0.3])
    np.testing.assert_allclose(geometric_weight(m, 0.25)(x), 0.75 * np.log(np.abs(m.deriv(x))))
    assert geometric_weight(m, 1.0).constant == 0.0


def test_tabulated_weight_is_piecewise_constant():
    p = CellPartition(build_map("doubling").state_space, 4)
    w = tabulated_weight(p, [0.0, -1.0, -2.0, -3.0])
    np.testing.assert_array_equal(w(np.array([0.1, 0.3, 0.6, 0.9])), [0.0, -1.0, -2.0, -3.0])


# survivor cover


def test_survivors_without_hole_are_everything():
    m = build_map("doubling")
    p = CellPartition(m.state_space, 32)
    for n in (0, 1, 5):
        np.testing.assert_array_equal(survivor_cells(m, p, n), np.arange(32))


def test_survivor_cells_eight_dyadic_cells():
    # by hand: 4, 5 are the hole; 2 -> [1/2,3/4) and 6 -> [1/2,3/4) die in one step
    m = build_map("doubling", hole=[(0.5, 0.75)])
    p = CellPartition(m.state_space, 8)
    np.testing.assert_array_equal(survivor_cells(m, p, 1), [0, 1, 3, 7])


@pytest.mark.parametrize("hole", [[(0.5, 0.75)], [(0.75, 1.0)], [(0.25, 0.375)]])
def test_survivor_cells_match_symbolic_cylinders(hole):
    m = build_map("doubling", hole=hole)
    for n in range(0, 7):
        res = 2 ** (n + 4)
        p = CellPartition(m.state_space, res)
        iv = survivor_intervals(m, n)
        lo, hi = p.cells[:, 0, 0], p.cells[:, 0, 1]
        exact = np.flatnonzero(
            [np.any((iv[:, 0] <= a + 1e-15) & (iv[:, 1] >= b - 1e-15)) for a, b in zip(lo, hi)])
        np.testing.assert_array_equal(survivor_cells(m, p, n), exact)


@given(st.integers(0, 8))
def test_survivor_cells_monotone(n):
    m = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
    p = CellPartition(m.state_space, 512)
    a, b = survivor_cells(m, p, n), survivor_cells(m, p, n + 1)
    assert set(b.tolist()) <= set(a.tolist())


def test_logistic_survivor_cover_holds_zero_and_cantor_set():
    m = build_map("logistic", {"a": 3.83, "hole_radius": 1e-3})
    p = CellPartition(m.state_space, 4096)
    cov = survivor_cells(m, p, 20)
    assert 0 in cov
    assert p.locate(0.524) in cov   # a point of the unstable 3-cycle
    # basin of the attractor: orbits from 0.3 take many steps to reach the small hole
    deep = survivor_cells(m, p, 80)
    assert p.locate(0.3) not in deep
    assert deep.size < cov.size
