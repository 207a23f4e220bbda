"""Map zoo, holes, weight functions and cell partitions.

States are floats for one-dimensional spaces (interval, circle) and
arrays of shape ``(..., 2)`` for planar rectangles.  Every map is
vectorized over leading axes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "StateSpace",
    "Hole",
    "MapSystem",
    "WeightFunction",
    "CellPartition",
    "build_map",
    "attracting_cycle",
    "cycle_hole",
    "constant_weight",
    "geometric_weight",
    "tabulated_weight",
    "survivor_cells",
    "MAP_IDS",
]

MAP_IDS = ("doubling", "logistic", "boole", "quadratic", "step")


@dataclass(frozen=True)
class StateSpace:
    """Axis-aligned box, optionally periodic (the circle R/Z).

    ``kind`` is one of ``"interval"``, ``"circle"``, ``"rectangle"``.
    """

    kind: str
    lower: tuple
    upper: tuple

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def periodic(self) -> bool:
        return self.kind == "circle"

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def wrap(self, x):
        if self.periodic:
            lo, hi = self.lower[0], self.upper[0]
            return lo + np.mod(np.asarray(x, dtype=float) - lo, hi - lo)
        return x

    def contains(self, x) -> np.ndarray:
        """Closed-box membership; always true on the circle."""
        x = np.asarray(x, dtype=float)
        if self.periodic:
            return np.isfinite(x)
        if self.dim == 1:
            return (x >= self.lower[0]) & (x <= self.upper[0])
        inside = np.ones(x.shape[:-1], dtype=bool)
        for k in range(self.dim):
            inside &= (x[..., k] >= self.lower[k]) & (x[..., k] <= self.upper[k])
        return inside


INTERVAL = StateSpace("interval", (0.0,), (1.0,))
CIRCLE = StateSpace("circle", (0.0,), (1.0,))


@dataclass(frozen=True)
class Hole:
    """Open set ``U`` given as a union of pairwise disjoint open boxes.

    Each box is ``(lo, hi)`` with per-axis tuples.  On the circle a box
    may have ``lo < 0`` or ``hi > 1``; membership is tested modulo 1.
    """

    boxes: tuple = ()
    periodic: bool = False
    dim: int = 1

    @classmethod
    def intervals(cls, pairs: Sequence[Sequence[float]], periodic: bool = False) -> "Hole":
        boxes = tuple(((float(a),), (float(b),)) for a, b in pairs)
        _check_disjoint_1d(boxes, periodic)
        return cls(boxes, periodic)

    @classmethod
    def rectangles(cls, boxes: Sequence) -> "Hole":
        out = tuple((tuple(map(float, lo)), tuple(map(float, hi))) for lo, hi in boxes)
        return cls(out, False, len(out[0][0]) if out else 2)

    @property
    def empty(self) -> bool:
        return len(self.boxes) == 0

    def __call__(self, x) -> np.ndarray:
        return self.contains(x)

    def contains(self, x) -> np.ndarray:
        """Strict-interior test; boundary points are not in the hole."""
        x = np.asarray(x, dtype=float)
        if self.empty:
            return np.zeros(x.shape if self.dim == 1 else x.shape[:-1], dtype=bool)
        out = None
        for lo, hi in self.boxes:
            if len(lo) == 1:
                if self.periodic:
                    d = np.mod(x - lo[0], 1.0)
                    inside = (d > 0) & (d < hi[0] - lo[0])
                else:
                    inside = (x > lo[0]) & (x < hi[0])
            else:
                inside = np.ones(x.shape[:-1], dtype=bool)
                for k in range(len(lo)):
                    inside &= (x[..., k] > lo[k]) & (x[..., k] < hi[k])
            out = inside if out is None else (out | inside)
        return out

    def measure(self) -> float:
        return float(sum(np.prod(np.subtract(hi, lo)) for lo, hi in self.boxes))


def _check_disjoint_1d(boxes, periodic):
    spans = sorted((lo[0], hi[0]) for lo, hi in boxes)
    for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
        if a1 < b0:
            raise ValueError(f"hole intervals overlap: ({a0}, {b0}) and ({a1}, {b1})")
    if periodic and len(spans) > 1 and spans[-1][1] - 1.0 > spans[0][0]:
        raise ValueError("hole intervals overlap across the circle seam")
    for a, b in spans:
        if not b > a:
            raise ValueError(f"empty hole interval ({a}, {b})")


@dataclass(frozen=True)
class MapSystem:
    """Deterministic map ``T`` with its Jacobian determinant and hole.

    ``branches`` optionally lists the monotone laps of a one-dimensional
    map as ``(lo, hi, forward, inverse)``; ``forward`` is the lap's
    continuous (unwrapped) branch.  The symbolic oracle uses them to pull
    intervals back exactly.
    """

    id: str
    state_space: StateSpace
    eval: Callable
    deriv: Callable
    hole: Hole
    params: Mapping[str, float] = field(default_factory=dict)
    branches: tuple = ()

    @property
    def dim(self) -> int:
        return self.state_space.dim

    def step(self, x):
        """Apply ``T`` and fold the result back onto the state space."""
        return self.state_space.wrap(self.eval(x))

    def alive(self, x) -> np.ndarray:
        """True where ``x`` lies in the state space and outside the hole."""
        return self.state_space.contains(x) & ~self.hole.contains(x)

    def with_hole(self, hole: Hole) -> "MapSystem":
        return MapSystem(self.id, self.state_space, self.eval, self.deriv,
                         hole, dict(self.params), self.branches)


@dataclass(frozen=True)
class WeightFunction:
    """Log-scale weight ``phi``; trajectories pick up ``exp(phi(X_n))``."""

    eval: Callable
    holder_note: str = ""
    id: str = "custom"
    constant: float | None = None

    def __call__(self, x):
        return self.eval(x)

    def shifted(self, c: float) -> "WeightFunction":
        base = self.eval
        const = None if self.constant is None else self.constant + c
        return WeightFunction(lambda x: base(x) + c, self.holder_note,
                              f"{self.id}+{c!r}", const)


def constant_weight(c: float = 0.0) -> WeightFunction:
    c = float(c)

    def phi(x):
        # scalar; callers broadcast against their state arrays
        return c

    return WeightFunction(phi, "constant", f"constant({c!r})", c)


def geometric_weight(m: MapSystem, t: float) -> WeightFunction:
    """``phi_t(x) = (1 - t) log|det dT(x)|``.

    ``t = 1`` is the unweighted process; ``t = 0`` makes the potential
    ``phi - log|det dT|`` vanish.
    """
    t = float(t)
    deriv = m.deriv

    def phi(x):
        with np.errstate(divide="ignore"):
            return (1.0 - t) * np.log(np.abs(deriv(x)))

    return WeightFunction(phi, f"(1-t) log|det dT| with t={t!r}",
                          f"geometric(t={t!r})", 0.0 if t == 1.0 else None)


def tabulated_weight(partition: "CellPartition", values) -> WeightFunction:
    """Weight that is constant on each cell of ``partition``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (partition.n_cells,):
        raise ValueError(f"expected {partition.n_cells} values, got {values.shape}")

    def phi(x):
        return values[partition.locate(x)]

    return WeightFunction(phi, "tabulated per cell", "tabulated")


# ---------------------------------------------------------------------------
# map families


def _doubling(params):
    def T(x):
        return 2.0 * np.asarray(x, dtype=float)

    def dT(x):
        return np.full(np.shape(x), 2.0) if np.ndim(x) else 2.0

    branches = ((0.0, 0.5, lambda x: 2.0 * np.asarray(x), lambda y: 0.5 * np.asarray(y)),
                (0.5, 1.0, lambda x: 2.0 * np.asarray(x) - 1.0,
                 lambda y: 0.5 * (np.asarray(y) + 1.0)))
    return CIRCLE, T, dT, branches


def _logistic(params):
    a = float(params.get("a", 3.83))
    if not 0.0 < a <= 4.0:
        raise ValueError(f"logistic parameter a={a} outside (0, 4]")

    def T(x):
        x = np.asarray(x, dtype=float)
        return a * x * (1.0 - x)

    def dT(x):
        return np.abs(a * (1.0 - 2.0 * np.asarray(x, dtype=float)))

    def inv_left(y):
        return 0.5 * (1.0 - np.sqrt(np.clip(1.0 - 4.0 * np.asarray(y) / a, 0.0, None)))

    def inv_right(y):
        return 0.5 * (1.0 + np.sqrt(np.clip(1.0 - 4.0 * np.asarray(y) / a, 0.0, None)))

    return INTERVAL, T, dT, ((0.0, 0.5, T, inv_left), (0.5, 1.0, T, inv_right))


def _boole_left(x):
    return x * (1.0 - x) / (1.0 - x - x * x)


def _boole_left_deriv(x):
    return (1.0 - 2.0 * x + 2.0 * x * x) / (1.0 - x - x * x) ** 2


def _boole_left_inverse(y):
    y = np.asarray(y, dtype=float)
    den = 2.0 * (y - 1.0)
    num = -(1.0 + y) + np.sqrt(5.0 * y * y - 2.0 * y + 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    return np.where(np.isclose(y, 1.0), 0.5, out)


def _boole(params):
    def T(x):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        left = x < 0.5
        xl = np.where(left, x, 1.0 - x)
        v = _boole_left(xl)
        return np.where(left, v, 1.0 - v)

    def dT(x):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        xl = np.where(x < 0.5, x, 1.0 - x)
        return _boole_left_deriv(xl)

    branches = ((0.0, 0.5, lambda x: _boole_left(np.asarray(x, dtype=float)), _boole_left_inverse),
                (0.5, 1.0, lambda x: 1.0 - _boole_left(1.0 - np.asarray(x, dtype=float)),
                 lambda y: 1.0 - _boole_left_inverse(1.0 - np.asarray(y))))
    return CIRCLE, T, dT, branches


def _quadratic(params):
    cr, ci = float(params.get("c_re", -1.0)), float(params.get("c_im", 0.0))
    r = float(params.get("radius", 2.0))

    def T(z):
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        return np.stack([x * x - y * y + cr, 2.0 * x * y + ci], axis=-1)

    def dT(z):
        # |det dT| = |p'(z)|^2 for a holomorphic map
        z = np.asarray(z, dtype=float)
        return 4.0 * (z[..., 0] ** 2 + z[..., 1] ** 2)

    return StateSpace("rectangle", (-r, -r), (r, r)), T, dT, ()


def _step(params):
    levels = np.asarray(params["levels"], dtype=float)
    n = len(levels)

    def T(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.floor(np.mod(x, 1.0) * n).astype(int), 0, n - 1)
        return levels[idx]

    def dT(x):
        return np.zeros(np.shape(x))

    return CIRCLE, T, dT, ()


_FAMILIES = {
    "doubling": _doubling,
    "logistic": _logistic,
    "boole": _boole,
    "quadratic": _quadratic,
    "step": _step,
}


def build_map(id: str, params: Mapping | None = None, hole=None) -> MapSystem:
    """Construct a map from the zoo.

    Parameters
    ----------
    id : str
        One of ``doubling``, ``logistic`` (param ``a``), ``boole`` (param
        ``s``, which also fixes the hole), ``quadratic`` (``c_re``,
        ``c_im``, ``radius``) or ``step`` (``levels``: a piecewise-constant
        circle map used to embed finite chains).
    params : mapping, optional
    hole : Hole or sequence of (lo, hi) pairs, optional
        For ``logistic`` a ``hole_radius`` param instead builds a ball
        around the attracting cycle (see :func:`cycle_hole`).
    """
    params = dict(params or {})
    if id not in _FAMILIES:
        raise ValueError(f"unknown map id {id!r}; expected one of {MAP_IDS}")
    space, T, dT, branches = _FAMILIES[id](params)

    if id == "boole":
        s = float(params.get("s", 0.06))
        if not 0.0 < s < 0.125:
            raise ValueError(f"Boole hole size s={s} outside (0, 1/8)")
        if hole is not None:
            raise ValueError("the Boole hole is fixed by the parameter s")
        hole = Hole.intervals([(-s, s)], periodic=True)
    if hole is None:
        hole = Hole(periodic=space.periodic, dim=space.dim)
    elif not isinstance(hole, Hole):
        hole = (Hole.intervals(hole, periodic=space.periodic) if space.dim == 1
                else Hole.rectangles(hole))

    m = MapSystem(id, space, T, dT, hole, params, branches)
    if id == "logistic" and "hole_radius" in params:
        if not hole.empty:
            raise ValueError("give either an explicit hole or hole_radius, not both")
        period = int(params.get("cycle_period", 3))
        cycle = attracting_cycle(m, period)
        m = m.with_hole(cycle_hole(cycle, float(params["hole_radius"])))
    return m


def attracting_cycle(m: MapSystem, period: int, x0: float = 0.5,
                     transient: int = 20000) -> np.ndarray:
    """Locate an attracting periodic orbit by forward iteration.

    Returns the sorted orbit points, refined by Newton steps on
    ``T^period(x) - x``.
    """
    x = float(x0)
    for _ in range(transient):
        x = float(m.step(x))
    for _ in range(50):
        y = x
        for _ in range(period):
            y = float(m.step(y))
        # deriv() is |T'|; Newton needs the signed slope of T^period
        d = _signed_cycle_derivative(m, x, period)
        if d == 1.0:
            break
        dx = (y - x) / (1.0 - d)
        x += dx
        if abs(dx) < 1e-15:
            break
    orbit = [x]
    for _ in range(period - 1):
        orbit.append(float(m.step(orbit[-1])))
    return np.sort(np.asarray(orbit))


def _signed_cycle_derivative(m: MapSystem, x: float, period: int) -> float:
    h = 1e-7
    y_plus, y_minus = x + h, x - h
    for _ in range(period):
        y_plus, y_minus = float(m.eval(y_plus)), float(m.eval(y_minus))
    return (y_plus - y_minus) / (2 * h)


def cycle_hole(points, radius: float, periodic: bool = False) -> Hole:
    """Union of open balls of ``radius`` around the given points."""
    return Hole.intervals([(p - radius, p + radius) for p in sorted(points)], periodic)


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class CellPartition:
    """Uniform tensor grid of ``resolution`` cells per axis.

    Cells are ordered C-style (last axis fastest).
    """

    space: StateSpace
    resolution: int

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * self.dim

    @property
    def n_cells(self) -> int:
        return self.resolution ** self.dim

    @property
    def widths(self) -> np.ndarray:
        return (np.subtract(self.space.upper, self.space.lower)) / self.resolution

    @property
    def volumes(self) -> np.ndarray:
        return np.full(self.n_cells, float(np.prod(self.widths)))

    @property
    def cells(self) -> np.ndarray:
        """Array ``(n_cells, dim, 2)`` of per-axis cell bounds."""
        idx = np.array(np.unravel_index(np.arange(self.n_cells), self.shape)).T
        lo = np.asarray(self.space.lower) + idx * self.widths
        return np.stack([lo, lo + self.widths], axis=-1)

    def centers(self) -> np.ndarray:
        c = self.cells.mean(axis=-1)
        return c[:, 0] if self.dim == 1 else c

    def edges(self, axis: int = 0) -> np.ndarray:
        lo, hi = self.space.lower[axis], self.space.upper[axis]
        return np.linspace(lo, hi, self.resolution + 1)

    def locate(self, x) -> np.ndarray:
        """Flat index of the cell containing each point (clipped to the grid)."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            x = self.space.wrap(x)
            k = np.floor((x - self.space.lower[0]) / self.widths[0]).astype(int)
            return np.clip(k, 0, self.resolution - 1)
        ks = []
        for a in range(self.dim):
            k = np.floor((x[..., a] - self.space.lower[a]) / self.widths[a]).astype(int)
            ks.append(np.clip(k, 0, self.resolution - 1))
        return np.ravel_multi_index(tuple(ks), self.shape)

    def sample_points(self, per_axis: int, cells=None) -> np.ndarray:
        """Evenly spaced interior points, ``(k + 1/2)/K`` within each cell.

        Returns shape ``(n, per_axis**dim)`` for 1-D and
        ``(n, per_axis**dim, dim)`` otherwise.
        """
        offsets = (np.arange(per_axis) + 0.5) / per_axis
        return self._tensor_points(offsets, cells)

    def quadrature(self, n_nodes: int, cells=None):
        """Gauss-Legendre nodes and weights per cell (weights sum to 1)."""
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        offsets = 0.5 * (x + 1.0)
        w = w / 2.0
        wts = np.array([np.prod(c) for c in itertools.product(w, repeat=self.dim)])
        return self._tensor_points(offsets, cells), wts

    def _tensor_points(self, offsets, cells):
        cells = np.arange(self.n_cells) if cells is None else np.asarray(cells)
        bounds = self.cells[cells]
        grid = np.array(list(itertools.product(offsets, repeat=self.dim)))
        pts = bounds[:, None, :, 0] + grid[None, :, :] * self.widths[None, None, :]
        return pts[..., 0] if self.dim == 1 else pts

    def neighbours(self, cells) -> list:
        """Adjacency lists (shared face, wrap-around on the circle) among ``cells``."""
        cells = np.asarray(cells)
        present = {int(c): i for i, c in enumerate(cells)}
        out = []
        for c in cells:
            idx = np.unravel_index(int(c), self.shape)
            nb = []
            for a in range(self.dim):
                for step in (-1, 1):
                    j = list(idx)
                    j[a] += step
                    if self.space.periodic:
                        j[a] %= self.resolution
                    elif not 0 <= j[a] < self.resolution:
                        continue
                    flat = int(np.ravel_multi_index(tuple(j), self.shape))
                    if flat in present and flat != int(c):
                        nb.append(present[flat])
            out.append(nb)
        return out


def survivor_cells(m: MapSystem, partition: CellPartition, depth: int,
                   samples_per_axis: int = 9) -> np.ndarray:
    """Outer cell cover of the depth-``n`` survivor set.

    A cell is kept if at least one of its sample points and its first
    ``depth`` images all stay in the state space and out of the hole.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    x = partition.sample_points(samples_per_axis)
    alive = m.alive(x)
    for _ in range(depth):
        if not alive.any():
            break
        x = m.step(np.where(alive[..., None], x, 0.0) if m.dim > 1
                   else np.where(alive, x, 0.0))
        alive &= m.alive(x)
    keep = alive.reshape(partition.n_cells, -1).any(axis=1)
    return np.flatnonzero(keep)
