"""Deterministic ground truth.

Two independent oracles live here:

* exact Perron data and exact finite-horizon conditioned Birkhoff
  averages for small sub-stochastic matrices, and
* thermodynamic formalism on finite Markov models (pressure, conformal
  measure, equilibrium state and its entropy), including a symbolic
  model of one-dimensional repellers built from exact inverse branches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import eigs

from .dynamics import CellPartition, MapSystem, WeightFunction, build_map

__all__ = [
    "PerronData",
    "dense_perron",
    "exact_conditioned_average",
    "exact_conditioned_marginal",
    "MarkovModel",
    "EquilibriumState",
    "pressure",
    "full_shift_model",
    "golden_mean_model",
    "fixed_point_model",
    "survivor_intervals",
    "interval_markov_model",
    "logistic_repeller_model",
    "push_forward",
    "GOLDEN_LOG",
]

GOLDEN_LOG = math.log((1.0 + math.sqrt(5.0)) / 2.0)


class PerronData(NamedTuple):
    lam: float
    g: np.ndarray
    m: np.ndarray
    period: int
    peripheral: np.ndarray


def dense_perron(matrix, vols=None, sign_tol: float = 1e-10) -> PerronData:
    """Perron root and vectors of a small non-negative matrix by full eigensolve.

    ``g`` is the right eigenvector, ``m`` the left eigen-density with
    respect to ``vols``; normalized like :class:`~qemlab.spectral.SpectralTriple`.
    When the peripheral spectrum has ``k > 1`` points, ``period`` is ``k``
    and ``peripheral`` lists the rotated family ``lam exp(2 pi i j / k)``.
    """
    A = np.asarray(matrix.toarray() if sp.issparse(matrix) else matrix, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > 64:
        raise ValueError("dense_perron is meant for matrices of size <= 64")
    if np.any(A < 0):
        raise ValueError("matrix has negative entries")
    vols = np.ones(n) if vols is None else np.asarray(vols, dtype=float)

    w, V = np.linalg.eig(A)
    rho = float(np.max(np.abs(w)))
    if rho == 0.0:
        raise ValueError("nilpotent matrix has no Perron root")
    on_circle = np.abs(np.abs(w) - rho) <= 1e-9 * rho
    peripheral = w[on_circle]
    peripheral = peripheral[np.argsort(np.mod(np.angle(peripheral), 2 * np.pi))]
    period = int(on_circle.sum())

    def perron_vector(M):
        ww, VV = np.linalg.eig(M)
        cand = np.flatnonzero((np.abs(ww.imag) <= 1e-9 * rho) & (np.abs(ww.real - rho) <= 1e-9 * rho))
        if cand.size == 0:
            raise ValueError("no real Perron root found")
        v = np.real(VV[:, cand[0]])
        v = v / v[np.argmax(np.abs(v))]
        if v.min() < -sign_tol * np.abs(v).max():
            raise ValueError("Perron vector changes sign; dominant eigenspace is degenerate")
        return np.clip(v, 0.0, None)

    g = perron_vector(A)
    mu = perron_vector(A.T)
    m = mu / vols
    m = m / np.sum(m * vols)
    g = g / np.sum(g * m * vols)
    return PerronData(rho, g, m, period, peripheral)


def _weighted(matrix, weight_col):
    Q = np.asarray(matrix.toarray() if sp.issparse(matrix) else matrix, dtype=float)
    w = np.ones(Q.shape[0]) if weight_col is None else np.asarray(weight_col, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weight column must be strictly positive")
    return w[:, None] * Q


def exact_conditioned_average(matrix, weight_col, h, n: int, start=None):
    """Exact finite-``n`` conditioned Birkhoff average.

    With ``P = diag(weight_col) @ matrix``,

        E_x[e^{S_n phi} 1_{tau>n} (1/n) sum_{i<n} h(X_i)] / E_x[e^{S_n phi} 1_{tau>n}]
            = (1/n) sum_{i<n} P^i (h P^{n-i} 1)(x) / P^n 1(x),

    accumulated by the recursion ``u <- P u``, ``R <- P R + h u`` with
    both rescaled by ``max u`` every step.

    Returns the value for ``start`` or the vector over all start states
    (NaN where the chain is surely dead by time ``n``).
    """
    if n < 1:
        raise ValueError("horizon must be at least 1")
    P = _weighted(matrix, weight_col)
    h = np.asarray(h, dtype=float)
    u = np.ones(P.shape[0])
    R = np.zeros(P.shape[0])
    for _ in range(n):
        u = P @ u
        R = P @ R + h * u
        s = u.max()
        if not s > 0:
            u = np.zeros_like(u)
            break
        u /= s
        R /= s
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(u > 0, R / (n * u), np.nan)
    return out if start is None else float(out[start])


def exact_conditioned_marginal(matrix, weight_col, h, n: int, start=None):
    """``E_x[e^{S_n phi} 1_{tau>n} h(X_n)] / E_x[e^{S_n phi} 1_{tau>n}] = P^n h / P^n 1``."""
    P = _weighted(matrix, weight_col)
    num = np.asarray(h, dtype=float).copy()
    den = np.ones(P.shape[0])
    for _ in range(n):
        num = P @ num
        den = P @ den
        s = den.max()
        if not s > 0:
            break
        num /= s
        den /= s
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / den, np.nan)
    return out if start is None else float(out[start])


# ---------------------------------------------------------------------------
# Markov models


@dataclass
class MarkovModel:
    """Finite Markov approximation of ``T`` on a repeller.

    ``adjacency[i, j] = 1`` when state ``i`` maps onto state ``j``.
    ``potential = phi - log|T'|`` per state.  ``recurrent`` designates
    the irreducible component the pressure is computed on.
    """

    states: list
    adjacency: sp.csr_matrix
    branch_deriv: np.ndarray
    phi: np.ndarray = None
    recurrent: np.ndarray = None
    intervals: np.ndarray = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.adjacency = sp.csr_matrix(self.adjacency, dtype=float)
        self.branch_deriv = np.asarray(self.branch_deriv, dtype=float)
        n = len(self.states)
        if self.phi is None:
            self.phi = np.zeros(n)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.recurrent is None:
            self.recurrent = np.arange(n)
        self.recurrent = np.asarray(self.recurrent, dtype=np.int64)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def potential(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.phi - np.log(np.abs(self.branch_deriv))

    def with_phi(self, phi) -> "MarkovModel":
        return MarkovModel(self.states, self.adjacency, self.branch_deriv,
                           np.broadcast_to(np.asarray(phi, dtype=float), (self.n_states,)).copy(),
                           self.recurrent, self.intervals, dict(self.notes))

    def with_geometric_weight(self, t: float) -> "MarkovModel":
        """``phi_t = (1 - t) log|T'|``, i.e. potential ``-t log|T'|``."""
        return self.with_phi((1.0 - t) * np.log(np.abs(self.branch_deriv)))

    def components(self) -> list:
        """Strong components that carry a cycle."""
        A = self.adjacency
        nc, lab = csgraph.connected_components(A, directed=True, connection="strong")
        out = []
        for c in range(nc):
            idx = np.flatnonzero(lab == c)
            sub = A[idx][:, idx]
            if sub.nnz > 0:
                out.append(idx)
        return out

    def designate(self, which="entropy") -> "MarkovModel":
        """Choose the recurrent component.

        ``"entropy"`` keeps the component with the largest adjacency
        spectral radius, ``"pressure"`` the one of largest pressure for
        the current potential; an integer keeps the component containing
        that state.
        """
        comps = self.components()
        if not comps:
            raise ValueError("model has no cycles; the survivor set is empty")
        if isinstance(which, str):
            if which == "entropy":
                radii = [_perron_root(self.adjacency[c][:, c]) for c in comps]
            elif which == "pressure":
                radii = [pressure(MarkovModel(self.states, self.adjacency, self.branch_deriv,
                                              self.phi, c)).pressure for c in comps]
            else:
                raise ValueError(f"unknown designation {which!r}")
            pick = comps[int(np.argmax(radii))]
        else:
            hits = [c for c in comps if int(which) in set(c.tolist())]
            if not hits:
                raise ValueError(f"state {which} lies on no cycle")
            pick = hits[0]
        out = MarkovModel(self.states, self.adjacency, self.branch_deriv, self.phi,
                          pick, self.intervals, dict(self.notes))
        return out

    def to_json(self) -> str:
        coo = self.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        doc = {
            "states": [s if isinstance(s, (int, str)) else repr(s) for s in self.states],
            "adjacency": [[int(r), int(c)] for r, c in zip(coo.row[order], coo.col[order])],
            "potential": [float(x) for x in self.potential],
            "branch_deriv": [float(x) for x in self.branch_deriv],
            "phi": [float(x) for x in self.phi],
            "recurrent": [int(x) for x in self.recurrent],
        }
        if self.intervals is not None:
            doc["intervals"] = [[float(a), float(b)] for a, b in self.intervals]
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MarkovModel":
        doc = json.loads(text)
        n = len(doc["states"])
        pairs = np.asarray(doc["adjacency"], dtype=np.int64).reshape(-1, 2)
        A = sp.csr_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        iv = np.asarray(doc["intervals"]) if "intervals" in doc else None
        return cls(doc["states"], A, doc["branch_deriv"], doc["phi"], doc["recurrent"], iv)


def _perron_root(A) -> float:
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


@dataclass(frozen=True)
class EquilibriumState:
    """Equilibrium state of a Markov model on its recurrent component.

    ``measure`` is indexed like ``states`` (zero off the component).
    """

    measure: np.ndarray
    pressure: float
    entropy: float
    integral: float
    lam: float
    m: np.ndarray
    gamma: np.ndarray
    states: np.ndarray

    def to_json(self) -> str:
        doc = {
            "measure": [float(x) for x in self.measure],
            "pressure": self.pressure,
            "entropy": self.entropy,
            "integral": self.integral,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @property
    def variational_gap(self) -> float:
        return abs(self.pressure - self.entropy - self.integral)


def _perron_pair(K):
    """Right and left Perron vectors of an irreducible non-negative ``K``."""
    n = K.shape[0]
    if n <= 400:
        D = K.toarray() if sp.issparse(K) else np.asarray(K)
        w, V = np.linalg.eig(D)
        i = int(np.argmax(np.where(np.abs(w.imag) < 1e-9 * np.abs(w).max(), w.real, -np.inf)))
        lam = float(w[i].real)
        right = np.abs(np.real(V[:, i]))
        wl, VL = np.linalg.eig(D.T)
        j = int(np.argmin(np.abs(wl - lam)))
        left = np.abs(np.real(VL[:, j]))
        return lam, right / right.max(), left / left.max()
    # the Perron root of an irreducible non-negative matrix has the largest real part
    K = sp.csr_matrix(K)
    vecs = []
    for M in (K, K.T.tocsr()):
        w, V = eigs(M, k=1, which="LR", tol=0, v0=np.ones(n))
        v = np.abs(np.real(V[:, 0]))
        vecs.append(v / v.max())
    lam = float(np.real(w[0]))
    return lam, vecs[0], vecs[1]


def pressure(model: MarkovModel) -> EquilibriumState:
    """Pressure, conformal measure and equilibrium state on ``model.recurrent``.

    With ``Lt[x, y] = exp(psi(y)) A[y, x]`` the Ruelle operator, ``m`` is
    its right eigenvector, ``gamma`` its left eigenvector (the conformal
    measure) and ``nu = m gamma``.  The entropy is that of the Markov
    chain ``p(y, x) = exp(psi(y)) A[y, x] gamma(x) / (lam gamma(y))``.
    """
    R = model.recurrent
    A = model.adjacency[R][:, R].tocsr()
    nc, _ = csgraph.connected_components(A, directed=True, connection="strong")
    if nc != 1 or A.nnz == 0:
        raise ValueError("designated component is not irreducible")
    psi = model.potential[R]
    if not np.all(np.isfinite(psi)):
        raise ValueError("potential is not finite on the recurrent component")
    # Koopman form K[y, x] = exp(psi(y)) A[y, x]; the Ruelle operator is K.T
    K = (sp.diags(np.exp(psi)) @ A).tocsr()
    lam, gamma, m = _perron_pair(K)
    nu = m * gamma
    nu = nu / nu.sum()
    m = m / np.sum(m * gamma)

    coo = K.tocoo()
    p = coo.data * gamma[coo.col] / (lam * gamma[coo.row])
    ent = -float(np.sum(nu[coo.row] * p * np.log(p)))
    integral = float(np.dot(nu, psi))
    full = np.zeros(model.n_states)
    full[R] = nu
    return EquilibriumState(full, math.log(lam), ent, integral, lam, m, gamma, R)


# ---------------------------------------------------------------------------
# model zoo


def full_shift_model(k: int = 2, psi: float = 0.0) -> MarkovModel:
    A = np.ones((k, k))
    return MarkovModel(list(range(k)), A, np.full(k, math.exp(-psi)))


def golden_mean_model(deriv: float = 2.0) -> MarkovModel:
    """Shift forbidding ``11``: the doubling map with hole ``[3/4, 1)`` on 2-cylinders.

    States are the cylinders ``00, 01, 10`` (the hole ``11`` removed).
    """
    # 00 -> 00, 01 ; 01 -> 10 ; 10 -> 00, 01
    A = np.array([[1, 1, 0], [0, 0, 1], [1, 1, 0]], dtype=float)
    iv = np.array([[0.0, 0.25], [0.25, 0.5], [0.5, 0.75]])
    return MarkovModel(["00", "01", "10"], A, np.full(3, deriv), intervals=iv)


def fixed_point_model(m: MapSystem, x: float, weight: WeightFunction | None = None) -> MarkovModel:
    """One-state model of the fixed point ``x`` with the exact derivative there."""
    if abs(float(m.step(x)) - float(m.state_space.wrap(x))) > 1e-12:
        raise ValueError(f"{x} is not a fixed point")
    phi = 0.0 if weight is None else float(np.asarray(weight(x)))
    return MarkovModel([f"fix({x!r})"], np.ones((1, 1)), [float(m.deriv(x))], [phi],
                       intervals=np.array([[x, x]]))


def _complement(m: MapSystem) -> list:
    lo, hi = m.state_space.lower[0], m.state_space.upper[0]
    spans = []
    for box in m.hole.boxes:
        a, b = box[0][0], box[1][0]
        if m.hole.periodic:
            if a < lo:
                spans += [(lo, b), (a + 1.0, hi)]
                continue
            if b > hi:
                spans += [(a, hi), (lo, b - 1.0)]
                continue
        spans.append((max(a, lo), min(b, hi)))
    spans.sort()
    out, cur = [], lo
    for a, b in spans:
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if cur < hi:
        out.append((cur, hi))
    return out


def _intersect(xs, ys):
    """Intersection of two sorted lists of disjoint closed intervals."""
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        a = max(xs[i][0], ys[j][0])
        b = min(xs[i][1], ys[j][1])
        if b - a > 1e-15:
            out.append((a, b))
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return out


def survivor_intervals(m: MapSystem, depth: int) -> np.ndarray:
    """Exact interval decomposition of ``{x : T^k x ∉ U, k = 0..depth}``.

    Built by pulling back through the monotone laps in ``m.branches``;
    intervals are split at lap boundaries.  Returns an ``(n, 2)`` array.
    """
    if m.dim != 1 or not m.branches:
        raise ValueError("survivor_intervals needs a 1-D map with inverse branches")
    cuts = sorted({b[0] for b in m.branches} | {b[1] for b in m.branches})
    laps = list(zip(cuts[:-1], cuts[1:]))
    base = _intersect(_complement(m), laps)
    S = base
    for _ in range(depth):
        pre = []
        for lo, hi, fwd, inv in m.branches:
            y0, y1 = float(fwd(lo)), float(fwd(hi))
            ylo, yhi = min(y0, y1), max(y0, y1)
            for c, d in S:
                c2, d2 = max(c, ylo), min(d, yhi)
                if d2 - c2 <= 1e-15:
                    continue
                x1, x2 = float(inv(c2)), float(inv(d2))
                pre.append((min(x1, x2), max(x1, x2)))
        pre.sort()
        S = _intersect(base, pre)
    return np.asarray(S, dtype=float).reshape(-1, 2)


def interval_markov_model(m: MapSystem, depth: int, weight: WeightFunction | None = None,
                          overlap_tol: float = 1e-12) -> MarkovModel:
    """Markov model on the components of the depth-``n`` survivor set.

    ``I -> J`` when ``T(I)`` overlaps ``J`` in positive length.  Per-state
    ``|T'|`` and ``phi`` are sampled at interval midpoints.
    """
    iv = survivor_intervals(m, depth)
    if iv.size == 0:
        raise ValueError("survivor set is empty at this depth")
    mids = iv.mean(axis=1)
    imgs = np.empty_like(iv)
    for lo, hi, fwd, _ in m.branches:
        sel = (mids >= lo) & (mids <= hi)
        a, b = fwd(iv[sel, 0]), fwd(iv[sel, 1])
        imgs[sel, 0] = np.minimum(a, b)
        imgs[sel, 1] = np.maximum(a, b)
    starts = iv[:, 0]
    rows, cols = [], []
    for i, (a, b) in enumerate(imgs):
        j0 = max(int(np.searchsorted(starts, a, side="right")) - 1, 0)
        j1 = int(np.searchsorted(starts, b, side="left"))
        for j in range(j0, min(j1 + 1, len(iv))):
            ov = min(b, iv[j, 1]) - max(a, iv[j, 0])
            if ov > overlap_tol * max(iv[j, 1] - iv[j, 0], 1e-300) and ov > 1e-15:
                rows.append(i)
                cols.append(j)
    n = len(iv)
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    phi = np.zeros(n) if weight is None else np.broadcast_to(
        np.asarray(weight(mids), dtype=float), (n,)).copy()
    deriv = np.abs(np.asarray(m.deriv(mids), dtype=float))
    return MarkovModel(list(range(n)), A, deriv, phi, intervals=iv,
                       notes={"map": m.id, "depth": depth})


def logistic_repeller_model(a: float = 3.83, depth: int = 14, hole_radius: float = 1e-3,
                            t: float = 0.0) -> MarkovModel:
    """Symbolic model of the Cantor repeller of the logistic map in the
    period-3 window, with potential ``-t log|T'|``.

    The hole is a ball of ``hole_radius`` around the attracting 3-cycle;
    the recurrent component is the one of maximal topological entropy
    (the fixed point 0 sits in a separate, entropy-free component).
    """
    m = build_map("logistic", {"a": a, "hole_radius": hole_radius})
    model = interval_markov_model(m, depth)
    model = model.designate("entropy")
    model.notes.update({"a": a, "hole_radius": hole_radius, "t": t})
    return model.with_geometric_weight(t)


def push_forward(eq: EquilibriumState, model: MarkovModel, partition: CellPartition) -> np.ndarray:
    """Spread each state's mass uniformly over its interval onto ``partition`` cells."""
    if model.intervals is None:
        raise ValueError("model has no interval geometry")
    if partition.dim != 1:
        raise ValueError("push_forward supports one-dimensional partitions")
    edges = partition.edges()
    out = np.zeros(partition.n_cells)
    cdf_x = edges
    for w, (a, b) in zip(eq.measure, model.intervals):
        if w <= 0:
            continue
        if b - a <= 0:
            out[partition.locate(a)] += w
            continue
        frac = np.clip((np.minimum(cdf_x[1:], b) - np.maximum(cdf_x[:-1], a)) / (b - a), 0.0, None)
        out += w * frac
    return out / out.sum()
