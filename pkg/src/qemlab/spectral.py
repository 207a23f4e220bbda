"""Leading eigendata of Ulam operators: growth rate, quasi-stationary
density, right eigenfunction, period and the quasi-ergodic measure.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .operator import DualOperator, UlamOperator, apply, dual

__all__ = [
    "SpectralTriple",
    "QuasiErgodicMeasure",
    "ConvergenceError",
    "SpectralMismatch",
    "PeriodStructure",
    "power_leading",
    "detect_period",
    "solve_triple",
    "quasi_ergodic",
    "cyclic_eigenvectors",
    "spectral_radius",
    "support_threshold",
    "dump_triple",
]

log = logging.getLogger(__name__)

SUPPORT_RTOL = 1e-12


class ConvergenceError(RuntimeError):
    """Power iteration stalled; usually a peripheral spectrum of period > 1."""

    def __init__(self, msg, lam=None, vector=None, residual=None, history=None):
        super().__init__(msg)
        self.lam = lam
        self.vector = vector
        self.residual = residual
        self.history = history


class SpectralMismatch(RuntimeError):
    """Koopman and dual growth rates disagree."""


def support_threshold(x) -> float:
    x = np.abs(np.asarray(x))
    return SUPPORT_RTOL * (float(x.max()) if x.size else 0.0)


def _matrix(op):
    if isinstance(op, (UlamOperator, DualOperator)):
        return op.matrix
    return sp.csr_matrix(op)


def power_leading(op, tol: float = 1e-12, max_iter: int = 20000, v0=None,
                  power: int = 1):
    """Perron pair of a non-negative matrix by normalized power iteration.

    Parameters
    ----------
    op : UlamOperator, DualOperator or matrix
    tol : float
        Stop once ``||A v - lam v||_inf <= tol * lam``.
    v0 : array, optional
        Start vector; all-ones by default.
    power : int
        Iterate ``A**power`` (applied as repeated products).

    Returns
    -------
    lam : float
        Collatz-Wielandt estimate ``max_i (A v)_i / v_i`` over the support.
    v : ndarray
        Non-negative, unit sup-norm.

    Raises
    ------
    ConvergenceError
        If the residual does not fall below tolerance in ``max_iter`` steps.
    """
    A = _matrix(op)
    n = A.shape[0]
    if A.nnz == 0:
        raise ValueError("operator is identically zero")
    v = np.ones(n) if v0 is None else np.abs(np.asarray(v0, dtype=float)).copy()
    if not v.max() > 0:
        v = np.ones(n)
    v /= v.max()

    def mul(x):
        for _ in range(power):
            x = A @ x
        return x

    w = mul(v)
    lam, res = 0.0, np.inf
    history = []
    for it in range(max_iter):
        top = w.max()
        if not top > 0:
            raise ConvergenceError("iterate collapsed to zero (nilpotent support)", 0.0, v, 0.0)
        v = w / top
        w = mul(v)
        mask = v > support_threshold(v)
        lam = float(np.max(w[mask] / v[mask]))
        res = float(np.max(np.abs(w - lam * v)))
        if it % 64 == 0:
            history.append(res)
        if res <= tol * lam:
            return lam, v
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (residual {res:.3e}); "
        "the peripheral spectrum may have period > 1",
        lam, v, res, history)


def spectral_radius(op, tol: float = 1e-12, max_iter: int = 200000) -> float:
    """Spectral radius of a non-negative matrix, robust to periodicity.

    Small matrices use a dense eigensolve; larger ones power-iterate the
    shifted matrix ``A + c I``, whose Perron root is isolated.
    """
    A = _matrix(op)
    n = A.shape[0]
    if A.nnz == 0:
        return 0.0
    if n <= 400:
        return float(np.max(np.abs(np.linalg.eigvals(A.toarray()))))
    # the Perron root of a non-negative matrix has the largest real part
    try:
        w = eigs(A, k=1, which="LR", tol=tol, v0=np.ones(n), return_eigenvectors=False)
        return max(float(np.real(w[0])), 0.0)
    except ArpackNoConvergence:
        log.info("ARPACK did not converge; falling back to shifted power iteration")
    c = float(abs(A).sum(axis=1).max())
    shifted = (A + c * sp.identity(n, format="csr")).tocsr()
    lam, _ = power_leading(shifted, tol=tol, max_iter=max_iter)
    return max(lam - c, 0.0)


@dataclass(frozen=True)
class PeriodStructure:
    period: int
    classes: list
    core: np.ndarray
    ambiguous: list = field(default_factory=list)

    def labels(self, n: int) -> np.ndarray:
        """Per-row class label, −1 outside ``{g > 0}``."""
        out = np.full(n, -1, dtype=int)
        for i, c in enumerate(self.classes):
            out[c] = i
        return out


def _positive_support(A, tol, left=False):
    """Support of the Perron vector via the aperiodic shift ``A + cI``."""
    M = A.T.tocsr() if left else A
    c = float(abs(M).sum(axis=1).max())
    shifted = (M + c * sp.identity(M.shape[0], format="csr")).tocsr()
    _, v = power_leading(shifted, tol=tol, max_iter=200000)
    return v > support_threshold(v)


def detect_period(op, tol: float = 1e-12, support=None) -> PeriodStructure:
    """Period and cyclic classes from the Boolean support digraph.

    The period is the gcd of cycle lengths inside the core ``{g > 0} ∩
    {m > 0}``; cells are labelled by BFS depth modulo the period, so an
    edge leaves ``C_i`` into ``C_{i+1}`` and ``P 1_{C_i}`` is carried by
    ``C_{i-1}``.  Cells of ``{g > 0}`` outside the core inherit labels
    backwards along edges; conflicts are reported in ``ambiguous``.
    """
    A = _matrix(op).tocsr()
    n = A.shape[0]
    thr = support_threshold(A.data) if A.nnz else 0.0
    B = (A > thr).astype(np.int8).tocsr()
    if support is None:
        g_pos = _positive_support(A, tol)
        m_pos = _positive_support(A, tol, left=True)
    else:
        g_pos, m_pos = support
    core = np.flatnonzero(g_pos & m_pos)
    if core.size == 0:
        raise ValueError("empty Perron core")
    sub = B[core][:, core].tocsr()
    ncomp, lab = csgraph.connected_components(sub, directed=True, connection="strong")
    if ncomp > 1:
        # several classes tie for the spectral radius; keep the first cyclic one
        sizes = np.bincount(lab)
        log.warning("Perron core splits into %d strong components; using the largest", ncomp)
        keep = lab == int(np.argmax(sizes))
        core = core[keep]
        sub = B[core][:, core].tocsr()

    dist = csgraph.shortest_path(sub, directed=True, unweighted=True, indices=0)
    depth = dist.astype(np.int64)
    coo = sub.tocoo()
    diffs = np.abs(depth[coo.row] + 1 - depth[coo.col])
    k = reduce(math.gcd, (int(d) for d in np.unique(diffs)), 0)
    k = max(k, 1)

    labels = np.full(n, -1, dtype=np.int64)
    labels[core] = depth % k
    ambiguous = []
    # propagate backwards: u -> v with v labelled gives label(v) - 1
    BT = B.T.tocsr()
    frontier = list(core)
    while frontier:
        nxt = []
        for v in frontier:
            for u in BT.indices[BT.indptr[v]:BT.indptr[v + 1]]:
                if not g_pos[u]:
                    continue
                want = (labels[v] - 1) % k
                if labels[u] < 0:
                    labels[u] = want
                    nxt.append(u)
                elif labels[u] != want and u not in ambiguous:
                    ambiguous.append(int(u))
        frontier = nxt
    if ambiguous:
        log.warning("%d cells have ambiguous cyclic class", len(ambiguous))
    classes = [np.flatnonzero(labels == i) for i in range(k)]
    return PeriodStructure(k, classes, core, ambiguous)


@dataclass(frozen=True)
class SpectralTriple:
    """``lam``: growth rate; ``g``: right eigenvector (``P g = lam g``);
    ``m``: quasi-stationary density (``L m = lam m``).

    Normalized so that ``sum m vol = 1`` and ``sum g m vol = 1``.
    """

    lam: float
    g: np.ndarray
    m: np.ndarray
    volumes: np.ndarray
    cells: np.ndarray
    period: int = 1
    cyclic_classes: list = field(default_factory=list)
    residual: float = 0.0
    lam_dual: float = float("nan")

    @property
    def log_lambda(self) -> float:
        return math.log(self.lam) if self.lam > 0 else -math.inf

    @property
    def qsd(self) -> np.ndarray:
        """Quasi-stationary probability mass per cell."""
        return self.m * self.volumes


def _period_aware(A, k, tol, max_iter, v0=None):
    lam_k, v = power_leading(A, tol=tol, max_iter=max_iter, v0=v0, power=k)
    lam = lam_k ** (1.0 / k)
    g = np.zeros_like(v)
    x = v.copy()
    for j in range(k):
        g += x / lam ** j
        x = A @ x
    g /= g.max()
    return lam, g


def solve_triple(op: UlamOperator, tol: float = 1e-12, max_iter: int = 20000,
                 rtol_dual: float = 1e-8, g0=None, m0=None) -> SpectralTriple:
    """Growth rate and eigenvectors on both sides, jointly normalized.

    Falls back to period-aware extraction (iterate ``P^k`` and sum over
    the cycle) when plain power iteration fails to settle.
    """
    P = op.matrix
    L = dual(op)
    period, classes = 1, None
    try:
        lam, g = power_leading(P, tol=tol, max_iter=max_iter, v0=g0)
        lam_d, m = power_leading(L, tol=tol, max_iter=max_iter, v0=m0)
    except ConvergenceError as err:
        log.info("plain power iteration stalled (%s); detecting period", err)
        ps = detect_period(P, tol=tol)
        period, classes = ps.period, ps.classes
        if period == 1:
            raise
        lam, g = _period_aware(P, period, tol, max_iter)
        lam_d, m = _period_aware(L.matrix, period, tol, max_iter)

    if abs(lam - lam_d) > rtol_dual * max(lam, 1e-300):
        raise SpectralMismatch(f"growth rates disagree: P gives {lam!r}, L gives {lam_d!r}")

    vol = op.volumes
    m = m / np.sum(m * vol)
    gm = np.sum(g * m * vol)
    if not gm > 0:
        raise ValueError("right and left Perron vectors have disjoint supports")
    g = g / gm
    res_g = float(np.max(np.abs(apply(op, g) - lam * g)))
    res_m = float(np.sum(np.abs(apply(L, m) - lam * m) * vol))
    if classes is None:
        classes = [np.flatnonzero(g > support_threshold(g))]
    return SpectralTriple(lam, g, m, vol, op.cells, period, classes,
                          max(res_g, res_m), lam_d)


def cyclic_eigenvectors(op, triple_or_g, lam: float, classes) -> list:
    """``f_l = (1/k) sum_j exp(2 pi i j l / k) g_j`` for ``l = 0..k-1``,
    with ``g_j`` the restriction of ``g`` to class ``C_j``.

    Each ``f_l`` satisfies ``P f_l = lam exp(2 pi i l / k) f_l``.
    """
    g = triple_or_g.g if isinstance(triple_or_g, SpectralTriple) else np.asarray(triple_or_g)
    k = len(classes)
    parts = []
    for c in classes:
        gj = np.zeros(g.shape, dtype=complex)
        gj[c] = g[c]
        parts.append(gj)
    out = []
    for ell in range(k):
        f = sum(np.exp(2j * np.pi * j * ell / k) * parts[j] for j in range(k)) / k
        out.append(f)
    return out


@dataclass(frozen=True)
class QuasiErgodicMeasure:
    weights: np.ndarray
    support: np.ndarray
    cells: np.ndarray

    def integrate(self, h_values) -> float:
        return float(np.dot(self.weights, np.asarray(h_values, dtype=float)))


def quasi_ergodic(triple: SpectralTriple) -> QuasiErgodicMeasure:
    """``nu_i ∝ g_i m_i vol_i``."""
    w = triple.g * triple.m * triple.volumes
    w = np.where(w > 0, w, 0.0)
    total = w.sum()
    if not total > 0:
        raise ValueError("g * m vanishes identically; no quasi-ergodic measure")
    w = w / total
    support = np.flatnonzero(w > support_threshold(w))
    return QuasiErgodicMeasure(w, support, triple.cells)


def _write_vector(path, cells, values):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["cell_index", "value"])
        for c, v in zip(cells, values):
            wr.writerow([int(c), repr(float(v))])


def dump_triple(triple: SpectralTriple, out_dir, nu: QuasiErgodicMeasure | None = None,
                prefix: str = "triple") -> list:
    """JSON summary plus CSV vectors for ``g``, ``m`` and (optionally) ``nu``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"lambda": triple.lam, "period": triple.period, "residual": triple.residual}
    paths = [out_dir / f"{prefix}.json", out_dir / f"{prefix}_g.csv", out_dir / f"{prefix}_m.csv"]
    paths[0].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_vector(paths[1], triple.cells, triple.g)
    _write_vector(paths[2], triple.cells, triple.m)
    if nu is not None:
        p = out_dir / f"{prefix}_nu.csv"
        with open(p, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["cell_index", "weight"])
            for c, v in zip(nu.cells, nu.weights):
                wr.writerow([int(c), repr(float(v))])
        paths.append(p)
    return paths
