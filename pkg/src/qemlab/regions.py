"""Decomposition of a survivor cell cover into recurrent and transient regions.

Connected components of the cover are grouped into classes of mutually
reachable components (reachability is the Boolean support of the Ulam
operator).  The class digraph is acyclic; classes whose restricted
operator keeps mass indefinitely are labelled recurrent and the one with
the largest growth rate is the dominant region.
"""

from __future__ import annotations

import graphlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .dynamics import CellPartition
from .operator import UlamOperator
from .spectral import SUPPORT_RTOL, spectral_radius

__all__ = [
    "RegionGraph",
    "NoRecurrentClass",
    "build_regions",
    "restrict",
    "cover_components",
    "transient_emptying",
    "support_localization",
    "dump_regions",
]

log = logging.getLogger(__name__)

RECURRENT_FACTOR = 10.0


class NoRecurrentClass(RuntimeError):
    """Every class empties: the cover carries no repeller at this resolution."""


@dataclass(frozen=True)
class RegionGraph:
    """Class structure of a survivor cover.

    Attributes
    ----------
    components : list of ndarray
        Partition cell indices of each connected component of the cover.
    classes : list of list of int
        Component indices grouped into mutually reachable classes.
    labels : list of str
        ``"recurrent"`` or ``"transient"`` per class.
    edges : list of tuple
        Class-level one-step reachability ``(a, b)`` with ``a != b``.
    class_lambda : ndarray
        Spectral radius of each class-restricted operator.
    dominant : int
        Recurrent class with the largest ``class_lambda``.
    order : list of int
        A topological order of the class digraph.
    floor : float
        Escape floor used for the recurrence test.
    """

    components: list
    classes: list
    labels: list
    edges: list
    class_lambda: np.ndarray
    dominant: int
    order: list = field(default_factory=list)
    floor: float = 0.0
    has_cycle: list = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def recurrent(self) -> list:
        return [i for i, lab in enumerate(self.labels) if lab == "recurrent"]

    @property
    def transient(self) -> list:
        return [i for i, lab in enumerate(self.labels) if lab == "transient"]

    def class_cells(self, index: int) -> np.ndarray:
        """Sorted partition cells of one class."""
        return np.sort(np.concatenate([self.components[c] for c in self.classes[index]]))

    def class_of_cell(self, cell: int) -> int:
        for i in range(self.n_classes):
            if np.any(self.class_cells(i) == cell):
                return i
        raise KeyError(f"cell {cell} is not in the cover")

    def successors(self, index: int) -> set:
        """Classes reachable from ``index`` (excluding itself)."""
        adj = {i: [] for i in range(self.n_classes)}
        for a, b in self.edges:
            adj[a].append(b)
        seen, stack = set(), [index]
        while stack:
            for b in adj[stack.pop()]:
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        seen.discard(index)
        return seen

    def predecessors(self, index: int) -> set:
        return {i for i in range(self.n_classes) if i != index and index in self.successors(i)}

    def summary(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "recurrent": self.recurrent,
            "dominant": self.dominant,
            "class_lambda": [float(x) for x in self.class_lambda],
        }

    def to_dot(self) -> str:
        lines = ["digraph regions {"]
        for i in range(self.n_classes):
            cells = self.class_cells(i)
            shape = "doublecircle" if i == self.dominant else (
                "circle" if self.labels[i] == "recurrent" else "box")
            lines.append(
                f'  c{i} [label="M{i} {self.labels[i]}\\nlambda={self.class_lambda[i]:.6g}'
                f'\\ncells={cells.size}", shape={shape}];')
        for a, b in self.edges:
            lines.append(f"  c{a} -> c{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------


def cover_components(partition: CellPartition, cells) -> list:
    """Connected components of a cell set under face adjacency."""
    cells = np.unique(np.asarray(cells, dtype=np.int64))
    n = cells.size
    if n == 0:
        return []
    idx = np.array(np.unravel_index(cells, partition.shape))
    rows, cols = [], []
    for a in range(partition.dim):
        nb = idx.copy()
        nb[a] += 1
        if partition.space.periodic:
            nb[a] %= partition.resolution
            ok = np.ones(n, dtype=bool)
        else:
            ok = nb[a] < partition.resolution
        flat = np.ravel_multi_index(tuple(nb[:, ok]), partition.shape)
        pos = np.searchsorted(cells, flat)
        hit = (pos < n) & (cells[np.minimum(pos, n - 1)] == flat)
        src = np.flatnonzero(ok)[hit]
        rows.append(src)
        cols.append(pos[hit])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    A = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    ncomp, lab = csgraph.connected_components(A, directed=False)
    # order components by their first cell so the labelling is deterministic
    first = np.full(ncomp, np.iinfo(np.int64).max)
    np.minimum.at(first, lab, np.arange(n))
    rank = np.empty(ncomp, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(ncomp)
    lab = rank[lab]
    return [cells[lab == k] for k in range(ncomp)]


def _support(op: UlamOperator) -> sp.csr_matrix:
    M = op.matrix.tocsr()
    thr = SUPPORT_RTOL * (float(np.abs(M.data).max()) if M.nnz else 0.0)
    B = (M > thr).astype(np.int8).tocsr()
    B.eliminate_zeros()
    return B


def _has_cycle(B: sp.csr_matrix) -> bool:
    if B.diagonal().any():
        return True
    ncomp, lab = csgraph.connected_components(B, directed=True, connection="strong")
    return bool(np.bincount(lab).max() > 1) if B.shape[0] else False


def build_regions(op: UlamOperator, partition: CellPartition, active_cells=None,
                  phi_min: float = 0.0) -> RegionGraph:
    """Region graph of the cover ``active_cells`` (default: all operator cells).

    A class is recurrent when its restricted support contains a cycle and
    its spectral radius exceeds ``10 * exp(phi_min) * floor``, where the
    floor is the largest one-step retained mass of any acyclic class (or
    the support threshold when every class has a cycle).

    Raises
    ------
    NoRecurrentClass
        If no class passes the test.
    """
    cover = op.cells if active_cells is None else np.unique(np.asarray(active_cells))
    if cover.size == 0:
        raise NoRecurrentClass("empty survivor cover")
    sub = op.submatrix(cover) if cover.size != op.n or np.any(cover != op.cells) else op
    comps = cover_components(partition, cover)

    comp_of = np.empty(cover.size, dtype=np.int64)
    for k, c in enumerate(comps):
        comp_of[np.searchsorted(cover, c)] = k
    B = _support(sub)
    S = sp.csr_matrix((np.ones(cover.size), (np.arange(cover.size), comp_of)),
                      shape=(cover.size, len(comps)))
    C = (S.T @ B @ S).tocsr()
    n_cls, cls_lab = csgraph.connected_components(C, directed=True, connection="strong")

    # deterministic class numbering: by smallest member component
    first = np.full(n_cls, len(comps))
    np.minimum.at(first, cls_lab, np.arange(len(comps)))
    rank = np.empty(n_cls, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(n_cls)
    cls_lab = rank[cls_lab]
    classes = [np.flatnonzero(cls_lab == k).tolist() for k in range(n_cls)]

    Cc = C.tocoo()
    edges = sorted({(int(cls_lab[a]), int(cls_lab[b]))
                    for a, b in zip(Cc.row, Cc.col) if cls_lab[a] != cls_lab[b]})

    sorter = graphlib.TopologicalSorter({i: set() for i in range(n_cls)})
    for a, b in edges:
        sorter.add(b, a)
    order = list(sorter.static_order())  # raises CycleError if not a DAG

    cell_class = cls_lab[comp_of]
    lam = np.zeros(n_cls)
    cyc = []
    retained = []
    M = sub.matrix.tocsr()
    for k in range(n_cls):
        pos = np.flatnonzero(cell_class == k)
        Bk = B[pos][:, pos]
        cyc.append(_has_cycle(Bk))
        Mk = M[pos][:, pos]
        if cyc[-1]:
            lam[k] = spectral_radius(Mk)
        else:
            retained.append(float(np.asarray(Mk.sum(axis=1)).max()) if Mk.nnz else 0.0)
    base = SUPPORT_RTOL * (float(M.data.max()) if M.nnz else 0.0)
    floor = max([base] + retained)
    cut = RECURRENT_FACTOR * np.exp(phi_min) * floor
    labels = ["recurrent" if cyc[k] and lam[k] > cut else "transient" for k in range(n_cls)]
    rec = [k for k in range(n_cls) if labels[k] == "recurrent"]
    if not rec:
        raise NoRecurrentClass(
            f"no recurrent class among {n_cls} (max class lambda {lam.max():.3e}, cut {cut:.3e}); "
            "the cover does not support a repeller at this resolution and noise level")
    dominant = max(rec, key=lambda k: (lam[k], -k))
    near = [k for k in rec if k != dominant and abs(lam[k] - lam[dominant]) <= 1e-9 * lam[dominant]]
    if near:
        log.warning("recurrent classes %s tie with the dominant class %d", near, dominant)
    log.info("region graph: %d components, %d classes, recurrent %s, dominant %d "
             "(recurrence uses the spectral-persistence proxy)", len(comps), n_cls, rec, dominant)
    return RegionGraph(comps, classes, labels, edges, lam, dominant, order, floor, cyc)


def restrict(op: UlamOperator, graph: RegionGraph | None = None, class_index: int | None = None,
             cells=None) -> UlamOperator:
    """Operator of the chain killed on leaving one class (or an explicit cell set).

    The result acts on the class cells only, which is the zero-padded
    operator with the inactive rows and columns dropped.
    """
    if cells is None:
        if graph is None or class_index is None:
            return op
        cells = graph.class_cells(class_index)
    return op.submatrix(np.sort(np.asarray(cells)))


def transient_emptying(op: UlamOperator, graph: RegionGraph) -> dict:
    """For each transient class, the first ``N`` with ``P^N`` carrying no mass
    from the class back into itself (``None`` if it never empties within the
    class size)."""
    B = _support(op)
    out = {}
    for k in graph.transient:
        pos = op.positions(graph.class_cells(k))
        Bk = B[pos][:, pos].tocsr()
        v = np.ones(pos.size, dtype=bool)
        n_empty = None
        for N in range(1, pos.size + 2):
            v = (Bk @ v.astype(np.int8)) > 0
            if not v.any():
                n_empty = N
                break
        out[k] = n_empty
    return out


def support_localization(graph: RegionGraph, triple) -> dict:
    """Relative size of ``g`` on classes downstream of the dominant class and
    of ``m`` on classes upstream of it; both vanish in exact arithmetic."""
    d = graph.dominant
    down, up = graph.successors(d), graph.predecessors(d)
    pos = {int(c): i for i, c in enumerate(triple.cells)}

    def worst(vec, group):
        top = float(np.max(np.abs(vec))) or 1.0
        vals = [np.max(np.abs(vec[[pos[c] for c in graph.class_cells(k) if c in pos]]), initial=0.0)
                for k in group]
        return float(max(vals, default=0.0)) / top

    return {"g_downstream": worst(triple.g, down), "m_upstream": worst(triple.m, up),
            "downstream": sorted(down), "upstream": sorted(up)}


def dump_regions(graph: RegionGraph, out_dir, prefix: str = "regions") -> list:
    """Write ``<prefix>.dot`` and ``<prefix>.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dot = out_dir / f"{prefix}.dot"
    js = out_dir / f"{prefix}.json"
    dot.write_text(graph.to_dot())
    js.write_text(json.dumps(graph.summary(), indent=2, sort_keys=True) + "\n")
    return [dot, js]
