"""Ulam discretization of the annealed weighted Koopman operator and its dual.

Row ``i`` of the Koopman matrix ``P`` is

    P[i, j] = sum_q w_q exp(phi(x_q)) |B_eps(T x_q) ∩ C_j \\ U| / (2 eps)^m

with ``x_q`` the Gauss-Legendre nodes of cell ``i``; overlaps are
computed in closed form.  Mass that lands in the hole, outside the state
space, or in an inactive cell is lost.  The dual ``L`` (transfer operator
acting on densities) is the volume-weighted transpose.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dynamics import CellPartition, Hole, MapSystem, WeightFunction, constant_weight
from .noise import NoiseKernel

__all__ = [
    "UlamOperator",
    "DualOperator",
    "assemble",
    "active_cells",
    "dual",
    "apply",
    "dump_operator",
    "load_operator",
    "volumes_digest",
]

log = logging.getLogger(__name__)

# entries per assembly chunk; bounds peak memory at roughly 100 MB
_CHUNK = 2_000_000


@dataclass(frozen=True)
class UlamOperator:
    """Sparse sub-stochastic weighted matrix over the active cells.

    ``cells`` are partition indices; row/column ``k`` of ``matrix``
    corresponds to partition cell ``cells[k]``.
    """

    matrix: sp.csr_matrix
    cells: np.ndarray
    volumes: np.ndarray
    weight_applied: bool = False
    epsilon: float = 0.0
    weight_id: str = "constant(0.0)"
    resolution: int | None = None
    flags: tuple = field(default_factory=tuple)

    @classmethod
    def from_matrix(cls, matrix, volumes=None, cells=None, **kw) -> "UlamOperator":
        """Wrap a plain (dense or sparse) matrix, unit volumes by default."""
        M = sp.csr_matrix(np.asarray(matrix, dtype=float) if not sp.issparse(matrix) else matrix,
                          dtype=float)
        n = M.shape[0]
        if M.shape != (n, n):
            raise ValueError(f"operator matrix must be square, got {M.shape}")
        vols = np.ones(n) if volumes is None else np.asarray(volumes, dtype=float)
        cells = np.arange(n) if cells is None else np.asarray(cells)
        return cls(M, cells, vols, **kw)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_zero(self) -> bool:
        return self.matrix.nnz == 0 or not np.any(self.matrix.data)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def submatrix(self, cells) -> "UlamOperator":
        """Operator of the chain killed on leaving ``cells`` (partition indices)."""
        pos = np.searchsorted(self.cells, cells)
        if np.any(pos >= self.n) or np.any(self.cells[np.minimum(pos, self.n - 1)] != cells):
            raise ValueError("restriction cells are not all active")
        M = self.matrix[pos][:, pos].tocsr()
        return UlamOperator(M, np.asarray(cells), self.volumes[pos], self.weight_applied,
                            self.epsilon, self.weight_id, self.resolution, self.flags)

    def positions(self, cells) -> np.ndarray:
        """Row indices of the given partition cells (all must be active)."""
        pos = np.searchsorted(self.cells, cells)
        if np.any(pos >= self.n) or np.any(self.cells[np.minimum(pos, self.n - 1)] != cells):
            raise ValueError("cells are not all active")
        return pos


@dataclass(frozen=True)
class DualOperator:
    matrix: sp.csr_matrix
    cells: np.ndarray
    volumes: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def dual(op: UlamOperator) -> DualOperator:
    """``L[j, i] = P[i, j] vol_i / vol_j``; similar to ``P.T``."""
    v = op.volumes
    L = sp.diags(1.0 / v) @ op.matrix.T.tocsr() @ sp.diags(v)
    return DualOperator(L.tocsr(), op.cells, v)


def apply(op, f, out=None) -> np.ndarray:
    f = np.asarray(f)
    if f.shape[0] != op.n:
        raise ValueError(f"vector has length {f.shape[0]}, operator acts on {op.n} cells")
    r = op.matrix @ f
    if out is not None:
        out[...] = r
        return out
    return r


# ---------------------------------------------------------------------------
# assembly


def active_cells(m: MapSystem, partition: CellPartition) -> np.ndarray:
    """Cells with positive volume outside the hole."""
    bounds = partition.cells  # (n, dim, 2)
    covered = np.zeros(partition.n_cells)
    for box in m.hole.boxes:
        part = np.ones(partition.n_cells)
        for a in range(partition.dim):
            part *= _hole_axis_overlap(bounds[:, a, 0], bounds[:, a, 1],
                                       box[0][a], box[1][a], m.hole.periodic)
        covered += part
    free = partition.volumes - covered
    return np.flatnonzero(free > 1e-12 * partition.volumes)


def _hole_axis_overlap(a, b, hl, hr, periodic):
    shifts = (-1.0, 0.0, 1.0) if periodic else (0.0,)
    out = 0.0
    for s in shifts:
        out = out + np.clip(np.minimum(b, hr + s) - np.maximum(a, hl + s), 0.0, None)
    return out


def assemble(m: MapSystem, kernel: NoiseKernel, weight: WeightFunction | None,
             partition: CellPartition, active=None, quadrature: int = 3,
             deterministic: bool = False) -> UlamOperator:
    """Assemble the annealed Koopman matrix on ``active`` cells.

    Parameters
    ----------
    active : array of int, optional
        Partition indices kept; defaults to every cell not swallowed by
        the hole.  Mass leaving the active set is killed, which is how
        local (one region) and global problems share this code path.
    quadrature : int
        Gauss-Legendre nodes per axis and cell.
    deterministic : bool
        Classic Ulam matrix (``epsilon = 0``): each node is sent to the
        cell containing its image.  With an odd node count the middle node of
        a cell can land exactly on a cell boundary (doubling map, dyadic
        cells), which skews the row; use an even count on this path.
    """
    weight = weight if weight is not None else constant_weight(0.0)
    active = active_cells(m, partition) if active is None else np.unique(np.asarray(active))
    if active.size == 0:
        raise ValueError("no active cells")
    if kernel.epsilon == 0.0 and not deterministic:
        raise ValueError("epsilon = 0 requires deterministic=True")
    if kernel.dim != partition.dim:
        raise ValueError("noise dimension does not match the state space")

    nodes, qw = partition.quadrature(quadrature, active)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.asarray(weight(nodes), dtype=float)
    phi = np.broadcast_to(phi, nodes.shape[:2]).copy()
    if not np.all(np.isfinite(phi)):
        raise ValueError(f"weight {weight.id} is not finite on the active cells")
    node_factor = np.exp(phi) * qw[None, :]

    col_of = np.full(partition.n_cells, -1, dtype=np.int64)
    col_of[active] = np.arange(active.size)

    if deterministic:
        M = _assemble_deterministic(m, partition, nodes, node_factor, col_of)
    else:
        M = _assemble_noisy(m, kernel, partition, nodes, node_factor, col_of)

    flags = ()
    if M.nnz == 0 or not np.any(M.data):
        log.warning("assembled operator is identically zero: every active cell escapes")
        flags = ("zero",)
    wconst = weight.constant
    return UlamOperator(M, active, partition.volumes[active],
                        weight_applied=not (wconst is not None and wconst == 0.0),
                        epsilon=float(kernel.epsilon), weight_id=weight.id,
                        resolution=partition.resolution, flags=flags)


def _assemble_deterministic(m, partition, nodes, node_factor, col_of):
    n_rows, n_q = nodes.shape[:2]
    img = m.step(nodes)
    alive = m.alive(img)
    tgt = np.where(alive, col_of[partition.locate(np.where(
        alive[..., None] if m.dim > 1 else alive, img, 0.0))], -1)
    rows = np.broadcast_to(np.arange(n_rows)[:, None], (n_rows, n_q))
    keep = tgt >= 0
    M = sp.coo_matrix((node_factor[keep], (rows[keep], tgt[keep])),
                      shape=(n_rows, n_rows)).tocsr()
    M.sum_duplicates()
    return M


def _axis_pieces(alpha, beta, lo, h, n, periodic, hole_axes, K):
    """Per-axis overlaps of ``[alpha, beta]`` with the K cells it can touch.

    Returns target indices (−1 if outside a non-periodic space), cell
    overlaps and, per hole box, the overlap with cell ∩ hole slab.
    """
    k0 = np.floor((alpha - lo) / h).astype(np.int64)
    t = np.arange(K)
    j = k0[..., None] + t
    left = lo + j * h
    right = left + h
    a = alpha[..., None]
    b = beta[..., None]
    ov = np.clip(np.minimum(b, right) - np.maximum(a, left), 0.0, None)
    holes = [_hole_axis_overlap(np.maximum(a, left), np.minimum(b, right), hl, hr, periodic)
             for hl, hr in hole_axes]
    if periodic:
        j = np.mod(j, n)
    else:
        j = np.where((j >= 0) & (j < n), j, -1)
    return j, ov, holes


def _assemble_noisy(m, kernel, partition, nodes, node_factor, col_of):
    eps = kernel.epsilon
    dim = partition.dim
    n_rows, n_q = nodes.shape[:2]
    h = partition.widths
    K = [int(np.ceil(2.0 * eps / h[a])) + 2 for a in range(dim)]
    per_row = n_q * int(np.prod(K))
    chunk = max(1, _CHUNK // per_row)
    hole: Hole = m.hole
    scale = 1.0 / kernel.box_volume
    blocks = []
    for r0 in range(0, n_rows, chunk):
        r1 = min(n_rows, r0 + chunk)
        img = np.asarray(m.eval(nodes[r0:r1]), dtype=float)
        if m.state_space.periodic:
            img = m.state_space.wrap(img)
        fac = node_factor[r0:r1] * scale
        if dim == 1:
            img = img[..., None]
        pieces = []
        for a in range(dim):
            hole_axes = [(box[0][a], box[1][a]) for box in hole.boxes]
            pieces.append(_axis_pieces(img[..., a] - eps, img[..., a] + eps,
                                       partition.space.lower[a], h[a], partition.resolution,
                                       partition.space.periodic, hole_axes, K[a]))
        if dim == 1:
            j, ov, holes = pieces[0]
            val = ov - sum(holes) if holes else ov
            flat = j
        else:
            (jx, ox, hx), (jy, oy, hy) = pieces
            val = ox[..., :, None] * oy[..., None, :]
            for bx, by in zip(hx, hy):
                val = val - bx[..., :, None] * by[..., None, :]
            valid = (jx[..., :, None] >= 0) & (jy[..., None, :] >= 0)
            flat = np.where(valid, jx[..., :, None] * partition.resolution + jy[..., None, :], -1)
            val = val.reshape(val.shape[:2] + (-1,))
            flat = flat.reshape(flat.shape[:2] + (-1,))
        val = np.clip(val, 0.0, None) * fac[..., None]
        cols = np.where(flat >= 0, col_of[np.maximum(flat, 0)], -1)
        rows = np.broadcast_to(np.arange(r0, r1)[:, None, None], cols.shape)
        keep = (cols >= 0) & (val > 0.0)
        blocks.append(sp.coo_matrix((val[keep], (rows[keep], cols[keep])),
                                    shape=(n_rows, n_rows)).tocsr())
    M = blocks[0]
    for b in blocks[1:]:
        M = M + b
    M = M.tocsr()
    M.sum_duplicates()
    M.eliminate_zeros()
    return M


# ---------------------------------------------------------------------------
# persistence


def volumes_digest(volumes) -> str:
    return hashlib.sha256(np.ascontiguousarray(volumes, dtype="<f8").tobytes()).hexdigest()


def dump_operator(op: UlamOperator, path) -> tuple:
    """Write ``<path>.csv`` (row,col,value triplets) and ``<path>.json``."""
    path = Path(path)
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = ["row,col,value"]
    lines += [f"{r},{c},{float(v)!r}" for r, c, v in
              zip(coo.row[order], coo.col[order], coo.data[order])]
    csv_path = path.with_suffix(".csv")
    csv_path.write_text("\n".join(lines) + "\n")
    meta = {
        "resolution": op.resolution,
        "epsilon": op.epsilon,
        "weight_id": op.weight_id,
        "active_cells": [int(c) for c in op.cells],
        "volumes_digest": volumes_digest(op.volumes),
    }
    json_path = path.with_suffix(".json")
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_operator(path, partition: CellPartition | None = None, volumes=None) -> UlamOperator:
    """Inverse of :func:`dump_operator`; volumes come from ``partition`` or ``volumes``."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    cells = np.asarray(meta["active_cells"], dtype=np.int64)
    if volumes is None:
        if partition is None:
            raise ValueError("need a partition or explicit volumes to restore an operator")
        volumes = partition.volumes[cells]
    volumes = np.asarray(volumes, dtype=float)
    if volumes_digest(volumes) != meta["volumes_digest"]:
        raise ValueError("volumes do not match the digest stored with the operator")
    rows, cols, vals = [], [], []
    with open(path.with_suffix(".csv")) as fh:
        header = fh.readline().strip()
        if header != "row,col,value":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            r, c, v = line.rstrip("\n").split(",")
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    n = cells.size
    M = sp.csr_matrix((np.asarray(vals), (np.asarray(rows, dtype=np.int64),
                                          np.asarray(cols, dtype=np.int64))), shape=(n, n))
    M.sort_indices()
    return UlamOperator(M, cells, volumes, weight_applied=meta["weight_id"] != "constant(0.0)",
                        epsilon=float(meta["epsilon"]), weight_id=meta["weight_id"],
                        resolution=meta["resolution"])
