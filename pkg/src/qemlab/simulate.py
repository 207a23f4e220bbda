"""Monte Carlo for the weighted, absorbed noisy process.

Particles carry the Feynman-Kac weight ``exp(S_n phi)`` in log space and
are killed outright on entering the hole or leaving the state space.
When the effective sample size falls below half the ensemble, the
ensemble is resampled multinomially and the mean weight is folded into a
running log-normalization, whose growth estimates ``log lambda``.

Independent islands (rng seed ``seed + island``) give a bootstrap
standard error that accounts for genealogical degeneracy of the
path-space estimator.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .dynamics import CellPartition, MapSystem, WeightFunction, survivor_cells
from .noise import NoiseKernel, sample_steps

__all__ = [
    "ParticleEnsemble",
    "ConditionedEstimate",
    "Extinction",
    "LowEffectiveSampleSize",
    "uniform_survivor_law",
    "run_conditioned",
    "survival_curve",
    "survival_rate",
    "write_trace",
]


class Extinction(RuntimeError):
    """Every particle died before the horizon."""

    def __init__(self, msg, histogram):
        super().__init__(msg)
        self.histogram = histogram


class LowEffectiveSampleSize(RuntimeError):
    """Final effective sample size below the configured floor."""


@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    log_weights: np.ndarray
    alive: np.ndarray
    step: int = 0
    log_norm: float = 0.0

    @property
    def size(self) -> int:
        return self.alive.size

    def ess(self) -> float:
        lw = self.log_weights[self.alive]
        if lw.size == 0:
            return 0.0
        return float(math.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))

    def log_mean_weight(self) -> float:
        lw = np.where(self.alive, self.log_weights, -np.inf)
        if not self.alive.any():
            return -math.inf
        return float(logsumexp(lw) - math.log(self.size))


@dataclass(frozen=True)
class ConditionedEstimate:
    value: float
    stderr: float
    n: int
    N: int
    lambda_hat: float
    ess: float
    islands: int = 1
    resamples: int = 0
    island_values: tuple = field(default_factory=tuple)
    trace: tuple = field(default_factory=tuple, repr=False)

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("trace")
        d["island_values"] = list(self.island_values)
        return json.dumps(d, indent=2, sort_keys=True)


def uniform_survivor_law(m: MapSystem, depth: int = 10, resolution: int | None = None
                         ) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Sampler for the uniform law on the depth-``n`` survivor cells.

    Points drawn inside a kept cell but in the hole are redrawn.
    """
    if resolution is None:
        resolution = 1024 if m.dim == 1 else 128
    part = CellPartition(m.state_space, resolution)
    cells = survivor_cells(m, part, depth)
    if cells.size == 0:
        raise Extinction(f"no survivor cells at depth {depth}", np.zeros(1, dtype=int))
    lower = part.cells[cells][:, :, 0]
    width = part.widths

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, m.dim))
        todo = np.arange(size)
        for _ in range(1000):
            k = rng.integers(0, cells.size, size=todo.size)
            x = lower[k] + rng.random((todo.size, m.dim)) * width
            ok = m.alive(x[:, 0] if m.dim == 1 else x)
            out[todo[ok]] = x[ok]
            todo = todo[~ok]
            if todo.size == 0:
                break
        else:
            raise RuntimeError("could not draw initial points outside the hole")
        return out[:, 0] if m.dim == 1 else out

    return draw


def _h_values(h, x):
    return np.asarray(h(x), dtype=float)


def _weights(weight, x):
    if weight is None:
        return 0.0
    return np.asarray(weight(x), dtype=float)


def _run_island(m, kernel, weight, h, n, N, rng, start, record):
    x = start(rng, N)
    alive = m.alive(x)
    ens = ParticleEnsemble(x, np.where(alive, 0.0, -np.inf), alive)
    acc = np.zeros(N)
    death = np.full(N, n + 1)
    death[~alive] = 0
    resamples = 0
    trace = []
    for i in range(n):
        xa = np.where(ens.alive, ens.positions, 0.0) if m.dim == 1 else np.where(
            ens.alive[:, None], ens.positions, 0.0)
        acc += np.where(ens.alive, _h_values(h, xa), 0.0)
        ens.log_weights = ens.log_weights + _weights(weight, xa)
        y, ok = sample_steps(m, kernel, xa, rng)
        newly_dead = ens.alive & ~ok
        death[newly_dead] = i + 1
        ens.alive = ens.alive & ok
        ens.positions = y
        ens.log_weights = np.where(ens.alive, ens.log_weights, -np.inf)
        ens.step = i + 1
        if not ens.alive.any():
            hist = np.bincount(death, minlength=n + 2)
            raise Extinction(f"all {N} particles absorbed by step {i + 1}", hist)

        if record:
            lw = ens.log_weights
            w = np.exp(lw - lw[ens.alive].max())
            est = float(np.sum(w * acc) / (np.sum(w) * (i + 1)))
            logz = ens.log_norm + ens.log_mean_weight()
            trace.append((i + 1, logz, est, ens.ess()))

        if ens.ess() < 0.5 * N:
            lmw = ens.log_mean_weight()
            p = np.exp(ens.log_weights - logsumexp(ens.log_weights))
            idx = rng.choice(N, size=N, p=p)
            ens.positions = ens.positions[idx]
            acc = acc[idx]
            ens.alive = np.ones(N, dtype=bool)
            ens.log_weights = np.zeros(N)
            ens.log_norm += lmw
            resamples += 1

    lw = ens.log_weights
    w = np.exp(lw - lw[ens.alive].max())
    value = float(np.sum(w * acc) / (np.sum(w) * n))
    logz = ens.log_norm + ens.log_mean_weight()
    return value, logz, ens.ess(), resamples, trace


def _combine(values, logz):
    """Normalization-weighted mean of island estimates."""
    w = np.exp(np.asarray(logz) - np.max(logz))
    return float(np.sum(w * values) / np.sum(w))


def run_conditioned(m: MapSystem, kernel: NoiseKernel, weight: WeightFunction | None, h,
                    n: int, N: int, seed: int = 0, x0=None, initial=None, islands: int = 16,
                    ess_floor: float = 10.0, bootstrap: int = 2000, threads: int = 1,
                    record: bool = False) -> ConditionedEstimate:
    """Conditioned time average ``E[e^{S_n phi} 1_{tau>n} (1/n) sum_{i<n} h(X_i)] /
    E[e^{S_n phi} 1_{tau>n}]``.

    Parameters
    ----------
    h : callable
        Observable, evaluated on arrays of states.
    x0 : state, optional
        Common start point.  Otherwise ``initial(rng, size)`` is used, by
        default :func:`uniform_survivor_law` at depth 10.
    islands : int
        Independent sub-ensembles; ``N`` is split evenly among them.
    record : bool
        Keep a per-step trace ``(n, lambda_hat, estimate, ess)``.

    Raises
    ------
    Extinction
        If an island dies out; carries the survival-time histogram.
    LowEffectiveSampleSize
        If the final effective sample size is below ``ess_floor``.
    """
    if n < 1:
        raise ValueError("horizon n must be at least 1")
    if N < 100:
        raise ValueError("need at least 100 particles")
    islands = max(1, min(int(islands), N // 50))
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if np.any(~m.alive(x0)):
            raise ValueError("start point lies in the hole")

        def start(rng, size):
            return np.broadcast_to(x0, (size,) + x0.shape).copy()
    else:
        start = initial or uniform_survivor_law(m)

    sizes = [N // islands + (1 if k < N % islands else 0) for k in range(islands)]

    def job(k):
        rng = np.random.default_rng(seed + k)
        return _run_island(m, kernel, weight, h, n, sizes[k], rng, start, record)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(islands)))
    else:
        results = [job(k) for k in range(islands)]

    values = np.array([r[0] for r in results])
    logz = np.array([r[1] for r in results])
    # island normalizations estimate the same quantity, so weight by island size
    logz_w = logz + np.log(sizes)
    value = _combine(values, logz_w)
    log_lam = float(logsumexp(logz_w) - math.log(N)) / n
    ess = float(sum(r[2] for r in results))
    if ess < ess_floor:
        raise LowEffectiveSampleSize(f"effective sample size {ess:.1f} below floor {ess_floor}")

    stderr = 0.0
    if islands > 1:
        brng = np.random.default_rng(seed + islands)
        picks = brng.integers(0, islands, size=(bootstrap, islands))
        boot = np.array([_combine(values[p], logz_w[p]) for p in picks])
        stderr = float(boot.std(ddof=1))

    trace = ()
    if record:
        rows = []
        for step in range(n):
            lz = np.array([r[4][step][1] for r in results]) + np.log(sizes)
            est = np.array([r[4][step][2] for r in results])
            rows.append((step + 1, float(math.exp((logsumexp(lz) - math.log(N)) / (step + 1))),
                         _combine(est, lz), float(sum(r[4][step][3] for r in results))))
        trace = tuple(rows)
    return ConditionedEstimate(value, stderr, n, N, math.exp(log_lam), ess, islands,
                               int(sum(r[3] for r in results)), tuple(values.tolist()), trace)


def survival_curve(m: MapSystem, kernel: NoiseKernel, x0, n_max: int, N: int, seed: int = 0,
                   initial=None) -> np.ndarray:
    """Fraction of ``N`` unweighted particles alive after ``0..n_max`` steps."""
    rng = np.random.default_rng(seed)
    if x0 is not None:
        x = np.broadcast_to(np.asarray(x0, dtype=float), (N,) + np.shape(x0)).copy()
    else:
        x = (initial or uniform_survivor_law(m))(rng, N)
    alive = m.alive(x)
    out = np.empty(n_max + 1)
    out[0] = alive.mean()
    for i in range(1, n_max + 1):
        idx = np.flatnonzero(alive)
        if idx.size:
            y, ok = sample_steps(m, kernel, x[idx], rng)
            x[idx] = y
            alive[idx] = ok
        out[i] = alive.mean()
    return out


def survival_rate(curve, tail: float = 0.5, min_count: float = 0.0) -> float:
    """``exp`` of the least-squares slope of ``log S(n)`` over the last ``tail``
    fraction of the curve (entries at or below ``min_count`` are dropped)."""
    s = np.asarray(curve, dtype=float)
    n = np.arange(s.size)
    keep = (n >= int((1.0 - tail) * (s.size - 1))) & (s > min_count)
    if keep.sum() < 2:
        raise ValueError("too few surviving points to fit a slope")
    slope = np.polyfit(n[keep], np.log(s[keep]), 1)[0]
    return float(math.exp(slope))


def write_trace(est: ConditionedEstimate, out_dir, prefix: str = "conditioned") -> list:
    """Per-step CSV ``(n, lambda_hat_running, estimate_running, ess)`` plus final JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{prefix}.json"]
    paths[0].write_text(est.to_json() + "\n")
    if est.trace:
        p = out_dir / f"{prefix}_trace.csv"
        with open(p, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["n", "lambda_hat_running", "estimate_running", "ess"])
            for row in est.trace:
                wr.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        paths.append(p)
    return paths
