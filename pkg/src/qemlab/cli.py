"""Experiment orchestration: TOML configs, epsilon sweeps, artifacts.

Subcommands ``sweep``, ``single``, ``oracle``, ``simulate`` and
``regions`` write everything under the output directory together with a
``manifest.json`` listing sha256 digests of every artifact and the
resolved configuration.  Exit status is 0 when a sweep converged, 2 when
it ran but did not converge and 1 on error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.stats import wasserstein_distance

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import (CellPartition, MapSystem, WeightFunction, build_map, constant_weight,
                       geometric_weight, survivor_cells, tabulated_weight)
from .noise import NoiseKernel
from .operator import active_cells, assemble, dump_operator
from .oracle import interval_markov_model, pressure, push_forward
from .regions import build_regions, dump_regions, restrict
from .simulate import run_conditioned, write_trace
from .spectral import dump_triple, quasi_ergodic, solve_triple

__all__ = [
    "ExperimentConfig",
    "SweepRow",
    "SweepReport",
    "load_config",
    "run_sweep",
    "run_single",
    "run_oracle",
    "run_simulate",
    "run_regions",
    "w1_distance",
    "sliced_w1",
    "report_schema",
    "main",
]

log = logging.getLogger("qemlab")

EXIT_CONVERGED, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
N_DIRECTIONS = 64
W1_ZERO = 1e-12


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Resolved experiment description.

    ``resolutions`` holds either one value (used for every epsilon) or one
    per epsilon.  ``weight`` is a table with ``kind`` in ``constant``
    (``c``), ``geometric`` (``t``: ``phi = (1 - t) log|T'|``) or
    ``tabulated`` (``values`` on a uniform grid).
    """

    map_id: str
    epsilons: list
    resolutions: list
    map_params: dict = field(default_factory=dict)
    hole: list | None = None
    weight: dict = field(default_factory=lambda: {"kind": "constant", "c": 0.0})
    mode: str = "global"
    local_class: int | str = "dominant"
    cover_depth: int = 0
    oracle: dict = field(default_factory=lambda: {"kind": "intervals", "depth": 12,
                                                  "designate": "pressure", "tol": 1e-2})
    monte_carlo: dict = field(default_factory=dict)
    tol: float = 1e-12
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        eps = [float(e) for e in self.epsilons]
        if not eps:
            raise ValueError("epsilon list is empty")
        if any(e <= 0 for e in eps):
            raise ValueError("epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly descending")
        self.epsilons = eps
        res = [int(r) for r in self.resolutions]
        if not res or any(r < 1 or r & (r - 1) for r in res):
            raise ValueError(f"resolutions must be powers of two, got {self.resolutions}")
        if len(res) not in (1, len(eps)):
            raise ValueError("give one resolution or one per epsilon")
        self.resolutions = res
        if self.mode not in ("global", "local"):
            raise ValueError(f"mode must be 'global' or 'local', got {self.mode!r}")
        if self.weight.get("kind", "constant") not in ("constant", "geometric", "tabulated"):
            raise ValueError(f"unknown weight kind {self.weight.get('kind')!r}")
        if self.cover_depth < 0:
            raise ValueError("cover_depth must be non-negative")

    def resolution_for(self, k: int) -> int:
        return self.resolutions[0] if len(self.resolutions) == 1 else self.resolutions[k]

    def build_map(self) -> MapSystem:
        return build_map(self.map_id, self.map_params, self.hole)

    def build_weight(self, m: MapSystem) -> WeightFunction:
        kind = self.weight.get("kind", "constant")
        if kind == "constant":
            return constant_weight(float(self.weight.get("c", 0.0)))
        if kind == "geometric":
            return geometric_weight(m, float(self.weight.get("t", 1.0)))
        values = np.asarray(self.weight["values"], dtype=float)
        res = int(round(values.size ** (1.0 / m.dim)))
        return tabulated_weight(CellPartition(m.state_space, res), values)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return _sha256(_canonical(self.to_dict()).encode())

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = copy.deepcopy(self.to_dict())
        d.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig(**d)


def load_config(path) -> ExperimentConfig:
    """Read a TOML experiment file.

    Top-level keys ``seed``, ``out``, ``mode``, ``local_class``,
    ``cover_depth``, ``tol`` and tables ``[map]`` (``id``, ``params``,
    ``hole``), ``[weight]``, ``[partition]`` (``resolutions``),
    ``[noise]`` (``epsilons``), ``[oracle]``, ``[monte_carlo]``.
    """
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    mp = doc.get("map", {})
    if "id" not in mp:
        raise ValueError("config needs [map] id")
    kw = dict(
        map_id=mp["id"],
        map_params=dict(mp.get("params", {})),
        hole=mp.get("hole"),
        epsilons=doc.get("noise", {}).get("epsilons", []),
        resolutions=doc.get("partition", {}).get("resolutions", []),
    )
    if "weight" in doc:
        kw["weight"] = dict(doc["weight"])
    if "oracle" in doc:
        oc = {"kind": "intervals", "depth": 12, "designate": "pressure", "tol": 1e-2}
        oc.update(doc["oracle"])
        kw["oracle"] = oc
    if "monte_carlo" in doc:
        kw["monte_carlo"] = dict(doc["monte_carlo"])
    for key in ("mode", "local_class", "cover_depth", "tol", "seed", "out"):
        if key in doc:
            kw[key] = doc[key]
    return ExperimentConfig(**kw)


# ---------------------------------------------------------------------------
# helpers


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _file_digest(path: Path) -> str:
    return _sha256(path.read_bytes())


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def report_schema() -> dict:
    """JSON schema of the sweep report."""
    text = resources.files("qemlab").joinpath("schemas/sweep_report.schema.json").read_text()
    return json.loads(text)


def w1_distance(partition: CellPartition, u, v) -> float:
    """Wasserstein-1 distance between two cell measures on one partition.

    One dimension: exact, via the CDF difference (cell masses at cell
    centers).  Two dimensions: sliced over 64 fixed directions.
    """
    if partition.dim == 1:
        c = partition.centers()
        return float(wasserstein_distance(c, c, u, v))
    return sliced_w1(partition.centers(), u, v)


def sliced_w1(points, u, v, n_directions: int = N_DIRECTIONS) -> float:
    """Average 1-D W1 of the projections onto ``n_directions`` fixed angles."""
    points = np.asarray(points, dtype=float)
    angles = np.pi * np.arange(n_directions) / n_directions
    total = 0.0
    for a in angles:
        proj = points @ np.array([math.cos(a), math.sin(a)])
        total += wasserstein_distance(proj, proj, u, v)
    return float(total / n_directions)


def refine(weights_full, coarse: CellPartition, fine: CellPartition) -> np.ndarray:
    """Spread a measure on ``coarse`` uniformly onto the nested ``fine`` grid."""
    r = fine.resolution // coarse.resolution
    w = np.asarray(weights_full, dtype=float).reshape(coarse.shape)
    for axis in range(coarse.dim):
        w = np.repeat(w, r, axis=axis) / r
    return w.ravel()


def _full(partition: CellPartition, cells, values) -> np.ndarray:
    out = np.zeros(partition.n_cells)
    out[cells] = values
    return out


@dataclass(frozen=True)
class Reference:
    kind: str
    pressure: float
    weights: np.ndarray | None
    partition: CellPartition | None
    extra: dict = field(default_factory=dict)

    @property
    def digest(self) -> str | None:
        if self.weights is None:
            return None
        return _sha256(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "pressure": _json_float(self.pressure),
             "measure_digest": self.digest}
        d.update(self.extra)
        return d


def build_reference(cfg: ExperimentConfig, m: MapSystem, weight: WeightFunction,
                    partition: CellPartition) -> Reference:
    """Oracle pressure and equilibrium state on the common partition."""
    oc = cfg.oracle
    kind = oc.get("kind", "intervals")
    if kind == "none":
        return Reference("none", math.nan, None, None)
    if kind == "intervals":
        model = interval_markov_model(m, int(oc.get("depth", 12)), weight)
        model = model.designate(oc.get("designate", "pressure"))
        eq = pressure(model)
        ref = push_forward(eq, model, partition)
        return Reference(kind, eq.pressure, ref, partition,
                         {"entropy": eq.entropy, "integral": eq.integral,
                          "depth": int(oc.get("depth", 12)), "n_states": model.n_states})
    if kind == "ulam0":
        # an even node count keeps the middle node off dyadic cell boundaries
        op = assemble(m, NoiseKernel(0.0, m.dim), weight, partition, quadrature=4,
                      active=active_cells(m, partition), deterministic=True)
        tr = solve_triple(op, tol=cfg.tol)
        nu = quasi_ergodic(tr)
        return Reference(kind, tr.log_lambda, _full(partition, tr.cells, nu.weights), partition)
    raise ValueError(f"unknown oracle kind {kind!r}")


# ---------------------------------------------------------------------------
# one epsilon


@dataclass
class EpsilonResult:
    epsilon: float
    partition: CellPartition
    op: object
    graph: object
    triple: object
    nu: object
    local_gap: float


def _pipeline(cfg: ExperimentConfig, m: MapSystem, weight: WeightFunction, epsilon: float,
              resolution: int, warm=None) -> EpsilonResult:
    part = CellPartition(m.state_space, resolution)
    act = active_cells(m, part)
    op = assemble(m, NoiseKernel(epsilon, m.dim), weight, part, active=act)
    cover = np.intersect1d(survivor_cells(m, part, cfg.cover_depth), act)
    phi_min = _phi_min(weight, part, act)
    graph = build_regions(op, part, cover, phi_min=phi_min)
    used = op
    if cfg.mode == "local":
        k = graph.dominant if cfg.local_class == "dominant" else int(cfg.local_class)
        used = restrict(op, graph, k)
    g0 = m0 = None
    if warm is not None and warm.triple.cells.size == used.n and np.array_equal(
            warm.triple.cells, used.cells):
        g0, m0 = warm.triple.g, warm.triple.m
    triple = solve_triple(used, tol=cfg.tol, g0=g0, m0=m0)
    nu = quasi_ergodic(triple)
    gap = abs(triple.lam - graph.class_lambda[graph.dominant])
    return EpsilonResult(epsilon, part, used, graph, triple, nu, float(gap))


def _phi_min(weight, part, cells) -> float:
    nodes, _ = part.quadrature(1, cells)
    vals = np.asarray(weight(nodes), dtype=float)
    return float(np.min(vals)) if vals.size else 0.0


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    resolution: int
    lam: float
    log_lambda: float
    period: int
    n_classes: int
    n_recurrent: int
    dominant_class: int
    dominant_lambda: float
    local_global_gap: float
    w1_distance_to_reference: float | None

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "resolution": self.resolution,
            "lambda": self.lam,
            "log_lambda": self.log_lambda,
            "period": self.period,
            "n_classes": self.n_classes,
            "n_recurrent": self.n_recurrent,
            "dominant_class": self.dominant_class,
            "dominant_lambda": self.dominant_lambda,
            "local_global_gap": self.local_global_gap,
            "w1_distance_to_reference": self.w1_distance_to_reference,
        }


@dataclass
class SweepReport:
    rows: list
    reference: dict
    config_digest: str
    converged: bool = False
    final_gap: float | None = None
    w1_decreasing: bool = False
    classes_stable: bool = False
    completed: bool = True
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "reference": self.reference,
            "config_digest": self.config_digest,
            "converged": self.converged,
            "final_gap": self.final_gap,
            "w1_decreasing": self.w1_decreasing,
            "classes_stable": self.classes_stable,
            "completed": self.completed,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _verdict(report: SweepReport, ref_pressure: float, tol: float) -> None:
    rows = report.rows
    if not rows:
        return
    w1 = [r.w1_distance_to_reference for r in rows[-3:]]
    # distances at round-off level count as tied at zero
    report.w1_decreasing = (len(w1) >= 2 and all(x is not None for x in w1)
                            and all(b < a or max(a, b) <= W1_ZERO for a, b in zip(w1, w1[1:])))
    counts = [r.n_classes for r in rows[-3:]]
    report.classes_stable = len(counts) == 3 and len(set(counts)) == 1
    if math.isfinite(ref_pressure):
        report.final_gap = abs(rows[-1].log_lambda - ref_pressure)
        report.converged = bool(report.final_gap <= tol and report.w1_decreasing)
    if not report.classes_stable:
        log.warning("class count over the last three epsilons is %s (not yet stable)", counts)


def run_sweep(cfg: ExperimentConfig, out_dir=None, observer=None) -> SweepReport:
    """Zero-noise sweep: one pipeline pass per epsilon against a fixed reference.

    Writes ``report.json``, ``rows.csv`` and ``manifest.json`` when
    ``out_dir`` is given; a failure persists the partial report and
    re-raises.  ``observer``, if given, is called with each
    :class:`EpsilonResult` as it is produced.
    """
    m = cfg.build_map()
    weight = cfg.build_weight(m)
    finest = CellPartition(m.state_space, max(cfg.resolutions))
    ref = build_reference(cfg, m, weight, finest)
    report = SweepReport([], ref.to_dict(), cfg.digest())
    prev = None
    try:
        for k, eps in enumerate(cfg.epsilons):
            res = cfg.resolution_for(k)
            r = _pipeline(cfg, m, weight, eps, res, warm=prev)
            prev = r
            if observer is not None:
                observer(r)
            w1 = None
            if ref.weights is not None:
                nu_fine = refine(_full(r.partition, r.triple.cells, r.nu.weights),
                                 r.partition, finest)
                w1 = w1_distance(finest, nu_fine, ref.weights)
            row = SweepRow(eps, res, r.triple.lam, r.triple.log_lambda, r.triple.period,
                           r.graph.n_classes, len(r.graph.recurrent), r.graph.dominant,
                           float(r.graph.class_lambda[r.graph.dominant]), r.local_gap, w1)
            log.info("eps=%.3g res=%d lambda=%.10g classes=%d w1=%s", eps, res,
                     row.lam, row.n_classes, w1)
            report.rows.append(row)
    except Exception as exc:
        report.completed = False
        report.error = f"{type(exc).__name__}: {exc}"
        if out_dir is not None:
            _write_sweep(report, cfg, Path(out_dir))
        raise
    _verdict(report, ref.pressure, float(cfg.oracle.get("tol", 1e-2)))
    if out_dir is not None:
        _write_sweep(report, cfg, Path(out_dir))
    return report


def _write_sweep(report: SweepReport, cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "rows.csv"]
    paths[0].write_text(report.to_json())
    with open(paths[1], "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        keys = list(SweepRow.__dataclass_fields__)
        wr.writerow(["lambda" if k == "lam" else k for k in keys])
        for r in report.rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in
                         (getattr(r, k) for k in keys)])
    write_manifest(out, cfg, paths)


def write_manifest(out: Path, cfg: ExperimentConfig, paths) -> Path:
    """``manifest.json`` with the resolved config, its digest and file digests."""
    files = {str(Path(p).relative_to(out)): _file_digest(Path(p)) for p in paths}
    doc = {"config": cfg.to_dict(), "config_digest": cfg.digest(),
           "files": dict(sorted(files.items()))}
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# other subcommands


def _observables(cfg: ExperimentConfig, dim: int = 1) -> list:
    specs = cfg.monte_carlo.get("observables", [{"kind": "identity"}])
    out = []
    for s in specs:
        kind = s.get("kind", "identity")
        axis = int(s.get("axis", 0))
        if kind == "identity":
            name = f"x{axis}"

            def h(x, axis=axis):
                x = np.asarray(x, dtype=float)
                return x if dim == 1 else x[..., axis]
        elif kind == "indicator":
            lo, hi = float(s["lo"]), float(s["hi"])
            name = f"1[{lo!r},{hi!r})"

            def h(x, lo=lo, hi=hi, axis=axis):
                x = np.asarray(x, dtype=float)
                x = x if dim == 1 else x[..., axis]
                return ((x >= lo) & (x < hi)).astype(float)
        else:
            raise ValueError(f"unknown observable kind {kind!r}")
        out.append((name, h))
    return out


def _cell_values(h, partition: CellPartition, cells) -> np.ndarray:
    nodes, wts = partition.quadrature(3, cells)
    return np.asarray(h(nodes), dtype=float) @ wts


def run_single(cfg: ExperimentConfig, epsilon: float | None = None, out_dir=None,
               threads: int = 1) -> dict:
    """One pipeline pass with every artifact persisted."""
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    eps = float(epsilon if epsilon is not None else cfg.epsilons[-1])
    k = cfg.epsilons.index(eps) if eps in cfg.epsilons else len(cfg.epsilons) - 1
    m = cfg.build_map()
    weight = cfg.build_weight(m)
    r = _pipeline(cfg, m, weight, eps, cfg.resolution_for(k))
    paths = list(dump_operator(r.op, out / "operator.csv"))
    paths += dump_triple(r.triple, out, r.nu, prefix="triple")
    paths += dump_regions(r.graph, out)
    summary = {
        "epsilon": eps,
        "resolution": r.partition.resolution,
        "lambda": r.triple.lam,
        "log_lambda": r.triple.log_lambda,
        "period": r.triple.period,
        "regions": r.graph.summary(),
        "local_global_gap": r.local_gap,
    }
    if cfg.monte_carlo.get("enabled", False):
        checks = []
        for idx, (name, h) in enumerate(_observables(cfg, m.dim)):
            est = run_conditioned(m, NoiseKernel(eps, m.dim), weight, h,
                                  int(cfg.monte_carlo.get("horizon", 100)),
                                  int(cfg.monte_carlo.get("particles", 10000)),
                                  seed=cfg.seed, islands=int(cfg.monte_carlo.get("islands", 16)),
                                  threads=threads)
            spectral_value = r.nu.integrate(_cell_values(h, r.partition, r.triple.cells))
            checks.append({"observable": name, "monte_carlo": est.value, "stderr": est.stderr,
                           "spectral": spectral_value, "lambda_hat": est.lambda_hat,
                           "agree": bool(abs(est.value - spectral_value) <= 3 * est.stderr)})
        summary["monte_carlo"] = checks
    p = out / "single.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths.append(p)
    write_manifest(out, cfg, paths)
    return summary


def run_oracle(cfg: ExperimentConfig, out_dir=None) -> dict:
    m = cfg.build_map()
    weight = cfg.build_weight(m)
    oc = cfg.oracle
    model = interval_markov_model(m, int(oc.get("depth", 12)), weight)
    model = model.designate(oc.get("designate", "pressure"))
    eq = pressure(model)
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "model.json", out / "equilibrium.json"]
    paths[0].write_text(model.to_json() + "\n")
    paths[1].write_text(eq.to_json() + "\n")
    write_manifest(out, cfg, paths)
    return {"pressure": eq.pressure, "entropy": eq.entropy, "integral": eq.integral,
            "variational_gap": eq.variational_gap, "n_states": model.n_states}


def run_simulate(cfg: ExperimentConfig, epsilon: float | None = None, out_dir=None,
                 threads: int = 1) -> dict:
    m = cfg.build_map()
    weight = cfg.build_weight(m)
    eps = float(epsilon if epsilon is not None else cfg.epsilons[-1])
    out = Path(out_dir or cfg.out)
    paths, result = [], {}
    for name, h in _observables(cfg, m.dim):
        est = run_conditioned(m, NoiseKernel(eps, m.dim), weight, h,
                              int(cfg.monte_carlo.get("horizon", 100)),
                              int(cfg.monte_carlo.get("particles", 10000)), seed=cfg.seed,
                              islands=int(cfg.monte_carlo.get("islands", 16)),
                              threads=threads, record=True)
        slug = "".join(ch if ch.isalnum() else "_" for ch in name).strip("_")
        paths += write_trace(est, out, prefix=f"conditioned_{slug}")
        result[name] = {"value": est.value, "stderr": est.stderr, "lambda_hat": est.lambda_hat}
    write_manifest(out, cfg, paths)
    return result


def run_regions(cfg: ExperimentConfig, epsilon: float | None = None, out_dir=None) -> dict:
    m = cfg.build_map()
    weight = cfg.build_weight(m)
    eps = float(epsilon if epsilon is not None else cfg.epsilons[-1])
    k = cfg.epsilons.index(eps) if eps in cfg.epsilons else len(cfg.epsilons) - 1
    part = CellPartition(m.state_space, cfg.resolution_for(k))
    act = active_cells(m, part)
    op = assemble(m, NoiseKernel(eps, m.dim), weight, part, active=act)
    cover = np.intersect1d(survivor_cells(m, part, cfg.cover_depth), act)
    graph = build_regions(op, part, cover, phi_min=_phi_min(weight, part, act))
    out = Path(out_dir or cfg.out)
    paths = dump_regions(graph, out)
    write_manifest(out, cfg, paths)
    return graph.summary()


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qemlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("sweep", "epsilon sweep against the oracle reference"),
                           ("single", "one pipeline pass with all artifacts"),
                           ("oracle", "pressure and equilibrium state of the symbolic model"),
                           ("simulate", "Monte Carlo conditioned averages"),
                           ("regions", "region graph of the survivor cover")]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed)
        out = args.out or Path(cfg.out)
        if args.command == "sweep":
            if args.epsilon is not None:
                cfg = cfg.with_overrides(epsilons=[args.epsilon])
            report = run_sweep(cfg, out)
            print(json.dumps({"converged": report.converged, "final_gap": report.final_gap,
                              "w1_decreasing": report.w1_decreasing}))
            return EXIT_CONVERGED if report.converged else EXIT_NOT_CONVERGED
        if args.command == "single":
            result = run_single(cfg, args.epsilon, out, threads=args.threads)
        elif args.command == "oracle":
            result = run_oracle(cfg, out)
        elif args.command == "simulate":
            result = run_simulate(cfg, args.epsilon, out, threads=args.threads)
        else:
            result = run_regions(cfg, args.epsilon, out)
        print(json.dumps(result, indent=2, sort_keys=True, default=float))
        return EXIT_CONVERGED
    except Exception as exc:  # report and signal failure to the caller
        log.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
