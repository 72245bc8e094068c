"""Command-line front end: ``vsr-snca {evolve,reassess,stats,replay}``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import glob
import math
import multiprocessing
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .assessment import (LocomotionProtocol, evaluate_locomotion, reassess, terrain_by_id,
                         valid_terrain_ids)
from .config import RunConfig, config_sections, load_config
from .errors import ConfigError, GenotypeShapeError, InvalidSample, InvalidTerrain
from .evolution import EsHistory, run_es
from .nca import build_controller
from .physics import write_trajectory_csv
from .stats import mann_whitney_u
from .terrain import make_terrain

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

MANIFEST = "manifest.ini"
HISTORY = "history.csv"
GENOTYPE = "best_genotype.txt"
OUTCOME = "outcome.csv"
SUMMARY = "summary.csv"
REASSESS = "reassess.csv"
REASSESS_SUMMARY = "reassess_summary.csv"


class UsageError(Exception):
    """Bad input that is the caller's fault (exit code 2)."""


def header(seed: int, **extra) -> str:
    parts = [f"vsr-snca {__version__} seed={seed}"] + [f"{k}={v}" for k, v in extra.items()]
    return " ".join(parts)


def _num(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, comment: str, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------- genotype files


def write_genotype(path: Path, genotype: np.ndarray, comment: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        for v in genotype:
            fh.write(f"{float(v)!r}\n")


def read_genotype(path) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise GenotypeShapeError(f"{path}:{n}: not a number: {line!r}") from None
    return np.array(values, dtype=np.float64)


# ---------------------------------------------------------------- parallel fitness


class Fitness:
    """Picklable flat-terrain fitness for one run configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.terrain = make_terrain("flat")

    def __call__(self, genotype) -> float:
        controller = build_controller(self.cfg.nca, self.grid, genotype)
        out = evaluate_locomotion(controller, self.terrain, self.cfg.protocol,
                                  material=self.cfg.material, sim=self.cfg.sim)
        return out.v_x


_worker_fn = None


def _init_worker(fn):
    global _worker_fn
    _worker_fn = fn


def _call_worker(arg):
    return _worker_fn(arg)


@contextmanager
def _mapper(workers: int, fn=None):
    """Yield a ``map``-like callable; a process pool when ``workers > 1``."""
    if workers <= 1:
        yield map
        return
    ctx = multiprocessing.get_context("fork" if sys.platform.startswith("linux") else "spawn")
    if fn is None:
        with ctx.Pool(workers) as pool:
            yield pool.map
        return
    with ctx.Pool(workers, initializer=_init_worker, initargs=(fn,)) as pool:
        yield lambda _f, items: pool.map(_call_worker, list(items))


# ---------------------------------------------------------------- manifest


def _resolve_manifest(path: str) -> Path:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST
    if not p.is_file():
        raise UsageError(f"manifest not found: {p}")
    return p


def load_manifest(path: str):
    mpath = _resolve_manifest(path)
    cfg = load_config(mpath)
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(mpath, encoding="utf-8")
    if not parser.has_section("manifest"):
        raise UsageError(f"{mpath} has no [manifest] section")
    info = dict(parser["manifest"])
    gpath = mpath.parent / info.get("best_genotype", GENOTYPE)
    if not gpath.is_file():
        raise UsageError(f"genotype file not found: {gpath}")
    genotype = read_genotype(gpath)
    if genotype.shape[0] != cfg.genotype_length:
        raise GenotypeShapeError(f"{gpath} holds {genotype.shape[0]} values, "
                                 f"configuration needs {cfg.genotype_length}")
    return mpath, cfg, info, genotype


def write_manifest(path: Path, cfg: RunConfig, info: dict) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    for section, values in config_sections(cfg).items():
        parser[section] = values
    parser["manifest"] = info
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header(cfg.seed)}\n")
        parser.write(fh)


# ---------------------------------------------------------------- commands


def cmd_evolve(args) -> int:
    if not args.config:
        raise UsageError("evolve requires --config")
    cfg = load_config(args.config).with_overrides(seed=args.seed, evals=args.evals)
    out = Path(args.out or f"run-seed{cfg.seed}")
    out.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    fitness = Fitness(cfg)

    def progress(rec):
        print(f"gen={rec.generation} evals={rec.evaluations} best={rec.best!r} "
              f"median={rec.median!r}", flush=True)

    with _mapper(args.workers, fitness) as map_fn:
        best, history = run_es(fitness, cfg.es, cfg.genotype_length, map_fn=map_fn,
                               callback=progress)

    head = header(cfg.seed)
    write_genotype(out / GENOTYPE, best.genotype, head)
    _write_history(out / HISTORY, history, head)

    controller = build_controller(cfg.nca, cfg.grid, best.genotype)
    final = evaluate_locomotion(controller, make_terrain("flat"), cfg.protocol,
                                material=cfg.material, sim=cfg.sim)
    freq = final.dominant_frequency(cfg.protocol)
    _write_csv(out / OUTCOME, head,
               ["terrain_id", "v_x", "diverged", "dominant_freq_hz", "max_penetration"],
               [["flat", _num(final.v_x), int(final.diverged), _num(freq),
                 _num(final.max_penetration)]])
    _write_csv(out / SUMMARY, head,
               ["seed", "morphology", "preset", "best_fitness", "evaluations", "generations"],
               [[cfg.seed, cfg.morphology, cfg.preset, _num(best.fitness),
                 history.evaluations[-1], len(history)]])
    write_manifest(out / MANIFEST, cfg, {
        "version": __version__,
        "seed": str(cfg.seed),
        "backend": kernels.BACKEND,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "best_genotype": GENOTYPE,
        "history": HISTORY,
        "best_fitness": _num(best.fitness),
        "genotype_length": str(cfg.genotype_length),
    })
    print(f"best={best.fitness!r} out={out}")
    return EXIT_OK


def _write_history(path: Path, history: EsHistory, head: str) -> None:
    rows = [[r.generation, r.evaluations, _num(r.best), _num(r.median), r.n_flagged]
            for r in history.records]
    _write_csv(path, head, ["generation", "evaluations", "best", "median", "flagged"], rows)


def cmd_reassess(args) -> int:
    mpath, cfg, _, genotype = load_manifest(args.manifest)
    out = Path(args.out) if args.out else mpath.parent
    out.mkdir(parents=True, exist_ok=True)
    controller = build_controller(cfg.nca, cfg.grid, genotype)
    with _mapper(args.workers) as map_fn:
        result = reassess(controller, cfg.terrain_suite, cfg.protocol, cfg.material, cfg.sim,
                          map_fn=map_fn)
    head = header(cfg.seed, suite=cfg.terrain_suite)
    rows = []
    for terrain, outcome in zip(result.terrains, result.outcomes):
        rows.append([terrain.terrain_id, terrain.kind, terrain.describe(),
                     _num(0.0 if outcome.diverged else outcome.v_x), int(outcome.diverged),
                     _num(outcome.dominant_frequency(cfg.protocol))])
    _write_csv(out / REASSESS, head,
               ["terrain_id", "kind", "params", "v_x", "diverged", "dominant_freq_hz"], rows)
    _write_csv(out / REASSESS_SUMMARY, head,
               ["seed", "morphology", "preset", "suite", "adaptability", "n_terrains", "n_diverged"],
               [[cfg.seed, cfg.morphology, cfg.preset, cfg.terrain_suite,
                 _num(result.mean_v_x), len(rows), len(result.flagged)]])
    if result.flagged:
        print("diverged: " + ", ".join(result.flagged), file=sys.stderr)
    print(f"adaptability={result.mean_v_x!r}")
    return EXIT_OK


def _collect(pattern: str, metric: str) -> list[float]:
    paths = sorted(glob.glob(pattern))
    values = []
    for p in paths:
        rows = read_csv(p)
        if not rows:
            raise UsageError(f"{p}: no data rows")
        column = metric
        if metric == "auto":
            column = "adaptability" if "adaptability" in rows[0] else "best_fitness"
        if column not in rows[0]:
            raise UsageError(f"{p}: no column {column!r}")
        values.extend(float(r[column]) for r in rows)
    return values


def cmd_stats(args) -> int:
    a = _collect(args.group_a, args.metric)
    b = _collect(args.group_b, args.metric)
    if not a or not b:
        empty = args.group_a if not a else args.group_b
        raise UsageError(f"no summaries match {empty!r}")
    res = mann_whitney_u(a, b)
    print(f"n_a={res.n_a} median_a={float(np.median(a))!r}")
    print(f"n_b={res.n_b} median_b={float(np.median(b))!r}")
    print(f"U={res.u!r} method={res.method}")
    print(f"p={res.p!r}")
    return EXIT_OK


def cmd_replay(args) -> int:
    mpath, cfg, info, genotype = load_manifest(args.manifest)
    try:
        terrain = terrain_by_id(args.terrain, cfg.terrain_suite)
    except InvalidTerrain:
        raise UsageError(f"unknown terrain id {args.terrain!r}; valid ids: "
                         + ", ".join(valid_terrain_ids(cfg.terrain_suite))) from None
    out = Path(args.out) if args.out else mpath.parent / f"replay-{terrain.terrain_id}.csv"
    if out.is_dir():
        out = out / f"replay-{terrain.terrain_id}.csv"
    controller = build_controller(cfg.nca, cfg.grid, genotype)
    res = evaluate_locomotion(controller, terrain, cfg.protocol, material=cfg.material,
                              sim=cfg.sim, record=True)
    n = cfg.protocol.n_steps if not res.diverged else res.divergence_step
    times = np.arange(n + 1) / cfg.protocol.control_hz
    act = np.vstack([np.zeros((1, controller.n_vox)), res.actuation[:n]])
    comment = "\n".join([
        header(cfg.seed, terrain=terrain.terrain_id),
        f"terrain={terrain.terrain_id} kind={terrain.kind} params={terrain.describe()}",
        f"v_x={res.v_x!r} diverged={int(res.diverged)}",
        "row k is the state after k control steps; act_i is the actuation that produced it",
    ])
    write_trajectory_csv(out, comment, times, res.com[:n + 1], res.area_ratio[:n + 1], act,
                         nodes=res.nodes[:n + 1])
    print(f"v_x={res.v_x!r} out={out}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="worker processes for evaluations (default: logical cores)")
    common.add_argument("--out", help="output directory (replay: output file)")

    parser = argparse.ArgumentParser(prog="vsr-snca",
                                     description="Embodied NCA controllers for 2D voxel soft robots")
    parser.add_argument("--version", action="version", version=f"vsr-snca {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", parents=[common], help="run one evolutionary optimization")
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--evals", type=int, help="override es.n_evals")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("reassess", parents=[common], help="evaluate a champion on the terrain suite")
    p.add_argument("manifest", help="manifest.ini or run directory")
    p.set_defaults(func=cmd_reassess)

    p = sub.add_parser("stats", help="Mann-Whitney U test between two groups of summaries")
    p.add_argument("group_a", help="glob of summary CSVs")
    p.add_argument("group_b", help="glob of summary CSVs")
    p.add_argument("--metric", default="auto",
                   help="column to compare (default: adaptability if present, else best_fitness)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("replay", parents=[common], help="export a champion's trajectory")
    p.add_argument("manifest", help="manifest.ini or run directory")
    p.add_argument("--terrain", default="flat", help="terrain id (default: flat)")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) is not None and getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except GenotypeShapeError as exc:
        print(f"GenotypeShapeError: {exc}", file=sys.stderr)
    except (UsageError, InvalidSample, InvalidTerrain) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
