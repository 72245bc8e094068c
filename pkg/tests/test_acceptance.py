"""Acceptance criteria, each checked at its stated tolerance.

Run with pytest (a summary section lists every criterion) or directly as a
script, which prints one PASS/FAIL line per criterion.
"""

import itertools
import math
import os
import statistics
import sys
import time
from fractions import Fraction

import numpy as np

from vsr_snca import cli
from vsr_snca.assessment import evaluate_locomotion, terrain_suite
from vsr_snca.config import parse_config
from vsr_snca.evolution import EsParams, run_es
from vsr_snca.morphology import BIPED, WORM, parse_morphology
from vsr_snca.nca import PRESETS, build_controller, genotype_length
from vsr_snca.neuro import (LifNetworkState, LifParameters, NetworkShape, RateCoding,
                            RateDecoderState, RateEncoderState, WeightSet, decode_spikes,
                            encode_scalar, lif_network_step)
from vsr_snca.physics import (SimParams, VoxelMaterial, build_body, physics_step,
                              synchronized_energy, voxel_edge_lengths)
from vsr_snca.stats import mann_whitney_u, vibration_metric
from vsr_snca.terrain import make_terrain

FLAT = make_terrain("flat")


def timed(limit):
    def wrap(fn):
        def run(*args, **kwargs):
            start = time.perf_counter()
            fn(*args, **kwargs)
            elapsed = time.perf_counter() - start
            assert elapsed < limit, f"took {elapsed:.1f} s, limit {limit} s"
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


# ---------------------------------------------------------------- 1


def scalar_lif(w, steps, homeostasis, p):
    v, theta, psi, last = p.v_rest, p.theta0, p.psi0, False
    out = []
    for _ in range(steps):
        v = v + w - p.dt_h * p.lam_v * v
        if homeostasis:
            psi = psi + p.psi_inc if last else psi - psi * p.lam_psi * p.dt_h
            theta = min(theta, w) + psi
        last = v > theta
        if last:
            v = p.v_rest
        out.append((v, theta, psi, last))
    return out


@timed(1.0)
def test_criterion_1():
    """LIF traces under constant input equal a scalar hand derivation exactly."""
    p = LifParameters()
    w = 0.45
    # spike steps worked out by hand from the update rule (1-based)
    expected_spikes = {False: [3, 6, 9], True: [2, 4, 6, 9]}
    for homeostasis in (False, True):
        trace = scalar_lif(w, 10, homeostasis, p)
        assert [i + 1 for i, r in enumerate(trace) if r[3]] == expected_spikes[homeostasis]
        shape = NetworkShape(1, 1, "lif_h" if homeostasis else "lif", n_hidden=1)
        state = LifNetworkState.initial(shape, p)
        weights = WeightSet(np.array([[w]]), np.array([[0.0]]))
        for v, theta, psi, spike in trace:
            state, _ = lif_network_step(state, weights, [True], p, homeostasis)
            h = state.hidden
            assert (h.v[0], h.theta[0], h.psi[0], bool(h.spiked[0])) == (v, theta, psi, spike)


# ---------------------------------------------------------------- 2


@timed(1.0)
def test_criterion_2():
    """Encoder one-second counts and decoder outputs."""
    coding = RateCoding()
    for r in (0.0, 0.25, 0.5, 0.75, 1.0):
        f = r * (coding.f_max - coding.f_min) + coding.f_min
        target = 960 // int(960 // f)
        enc, count = RateEncoderState(), 0
        for k in range(60):
            bits, enc, _ = encode_scalar(r, enc, k, coding)
            count += int(bits.sum())
        assert abs(count - target) <= 1, (r, count, target)
    want = [-1.0, -0.52, -0.04, 0.44, 0.92, 1.0]
    for c, a in zip(range(6), want):
        dec = RateDecoderState(5)
        for _ in range(4):
            dec = dec.push(0)
        dec = dec.push(c)
        assert abs(decode_spikes(dec, coding) - a) <= 1e-9


# ---------------------------------------------------------------- 3


def firing_per_second(homeostasis, seconds=5, w=0.5):
    p = LifParameters()
    shape = NetworkShape(1, 1, "lif_h" if homeostasis else "lif", n_hidden=1)
    state = LifNetworkState.initial(shape, p)
    weights = WeightSet(np.array([[w]]), np.array([[0.0]]))
    counts = []
    for _ in range(seconds):
        n = 0
        for _ in range(960):
            state, _ = lif_network_step(state, weights, [True], p, homeostasis)
            n += bool(state.hidden.spiked[0])
        counts.append(n)
    return counts


@timed(5.0)
def test_criterion_3():
    """Homeostasis lowers a constant-drive firing rate; without it the rate holds."""
    on = firing_per_second(True)
    off = firing_per_second(False)
    assert on[4] <= 0.8 * on[0], on
    assert abs(off[4] - off[0]) <= 0.01 * off[0], off


# ---------------------------------------------------------------- 4


def run_body(state, controls, seconds, mat, terrain, sim):
    steps = int(round(seconds * sim.control_hz))
    for _ in range(steps):
        state = physics_step(state, controls, mat, terrain, sim=sim, n_sub=sim.substeps)
    return state


@timed(30.0)
def test_criterion_4():
    """Energy drift, contracted edge length, and terrain penetration."""
    rng = np.random.default_rng(4)
    # (a) frictionless, gravity-free, unactuated, undamped
    mat = VoxelMaterial(damping_coefficient=0.0)
    sim = SimParams(gravity=0.0, contact=False)
    s = build_body(parse_morphology(BIPED), mat, None)
    s.vel[:] = rng.normal(0.0, 0.1, s.vel.shape)
    zero = np.zeros(s.topology.n_voxels)
    energies = []
    for _ in range(int(10 * sim.control_hz * sim.substeps)):
        nxt = physics_step(s, zero, mat, FLAT, sim=sim)
        energies.append(synchronized_energy(s, nxt))
        s = nxt
    e = np.array(energies)
    assert np.max(np.abs(e - e[0])) / e[0] < 0.01

    # (b) constant full contraction
    mat = VoxelMaterial()
    sim = SimParams()
    s = run_body(build_body(parse_morphology("1"), mat, FLAT), np.ones(1), 2.0, mat, FLAT, sim)
    target = (1 - mat.actuation_ratio) * mat.side_rest_length
    assert abs(voxel_edge_lengths(s).mean() - target) <= 0.02 * target

    # (c) actuated bodies over flat ground and every suite terrain
    worst = 0.0
    for shape, cfg in ((WORM, PRESETS["non-ud"]), (BIPED, PRESETS["ud"])):
        grid = parse_morphology(shape)
        c = build_controller(cfg, grid, rng.uniform(-1, 1, genotype_length(cfg, grid)))
        for terrain in (FLAT, *terrain_suite("v1")):
            out = evaluate_locomotion(c, terrain)
            worst = max(worst, out.max_penetration)
    assert worst <= 1e-3, worst


# ---------------------------------------------------------------- 5


def sphere(g):
    return -float(np.dot(g, g))


@timed(10.0)
def test_criterion_5():
    """ES on the 100-dimensional sphere: four orders of magnitude and elitism."""
    _, hist = run_es(sphere, EsParams(n_pop=36, n_evals=30000, sigma=0.35, seed=0), 100)
    assert all(b >= a for a, b in zip(hist.best, hist.best[1:]))
    first, last = hist.best[0], hist.best[-1]
    assert abs(last) <= 1e-4 * abs(first), f"initial {first:.4g}, final {last:.4g}"


# ---------------------------------------------------------------- 6


C6_CONFIG = """\
[run]
morphology = worm
preset = non-ud
"""


def test_criterion_6():
    """Scaled-down worm locomotion with a non-uniform directional MLP."""
    cfg = parse_config(C6_CONFIG)
    assert not cfg.nca.uniform and cfg.nca.directional and not cfg.nca.model.spiking
    workers = os.cpu_count() or 1
    finals, firsts = [], []
    for seed in (0, 1, 2):
        run = cfg.with_overrides(seed=seed, evals=3000)
        fitness = cli.Fitness(run)
        with cli._mapper(workers, fitness) as map_fn:
            best, hist = run_es(fitness, run.es, run.genotype_length, map_fn=map_fn)
        assert hist.evaluations[-1] == 3000
        finals.append(best.fitness)
        firsts.append(hist.best[0])
    assert statistics.median(finals) > 0.1, finals
    for final, first in zip(finals, firsts):
        assert final > 2 * first, (final, first)


# ---------------------------------------------------------------- 7


@timed(5.0)
def test_criterion_7():
    """A sensor perturbation at voxel 0 reaches voxel v exactly v steps later."""
    grid = parse_morphology(WORM)
    k0 = 4
    for preset, seed in (("ud", 0), ("non-ud", 1), ("non-ud", 2)):
        cfg = PRESETS[preset]
        rng = np.random.default_rng(seed)
        g = rng.uniform(-1, 1, genotype_length(cfg, grid))
        sensors = rng.uniform(0, 1, (k0 + 12, 5, 4))
        perturbed = sensors.copy()
        perturbed[k0, 0] = 1 - perturbed[k0, 0]

        def trace(s):
            c = build_controller(cfg, grid, g)
            return np.array([c.control_step(x, k) for k, x in enumerate(s)])

        diff = trace(sensors) != trace(perturbed)
        for v in range(5):
            first = np.flatnonzero(diff[:, v])
            assert first.size and first[0] == k0 + v, (preset, v, first[:3])


# ---------------------------------------------------------------- 8


def permutation_p(a, b):
    n, m = len(a), len(b)
    pooled = sorted(a + b)
    rank = {x: i + 1 for i, x in enumerate(pooled)}
    offset = n * (n + 1) // 2
    centre = Fraction(n * m, 2)
    dev = abs(sum(rank[x] for x in a) - offset - centre)
    hits = total = 0
    for combo in itertools.combinations(range(1, n + m + 1), n):
        total += 1
        hits += abs(sum(combo) - offset - centre) >= dev
    return hits / total


@timed(10.0)
def test_criterion_8():
    """Exact Mann-Whitney p-values against full enumeration."""
    rng = np.random.default_rng(8)
    pairs = [(n, m) for n in range(1, 61) for m in range(1, 61) if n * m <= 60]
    for n, m in pairs:
        values = [float(x) for x in rng.permutation(n + m)]
        a, b = values[:n], values[n:]
        res = mann_whitney_u(a, b)
        assert res.method == "exact"
        assert abs(res.p - permutation_p(a, b)) <= 1e-12, (n, m)
    assert mann_whitney_u([1, 2, 3], [4, 5, 6]).p == 0.1


# ---------------------------------------------------------------- 9


def test_criterion_9(tmp_path):
    """Two evolve invocations give byte-identical genotype and history files."""
    config = tmp_path / "run.ini"
    config.write_text("[run]\nmorphology = worm\npreset = ud\nseed = 5\n")
    dirs = []
    for i, workers in enumerate((2, 2, 1)):
        out = tmp_path / f"run{i}"
        args = cli.build_parser().parse_args(
            ["evolve", "--config", str(config), "--evals", "360", "--workers", str(workers),
             "--out", str(out)])
        assert cli.cmd_evolve(args) == 0
        dirs.append(out)
    for name in ("best_genotype.txt", "history.csv"):
        blobs = {(d / name).read_bytes() for d in dirs}
        assert len(blobs) == 1, name


# ---------------------------------------------------------------- 10


@timed(1.0)
def test_criterion_10():
    """Dominant actuation frequency of synthetic traces."""
    n = 1500
    t = np.arange(n) / 60.0
    bin_hz = 60.0 / n
    assert abs(vibration_metric(np.sin(2 * np.pi * 10.0 * t)) - 10.0) <= bin_hz
    alternating = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    assert vibration_metric(alternating) == 30.0


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    for n in range(1, 11):
        fn = globals()[f"test_criterion_{n}"]
        start = time.perf_counter()
        try:
            if n == 9:
                with tempfile.TemporaryDirectory() as tmp:
                    fn(Path(tmp))
            else:
                fn()
            status = "PASS"
        except AssertionError as exc:
            status, failed = f"FAIL ({exc})", failed + 1
        print(f"criterion {n:2d}: {status}  [{time.perf_counter() - start:.1f} s]", flush=True)
    sys.exit(1 if failed else 0)
