"""Compiled and pure-Python kernels must agree bit for bit, and the batched
spiking kernel must equal a composition of the per-network primitives."""

import numpy as np
import pytest

from vsr_snca import kernels
from vsr_snca.assessment import LocomotionProtocol, evaluate_locomotion
from vsr_snca.morphology import BIPED, WORM, neighbor_table, parse_morphology
from vsr_snca.nca import NcaConfig, build_controller, genotype_length
from vsr_snca.neuro import (LifNetworkState, RateDecoderState, RateEncoderState, decode_spikes,
                            encode_scalar, lif_network_step, unpack_weights)
from vsr_snca.terrain import make_terrain

needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="extension not built")
SHORT = LocomotionProtocol(duration=1.5, transient=0.5)


@needs_compiled
@pytest.mark.parametrize("shape", [WORM, BIPED])
@pytest.mark.parametrize("cfg", [
    NcaConfig(uniform=False, directional=True, n_c=1, model="mlp"),
    NcaConfig(uniform=True, directional=False, n_c=4, model="lif_h"),
    NcaConfig(uniform=True, directional=True, n_c=2, model="lif"),
])
@pytest.mark.parametrize("terrain", [make_terrain("flat"),
                                     make_terrain("hilly", {"h": 1, "d": 4}, seed=2)])
def test_backends_bit_identical(rng, shape, cfg, terrain):
    grid = parse_morphology(shape)
    g = rng.uniform(-0.4, 1, genotype_length(cfg, grid))
    outs = {}
    for name in ("python", "cython"):
        c = build_controller(cfg, grid, g)
        outs[name] = evaluate_locomotion(c, terrain, SHORT, x_offset=2.0, record=True,
                                         backend=name)
    a, b = outs["python"], outs["cython"]
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.actuation, b.actuation)
    assert np.array_equal(a.area_ratio, b.area_ratio)
    assert a.v_x == b.v_x


def _composed_snn(cfg, grid, genotype, sensors):
    """Reference SNCA built from encode_scalar / lif_network_step / decode_spikes."""
    shape = cfg.shape
    n_vox = grid.n_voxels
    nbrs = neighbor_table(grid)
    w = unpack_weights(genotype, shape)  # uniform
    nets = [LifNetworkState.initial(shape, cfg.lif) for _ in range(n_vox)]
    encs = [[RateEncoderState() for _ in range(4)] for _ in range(n_vox)]
    decs = [RateDecoderState(cfg.coding.n_w) for _ in range(n_vox)]
    prev = np.zeros((n_vox, shape.n_out, 16), dtype=bool)
    opposite = (2, 3, 0, 1)
    acts = []
    for k, reading in enumerate(sensors):
        nxt = np.zeros_like(prev)
        a = np.zeros(n_vox)
        for v in range(n_vox):
            trains = []
            for q in range(4):
                bits, encs[v][q], _ = encode_scalar(reading[v, q], encs[v][q], k, cfg.coding)
                trains.append(bits)
            for d in range(4):
                nb = nbrs[v, d]
                base = 1 + opposite[d] * cfg.n_c if cfg.directional else 1
                for ch in range(cfg.n_c):
                    trains.append(prev[nb, base + ch] if nb >= 0 else np.zeros(16, bool))
            x = np.array(trains)  # (n_in, 16)
            for t in range(16):
                nets[v], out = lif_network_step(nets[v], w, x[:, t], cfg.lif,
                                                cfg.model.homeostasis)
                nxt[v, :, t] = out
            decs[v] = decs[v].push(int(nxt[v, 0].sum()))
            a[v] = decode_spikes(decs[v], cfg.coding)
        prev = nxt
        acts.append(a)
    return np.array(acts)


@pytest.mark.parametrize("backend_name", ["python", "cython"])
@pytest.mark.parametrize("cfg", [NcaConfig(True, False, 4, "lif_h"), NcaConfig(True, True, 1, "lif")])
def test_snn_kernel_matches_composition(rng, backend_name, cfg):
    if backend_name == "cython" and kernels.compiled is None:
        pytest.skip("extension not built")
    grid = parse_morphology("111-010")
    g = rng.uniform(-0.3, 1.0, genotype_length(cfg, grid))
    sensors = rng.uniform(0, 1, (25, grid.n_voxels, 4))
    c = build_controller(cfg, grid, g)
    got = np.array([c.control_step(s, k, backend=backend_name) for k, s in enumerate(sensors)])
    want = _composed_snn(cfg, grid, g, sensors)
    assert np.array_equal(got, want)
    assert len(np.unique(got)) > 1  # the network is not silent


def test_backend_selection():
    assert kernels.get("python") is kernels.pure
    assert kernels.BACKEND in ("python", "cython")
    with pytest.raises(ValueError):
        kernels.get("fortran")
