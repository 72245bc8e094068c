"""Embodied neural cellular automaton controller.

Every voxel hosts one cell network. At control step ``k`` a cell reads its
four sensors and the messages its neighbors wrote at ``k - 1``, then emits an
actuation and new messages. Uniform controllers share one parameter block
across cells; non-uniform ones take one block per voxel in ``voxel_order``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, GenotypeShapeError
from .morphology import MorphologyGrid, neighbor_table
from .neuro import (LifParameters, ModelKind, NetworkShape, RateCoding,
                    incoming_weight_sum, param_count, unpack_weights)


@dataclass(frozen=True)
class NcaConfig:
    uniform: bool = True
    directional: bool = True
    n_c: int = 1
    model: ModelKind = ModelKind.MLP
    lif: LifParameters = field(default_factory=LifParameters)
    coding: RateCoding = field(default_factory=RateCoding)

    def __post_init__(self):
        try:
            object.__setattr__(self, "model", ModelKind(self.model))
        except ValueError:
            raise ConfigError("nca.model", f"unknown model {self.model!r}; "
                              f"expected one of {[m.value for m in ModelKind]}") from None
        if isinstance(self.n_c, bool) or not isinstance(self.n_c, (int, np.integer)) or self.n_c < 1:
            raise ConfigError("nca.channels", f"must be a positive integer, got {self.n_c!r}")

    @property
    def n_in(self) -> int:
        return 4 + 4 * self.n_c

    @property
    def n_out(self) -> int:
        return 1 + (4 * self.n_c if self.directional else self.n_c)

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(n_in=self.n_in, n_out=self.n_out, kind=self.model)


PRESETS = {
    "ud": NcaConfig(uniform=True, directional=True, n_c=1, model=ModelKind.MLP),
    "non-ud": NcaConfig(uniform=False, directional=True, n_c=1, model=ModelKind.MLP),
    "und-snca": NcaConfig(uniform=True, directional=False, n_c=4, model=ModelKind.LIF_H),
}


def genotype_length(config: NcaConfig, grid: MorphologyGrid) -> int:
    block = param_count(config.shape)
    return block if config.uniform else block * grid.n_voxels


class Controller:
    """Per-voxel weights plus all mutable network state, laid out for the kernels."""

    def __init__(self, config: NcaConfig, grid: MorphologyGrid, genotype):
        genotype = np.asarray(genotype, dtype=np.float64).ravel()
        expected = genotype_length(config, grid)
        if genotype.shape[0] != expected:
            raise GenotypeShapeError(
                f"genotype has {genotype.shape[0]} values, controller needs {expected}")
        self.config = config
        self.grid = grid
        self.genotype = genotype.copy()
        self.genotype.setflags(write=False)

        shape = config.shape
        n_vox = grid.n_voxels
        self.kind = 0 if config.model is ModelKind.MLP else 1
        self.n_vox = n_vox
        self.n_c = config.n_c
        self.n_in, self.n_h, self.n_out = shape.n_in, shape.n_hidden, shape.n_out
        self.directional = bool(config.directional)
        self.neighbors = np.ascontiguousarray(neighbor_table(grid), dtype=np.intp)

        block = param_count(shape)
        blocks = [genotype[:block]] * n_vox if config.uniform else \
            [genotype[i * block:(i + 1) * block] for i in range(n_vox)]
        ws = [unpack_weights(b, shape) for b in blocks]
        self.w1 = np.ascontiguousarray(np.stack([w.w1 for w in ws]))
        self.w2 = np.ascontiguousarray(np.stack([w.w2 for w in ws]))
        if self.kind == 0:
            self.b1 = np.ascontiguousarray(np.stack([w.b1 for w in ws]))
            self.b2 = np.ascontiguousarray(np.stack([w.b2 for w in ws]))
            self.wsum1 = self.wsum2 = None
        else:
            self.b1 = self.b2 = None
            self.wsum1 = np.ascontiguousarray(incoming_weight_sum(self.w1))
            self.wsum2 = np.ascontiguousarray(incoming_weight_sum(self.w2))
        for arr in (self.w1, self.w2, self.b1, self.b2, self.wsum1, self.wsum2):
            if arr is not None:
                arr.setflags(write=False)

        lif, coding = config.lif, config.coding
        self.homeostasis = config.model.homeostasis
        self.steps_per_control = coding.steps_per_control
        self.f_min, self.f_max = coding.f_min, coding.f_max
        self.f_h, self.f_k = coding.f_h, coding.f_k
        self.v_rest, self.lam_v, self.dt_h = lif.v_rest, lif.lam_v, lif.dt_h
        self.psi_inc, self.lam_psi = lif.psi_inc, lif.lam_psi
        self._n_w = coding.n_w
        self.reset()

    def reset(self) -> "Controller":
        n_vox, n_h, n_out, n_c = self.n_vox, self.n_h, self.n_out, self.n_c
        self.msg_prev = np.zeros((n_vox, 4, n_c))
        self.msg_next = np.zeros((n_vox, 4, n_c))
        self.x = np.zeros(self.n_in)
        self.hidden = np.zeros(n_h)
        self.y = np.zeros(n_out)
        lif = self.config.lif
        spc = self.steps_per_control
        self.v1 = np.full((n_vox, n_h), lif.v_rest)
        self.th1 = np.full((n_vox, n_h), lif.theta0)
        self.psi1 = np.full((n_vox, n_h), lif.psi0)
        self.sl1 = np.zeros((n_vox, n_h), dtype=np.uint8)
        self.v2 = np.full((n_vox, n_out), lif.v_rest)
        self.th2 = np.full((n_vox, n_out), lif.theta0)
        self.psi2 = np.full((n_vox, n_out), lif.psi0)
        self.sl2 = np.zeros((n_vox, n_out), dtype=np.uint8)
        self.enc_last = np.zeros((n_vox, 4), dtype=np.int64)
        self.dec_counts = np.zeros((n_vox, n_out, self._n_w), dtype=np.int64)
        self.dec_pos = np.zeros(1, dtype=np.int64)
        self.trains_prev = np.zeros((n_vox, n_out, spc), dtype=np.uint8)
        self.trains_next = np.zeros((n_vox, n_out, spc), dtype=np.uint8)
        self.s_in = np.zeros(self.n_in, dtype=np.uint8)
        self.s_hid = np.zeros(n_h, dtype=np.uint8)
        self.s_out = np.zeros(n_out, dtype=np.uint8)
        return self

    def outgoing_messages(self) -> np.ndarray:
        """Messages written at the latest step, ``(n_vox, 4, n_c)``.

        For spiking cells each entry is that step's spike count of the
        message neuron addressed to the direction.
        """
        if self.kind == 0:
            return self.msg_prev.copy()
        counts = self.trains_prev.sum(axis=2)
        out = np.empty((self.n_vox, 4, self.n_c))
        for d in range(4):
            base = 1 + d * self.n_c if self.directional else 1
            out[:, d, :] = counts[:, base:base + self.n_c]
        return out

    def control_step(self, sensors, k: int, backend=None) -> np.ndarray:
        sensors = np.ascontiguousarray(sensors, dtype=np.float64)
        if sensors.shape != (self.n_vox, 4):
            raise ValueError(f"expected sensors of shape {(self.n_vox, 4)}, got {sensors.shape}")
        out = np.zeros(self.n_vox)
        kernels.get(backend).controller_step(self, sensors, int(k), out)
        return out


def build_controller(config: NcaConfig, grid: MorphologyGrid, genotype) -> Controller:
    return Controller(config, grid, genotype)


def control_step(controller: Controller, sensors, k: int) -> np.ndarray:
    return controller.control_step(sensors, k)


def reset(controller: Controller) -> Controller:
    return controller.reset()
