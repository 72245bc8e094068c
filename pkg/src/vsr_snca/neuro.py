"""Cell networks: tanh MLP, discrete-time LIF spiking network with optional
homeostatic threshold, and the rate-coding converters between scalars and
spike trains.

These are the readable, per-network reference routines. The embodied
controller runs the same arithmetic for all voxels at once inside
``kernels``; the two are cross-checked in the test suite.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ModelKind(str, Enum):
    MLP = "mlp"
    LIF = "lif"
    LIF_H = "lif_h"

    @property
    def spiking(self) -> bool:
        return self is not ModelKind.MLP

    @property
    def homeostasis(self) -> bool:
        return self is ModelKind.LIF_H


@dataclass(frozen=True)
class NetworkShape:
    n_in: int
    n_out: int
    kind: ModelKind = ModelKind.MLP
    n_hidden: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.n_hidden is None:
            object.__setattr__(self, "n_hidden", self.n_in)
        if min(self.n_in, self.n_hidden, self.n_out) < 1:
            raise ValueError(f"layer sizes must be positive: {self}")


@dataclass(frozen=True)
class LifParameters:
    v_rest: float = 0.0
    lam_v: float = 0.01
    theta0: float = 1.0
    psi0: float = 0.0
    psi_inc: float = 0.2
    lam_psi: float = 0.01
    dt_h: float = 1.0 / 960.0

    def __post_init__(self):
        if self.lam_v < 0 or self.lam_psi < 0:
            raise ValueError("decay rates must be non-negative")
        if not self.theta0 > self.v_rest:
            raise ValueError("initial threshold must exceed the resting potential")
        if self.psi_inc < 0:
            raise ValueError("psi_inc must be non-negative")


@dataclass(frozen=True)
class RateCoding:
    """Clock and frequency constants shared by encoder and decoder."""

    f_min: float = 5.0
    f_max: float = 50.0
    f_k: float = 60.0
    steps_per_control: int = 16
    n_w: int = 5

    @property
    def f_h(self) -> float:
        return self.steps_per_control * self.f_k

    def period(self, r: float) -> int:
        f = r * (self.f_max - self.f_min) + self.f_min
        return int(math.floor(self.f_h / f))


@dataclass
class WeightSet:
    w1: np.ndarray  # (n_hidden, n_in)
    w2: np.ndarray  # (n_out, n_hidden)
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None


def param_count(shape: NetworkShape) -> int:
    n_in, n_h, n_out = shape.n_in, shape.n_hidden, shape.n_out
    if shape.kind is ModelKind.MLP:
        return (n_in + 1) * n_h + (n_h + 1) * n_out
    return n_in * n_h + n_h * n_out


def unpack_weights(flat, shape: NetworkShape) -> WeightSet:
    """Slice one parameter block into layer matrices.

    MLP blocks store each layer as a row-major ``(n_post, n_pre + 1)`` matrix
    whose last column is the bias; SNN blocks store ``(n_post, n_pre)``.
    """
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (param_count(shape),):
        raise ValueError(f"expected {param_count(shape)} parameters, got {flat.shape}")
    n_in, n_h, n_out = shape.n_in, shape.n_hidden, shape.n_out
    if shape.kind is ModelKind.MLP:
        cut = (n_in + 1) * n_h
        l1 = flat[:cut].reshape(n_h, n_in + 1)
        l2 = flat[cut:].reshape(n_out, n_h + 1)
        return WeightSet(w1=l1[:, :-1].copy(), w2=l2[:, :-1].copy(),
                         b1=l1[:, -1].copy(), b2=l2[:, -1].copy())
    cut = n_in * n_h
    return WeightSet(w1=flat[:cut].reshape(n_h, n_in).copy(),
                     w2=flat[cut:].reshape(n_out, n_h).copy())


def mlp_forward(weights: WeightSet, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    hidden = np.tanh(weights.w1 @ x + weights.b1)
    return np.tanh(weights.w2 @ hidden + weights.b2)


# ---------------------------------------------------------------- LIF


@dataclass
class LifLayerState:
    v: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    spiked: np.ndarray

    @classmethod
    def initial(cls, n: int, params: LifParameters = LifParameters()) -> "LifLayerState":
        return cls(v=np.full(n, params.v_rest), theta=np.full(n, params.theta0),
                   psi=np.full(n, params.psi0), spiked=np.zeros(n, dtype=bool))

    def copy(self) -> "LifLayerState":
        return LifLayerState(self.v.copy(), self.theta.copy(), self.psi.copy(),
                             self.spiked.copy())


def incoming_weight_sum(w: np.ndarray) -> np.ndarray:
    """Row sums of ``w`` accumulated left to right (sequential, not pairwise)."""
    return np.cumsum(w, axis=-1)[..., -1]


def lif_layer_step(state: LifLayerState, w: np.ndarray, spikes_in, params: LifParameters,
                   homeostasis: bool, wsum: np.ndarray | None = None):
    """One SNN step for a layer; returns ``(new_state, output_spikes)``.

    Membrane: ``v <- v + sum_i w_ij s_i - dt * lam_v * v``. With homeostasis the
    offset ``psi`` grows by ``psi_inc`` after a spike at the previous step and
    decays otherwise, and the threshold becomes ``min(theta, sum_i w_ij) + psi``.
    A spike is emitted when ``v > theta``, resetting ``v`` to ``v_rest``.
    """
    s = np.asarray(spikes_in, dtype=bool)
    p = params
    syn = np.cumsum(w * s, axis=1)[:, -1] if w.shape[1] else np.zeros(w.shape[0])
    v = state.v + syn - p.dt_h * p.lam_v * state.v
    psi = state.psi
    theta = state.theta
    if homeostasis:
        if wsum is None:
            wsum = incoming_weight_sum(w)
        psi = np.where(state.spiked, psi + p.psi_inc, psi - psi * p.lam_psi * p.dt_h)
        theta = np.minimum(theta, wsum) + psi
    fired = v > theta
    v = np.where(fired, p.v_rest, v)
    return LifLayerState(v=v, theta=theta.copy(), psi=psi.copy(), spiked=fired), fired


@dataclass
class LifNetworkState:
    hidden: LifLayerState
    output: LifLayerState

    @classmethod
    def initial(cls, shape: NetworkShape, params: LifParameters = LifParameters()):
        return cls(LifLayerState.initial(shape.n_hidden, params),
                   LifLayerState.initial(shape.n_out, params))


def lif_network_step(state: LifNetworkState, weights: WeightSet, input_spikes,
                     params: LifParameters = LifParameters(), homeostasis: bool = True):
    """Feed-forward step: hidden spikes at step h drive the output layer at h."""
    hidden, s_hid = lif_layer_step(state.hidden, weights.w1, input_spikes, params, homeostasis)
    output, s_out = lif_layer_step(state.output, weights.w2, s_hid, params, homeostasis)
    return LifNetworkState(hidden, output), s_out


# ---------------------------------------------------------------- rate coding


@dataclass
class RateEncoderState:
    h_last: int = 0


def encode_scalar(r: float, enc: RateEncoderState, k: int, coding: RateCoding = RateCoding()):
    """Spike train for control step ``k`` encoding ``r`` in [0, 1].

    A spike is emitted at SNN step ``h`` whenever ``h - h_last`` is a positive
    multiple of ``floor(f_h / f)`` with ``f = r (f_max - f_min) + f_min``.
    Returns ``(bits, new_state, clamped)``.
    """
    clamped = not (0.0 <= r <= 1.0)
    if clamped:
        warnings.warn(f"sensor value {r} outside [0, 1]; clamped", RuntimeWarning, stacklevel=2)
        r = min(1.0, max(0.0, r))
    period = coding.period(r)
    h_last = enc.h_last
    n = coding.steps_per_control
    bits = np.zeros(n, dtype=bool)
    for t in range(n):
        h = k * n + t
        gap = h - h_last
        if gap > 0 and gap % period == 0:
            bits[t] = True
            h_last = h
    return bits, RateEncoderState(h_last), clamped


@dataclass
class RateDecoderState:
    n_w: int = 5
    counts: deque = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = deque([0] * self.n_w, maxlen=self.n_w)

    def push(self, count: int) -> "RateDecoderState":
        out = replace(self, counts=deque(self.counts, maxlen=self.n_w))
        out.counts.append(int(count))
        return out


def decode_spikes(dec: RateDecoderState, coding: RateCoding = RateCoding()) -> float:
    """Actuation from the spike count over the last ``n_w`` control steps.

    The count is converted to a frequency over the window's duration
    ``n_w / f_k`` seconds, scaled by ``f_max`` into [-1, 1] and clamped.
    """
    total = sum(dec.counts)
    a = 2.0 * (total * coding.f_k / dec.n_w) / coding.f_max - 1.0
    return min(1.0, max(-1.0, a))
