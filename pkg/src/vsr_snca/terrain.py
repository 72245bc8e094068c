"""Piecewise-linear height-field terrains.

Every terrain is flat (y = 0) up to ``LAUNCH_PAD`` side lengths so that all
runs start from the same resting pose; features begin at the pad's end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTerrain

LAUNCH_PAD = 5.0
FEATURE_END = 1000.0
EXTENT = 1.0e4
RISER_WIDTH = 0.1

KINDS = ("flat", "hilly", "steppy", "slope")


@dataclass(frozen=True, eq=False)
class Terrain:
    kind: str
    params: dict = field(default_factory=dict)
    knots_x: np.ndarray = field(default=None, repr=False)
    knots_y: np.ndarray = field(default=None, repr=False)
    terrain_id: str = "flat"

    def height(self, x):
        return np.interp(x, self.knots_x, self.knots_y)

    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.knots_x.tolist(), self.knots_y.tolist()))

    def describe(self) -> str:
        return ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))


def _finish(kind, params, xs, ys, terrain_id):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if np.any(np.diff(xs) <= 0):
        raise InvalidTerrain("terrain knots must be strictly increasing in x")
    xs.setflags(write=False)
    ys.setflags(write=False)
    return Terrain(kind=kind, params=dict(params), knots_x=xs, knots_y=ys,
                   terrain_id=terrain_id or kind)


def _positive(params, *names):
    out = []
    for name in names:
        if name not in params:
            raise InvalidTerrain(f"missing terrain parameter {name!r}")
        value = float(params[name])
        if not (value > 0 and math.isfinite(value)):
            raise InvalidTerrain(f"terrain parameter {name!r} must be positive, got {value}")
        out.append(value)
    return out


def make_terrain(kind: str, params: dict | None = None, seed: int = 0,
                 terrain_id: str | None = None) -> Terrain:
    """Build a terrain.

    ``hilly(h, d)``: triangular hills with peak heights drawn from
    ``U[h/2, h]`` and base widths from ``U[d/2, d]``, reproducible from ``seed``.
    ``steppy(step_h, step_w)``: ascending staircase with a steep riser.
    ``slope(angle)``: angle in degrees, positive means downhill toward +x.
    ``uphill``/``downhill`` are accepted as aliases of ``slope`` with an
    unsigned angle.
    """
    params = dict(params or {})
    if kind == "flat":
        return _finish(kind, params, [-EXTENT, EXTENT], [0.0, 0.0], terrain_id)

    if kind in ("uphill", "downhill"):
        (angle,) = _positive(params, "angle")
        signed = angle if kind == "downhill" else -angle
        return make_terrain("slope", {"angle": signed}, seed, terrain_id or f"{kind}{angle:g}")

    if kind == "slope":
        angle = float(params.get("angle", float("nan")))
        if not (-30.0 < angle < 30.0):
            raise InvalidTerrain(f"slope angle must lie in (-30, 30) degrees, got {angle}")
        grade = -math.tan(math.radians(angle))
        xs = [-EXTENT, LAUNCH_PAD, EXTENT]
        ys = [0.0, 0.0, grade * (EXTENT - LAUNCH_PAD)]
        return _finish(kind, params, xs, ys, terrain_id)

    if kind == "hilly":
        h, d = _positive(params, "h", "d")
        rng = np.random.default_rng(seed)
        xs, ys = [-EXTENT, LAUNCH_PAD], [0.0, 0.0]
        x = LAUNCH_PAD
        while x < FEATURE_END:
            width = rng.uniform(0.5 * d, d)
            peak = rng.uniform(0.5 * h, h)
            xs += [x + 0.5 * width, x + width]
            ys += [peak, 0.0]
            x += width
        xs.append(EXTENT)
        ys.append(0.0)
        return _finish(kind, {"h": h, "d": d, "seed": seed}, xs, ys, terrain_id)

    if kind == "steppy":
        step_h, step_w = _positive(params, "step_h", "step_w")
        if step_w <= RISER_WIDTH:
            raise InvalidTerrain(f"step_w must exceed the riser width {RISER_WIDTH}")
        xs, ys = [-EXTENT, LAUNCH_PAD], [0.0, 0.0]
        x, y = LAUNCH_PAD, 0.0
        while x < FEATURE_END:
            y += step_h
            xs += [x + RISER_WIDTH, x + step_w]
            ys += [y, y]
            x += step_w
        xs.append(EXTENT)
        ys.append(y)
        return _finish(kind, {"step_h": step_h, "step_w": step_w}, xs, ys, terrain_id)

    raise InvalidTerrain(f"unknown terrain kind {kind!r}; expected one of {KINDS}")
