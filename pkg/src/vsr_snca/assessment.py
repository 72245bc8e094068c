"""Locomotion evaluation, terrain re-assessment and behavior diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidProtocol, InvalidTerrain
from .nca import Controller
from .physics import SimParams, VoxelMaterial, build_body, kernel_consts
from .stats import StatResult, mann_whitney_u, vibration_metric
from .terrain import Terrain, make_terrain

__all__ = [
    "LocomotionProtocol", "EvaluationOutcome", "ReassessmentResult", "TERRAIN_SUITES",
    "terrain_suite", "terrain_by_id", "valid_terrain_ids", "evaluate_locomotion",
    "reassess", "mann_whitney_u", "vibration_metric", "StatResult",
]


@dataclass(frozen=True)
class LocomotionProtocol:
    duration: float = 30.0
    transient: float = 5.0
    control_hz: float = 60.0

    def __post_init__(self):
        if not (self.control_hz > 0 and math.isfinite(self.control_hz)):
            raise InvalidProtocol("control_hz must be positive")
        if not (0 <= self.transient < self.duration):
            raise InvalidProtocol(
                f"transient ({self.transient} s) must be shorter than duration ({self.duration} s)")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration * self.control_hz))

    @property
    def transient_steps(self) -> int:
        return int(round(self.transient * self.control_hz))


@dataclass
class EvaluationOutcome:
    v_x: float
    diverged: bool
    terrain_id: str
    com: np.ndarray = field(repr=False)  # (n_steps + 1, 2); row k is the state after k steps
    actuation: np.ndarray = field(repr=False)  # (n_steps, n_vox)
    max_penetration: float = 0.0
    divergence_step: int = -1
    nodes: np.ndarray | None = field(default=None, repr=False)
    area_ratio: np.ndarray | None = field(default=None, repr=False)

    def dominant_frequency(self, protocol: LocomotionProtocol = LocomotionProtocol()) -> float:
        trace = self.actuation[protocol.transient_steps:].mean(axis=1)
        if self.diverged or len(trace) < 256:
            return float("nan")
        return vibration_metric(trace, protocol.control_hz)


def _penetration(nodes: np.ndarray, terrain: Terrain) -> float:
    depth = terrain.height(nodes[..., 0]) - nodes[..., 1]
    return max(0.0, float(np.max(depth)))


def evaluate_locomotion(controller: Controller, terrain: Terrain,
                        protocol: LocomotionProtocol = LocomotionProtocol(), seed: int = 0,
                        material: VoxelMaterial | None = None, sim: SimParams | None = None,
                        x_offset: float | None = None, record: bool = False,
                        backend: str | None = None) -> EvaluationOutcome:
    """Closed-loop rollout; ``v_x`` is the COM x-displacement over the
    post-transient window divided by its duration.

    The simulation is deterministic, so ``seed`` is accepted for interface
    symmetry only. The controller is reset before the run.
    """
    del seed
    material = material or VoxelMaterial()
    sim = sim or SimParams(control_hz=protocol.control_hz)
    controller.reset()
    state = build_body(controller.grid, material, terrain, x_offset=x_offset,
                       clearance=sim.clearance)
    n = protocol.n_steps
    com = np.full((n + 1, 2), np.nan)
    act = np.zeros((n, controller.n_vox))
    nodes = np.full((n + 1, state.pos.shape[0], 2), np.nan)
    area = np.full((n + 1, controller.n_vox), np.nan) if record else None
    step, _ = kernels.get(backend).run_episode(
        state, state.topology, terrain, kernel_consts(material, sim), controller,
        0, n, com, act, area, nodes)
    diverged = step >= 0
    if diverged:
        v_x = float("-inf")
        penetration = _penetration(nodes[:step + 1], terrain)
    else:
        t0 = protocol.transient_steps
        v_x = float((com[n, 0] - com[t0, 0]) / (protocol.duration - protocol.transient))
        penetration = _penetration(nodes, terrain)
    return EvaluationOutcome(v_x=v_x, diverged=diverged, terrain_id=terrain.terrain_id,
                             com=com, actuation=act, max_penetration=penetration,
                             divergence_step=int(step), nodes=nodes if record else None,
                             area_ratio=area)


# ---------------------------------------------------------------- terrain suite


def _suite_v1() -> list[Terrain]:
    out = []
    idx = 0
    for h in (0.5, 1.0, 2.0):
        for d in (5.0, 10.0):
            out.append(make_terrain("hilly", {"h": h, "d": d}, seed=idx,
                                    terrain_id=f"hilly-h{h:g}-d{d:g}"))
            idx += 1
    for sh in (0.2, 0.5, 1.0):
        for sw in (2.0, 4.0):
            out.append(make_terrain("steppy", {"step_h": sh, "step_w": sw},
                                    terrain_id=f"steppy-h{sh:g}-w{sw:g}"))
    for angle in (5, 10):
        out.append(make_terrain("downhill", {"angle": angle}))
    for angle in (5, 10):
        out.append(make_terrain("uphill", {"angle": angle}))
    return out


TERRAIN_SUITES = {"v1": _suite_v1}
_cache: dict[str, list[Terrain]] = {}


def terrain_suite(version: str = "v1") -> list[Terrain]:
    if version not in TERRAIN_SUITES:
        raise InvalidTerrain(f"unknown terrain suite {version!r}; known: {sorted(TERRAIN_SUITES)}")
    if version not in _cache:
        _cache[version] = TERRAIN_SUITES[version]()
    return list(_cache[version])


def valid_terrain_ids(version: str = "v1") -> list[str]:
    return ["flat"] + [t.terrain_id for t in terrain_suite(version)]


def terrain_by_id(terrain_id: str, version: str = "v1") -> Terrain:
    if terrain_id == "flat":
        return make_terrain("flat")
    for t in terrain_suite(version):
        if t.terrain_id == terrain_id:
            return t
    raise InvalidTerrain(f"unknown terrain id {terrain_id!r}; valid ids: "
                         + ", ".join(valid_terrain_ids(version)))


# ---------------------------------------------------------------- re-assessment


@dataclass
class ReassessmentResult:
    mean_v_x: float
    terrains: list[Terrain]
    outcomes: list[EvaluationOutcome]
    flagged: list[str]

    @property
    def values(self) -> list[float]:
        return [0.0 if o.diverged else o.v_x for o in self.outcomes]


def _reassess_job(args):
    controller, terrain, protocol, material, sim = args
    return evaluate_locomotion(controller, terrain, protocol, material=material, sim=sim)


def reassess(controller: Controller, suite: str = "v1",
             protocol: LocomotionProtocol = LocomotionProtocol(),
             material: VoxelMaterial | None = None, sim: SimParams | None = None,
             map_fn=map) -> ReassessmentResult:
    """Mean ``v_x`` over the suite. Diverged runs count as 0 and are flagged."""
    terrains = terrain_suite(suite)
    jobs = [(controller, t, protocol, material, sim) for t in terrains]
    outcomes = list(map_fn(_reassess_job, jobs))
    flagged = [o.terrain_id for o in outcomes if o.diverged]
    values = [0.0 if o.diverged else o.v_x for o in outcomes]
    return ReassessmentResult(float(np.mean(values)), terrains, outcomes, flagged)
