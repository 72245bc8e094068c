"""Mass-spring-damper model of a 2D voxel body.

Each voxel is four corner point-masses (shared with adjacent voxels), four
edge springs and two diagonal springs, all with viscous dampers; actuation
scales the rest length of all six. Edge and diagonal lengths are hard-clamped
to a fractional band around their rest length after every substep, and nodes
are projected out of the terrain with an inelastic normal impulse plus
Coulomb friction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import SimulationDiverged
from .morphology import MorphologyGrid, voxel_order
from .terrain import LAUNCH_PAD, Terrain

# Corner order inside a voxel: bottom-left, bottom-right, top-right, top-left
# (counter-clockwise, so the shoelace area of an undeformed voxel is positive).
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))


@dataclass(frozen=True)
class VoxelMaterial:
    side_rest_length: float = 1.0
    mass_per_corner: float = 1.0
    spring_stiffness_edge: float = 1000.0
    spring_stiffness_diagonal: float = 500.0
    damping_coefficient: float = 10.0
    actuation_ratio: float = 0.2
    deformation_limit: float = 0.3

    def __post_init__(self):
        for name in ("side_rest_length", "mass_per_corner", "spring_stiffness_edge",
                     "spring_stiffness_diagonal", "actuation_ratio", "deformation_limit"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"material.{name} must be positive, got {value}")
        if self.damping_coefficient < 0:
            raise ValueError("material.damping_coefficient must be non-negative")
        if self.actuation_ratio > 0.5:
            raise ValueError("material.actuation_ratio must be <= 0.5")
        if self.deformation_limit >= 1:
            raise ValueError("material.deformation_limit must be < 1")


@dataclass(frozen=True)
class SimParams:
    gravity: float = 9.81
    friction_static: float = 0.8
    friction_dynamic: float = 0.7
    control_hz: float = 60.0
    substeps: int = 16
    constraint_iters: int = 8
    clearance: float = 0.01
    velocity_scale: float = 5.0
    contact: bool = True

    @property
    def dt(self) -> float:
        return 1.0 / (self.control_hz * self.substeps)


@dataclass(frozen=True)
class KernelConsts:
    """Flat scalar bundle read by the kernels."""

    gravity: float
    mu_s: float
    mu_d: float
    rho: float
    area_lo: float
    area_hi: float
    rest_area: float
    v_scale: float
    dt: float
    n_sub: int
    constraint_iters: int
    contact: bool


def kernel_consts(material: VoxelMaterial, sim: SimParams) -> KernelConsts:
    lim = material.deformation_limit
    return KernelConsts(
        gravity=sim.gravity,
        mu_s=sim.friction_static,
        mu_d=sim.friction_dynamic,
        rho=material.actuation_ratio,
        area_lo=(1.0 - lim) ** 2,
        area_hi=(1.0 + lim) ** 2,
        rest_area=material.side_rest_length ** 2,
        v_scale=sim.velocity_scale * material.side_rest_length,
        dt=sim.dt,
        n_sub=sim.substeps,
        constraint_iters=sim.constraint_iters,
        contact=sim.contact,
    )


@dataclass(eq=False)
class BodyTopology:
    grid: MorphologyGrid
    lattice: list  # lattice (gx, gy) of every node
    mass: np.ndarray
    inv_mass: np.ndarray
    voxel_nodes: np.ndarray
    spring_i: np.ndarray
    spring_j: np.ndarray
    spring_rest0: np.ndarray
    spring_k: np.ndarray
    spring_c: np.ndarray
    spring_voxel: np.ndarray  # owning (actuating) voxel
    spring_diagonal: np.ndarray
    limit_i: np.ndarray
    limit_j: np.ndarray
    limit_lo: np.ndarray
    limit_hi: np.ndarray
    n_edge_limits: int
    force: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.mass.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.voxel_nodes.shape[0]

    @property
    def n_edge_springs(self) -> int:
        return int(np.count_nonzero(~self.spring_diagonal))

    @property
    def n_diagonal_springs(self) -> int:
        return int(np.count_nonzero(self.spring_diagonal))


@dataclass(eq=False)
class BodyState:
    pos: np.ndarray
    vel: np.ndarray
    rest: np.ndarray
    contact: np.ndarray
    topology: BodyTopology
    time: float = 0.0

    def copy(self) -> "BodyState":
        return replace(self, pos=self.pos.copy(), vel=self.vel.copy(),
                       rest=self.rest.copy(), contact=self.contact.copy())

    def translated(self, dx: float, dy: float = 0.0) -> "BodyState":
        out = self.copy()
        out.pos[:, 0] += dx
        out.pos[:, 1] += dy
        return out

    @property
    def rest_scale(self) -> np.ndarray:
        return self.rest / self.topology.spring_rest0


def _frozen(arr, dtype):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


def build_topology(grid: MorphologyGrid, material: VoxelMaterial) -> BodyTopology:
    side = material.side_rest_length
    lim = material.deformation_limit
    node_of: dict[tuple[int, int], int] = {}
    lattice = []
    share = []
    voxel_nodes = []
    for cell in voxel_order(grid):
        gy0 = grid.height - 1 - cell.row
        quad = []
        for dx, dy in _CORNERS:
            key = (cell.col + dx, gy0 + dy)
            if key not in node_of:
                node_of[key] = len(lattice)
                lattice.append(key)
                share.append(0)
            share[node_of[key]] += 1
            quad.append(node_of[key])
        voxel_nodes.append(quad)

    si, sj, rest0, sk, sv, diag = [], [], [], [], [], []
    for v, (a, b, c, d) in enumerate(voxel_nodes):
        for i, j in ((a, b), (b, c), (c, d), (d, a)):
            si.append(i)
            sj.append(j)
            rest0.append(side)
            sk.append(material.spring_stiffness_edge)
            sv.append(v)
            diag.append(False)
        for i, j in ((a, c), (b, d)):
            si.append(i)
            sj.append(j)
            rest0.append(side * math.sqrt(2.0))
            sk.append(material.spring_stiffness_diagonal)
            sv.append(v)
            diag.append(True)

    # Unique length constraints: shared edges are clamped once.
    edges: dict[tuple[int, int], float] = {}
    diagonals: dict[tuple[int, int], float] = {}
    for i, j, r, is_diag in zip(si, sj, rest0, diag):
        key = (min(i, j), max(i, j))
        (diagonals if is_diag else edges).setdefault(key, r)
    pairs = list(edges.items()) + list(diagonals.items())
    mass = np.array(share, dtype=np.float64) * material.mass_per_corner
    return BodyTopology(
        grid=grid,
        lattice=lattice,
        mass=_frozen(mass, np.float64),
        inv_mass=_frozen(1.0 / mass, np.float64),
        voxel_nodes=_frozen(voxel_nodes, np.intp),
        spring_i=_frozen(si, np.intp),
        spring_j=_frozen(sj, np.intp),
        spring_rest0=_frozen(rest0, np.float64),
        spring_k=_frozen(sk, np.float64),
        spring_c=_frozen(np.full(len(si), material.damping_coefficient), np.float64),
        spring_voxel=_frozen(sv, np.intp),
        spring_diagonal=_frozen(diag, bool),
        limit_i=_frozen([p[0][0] for p in pairs], np.intp),
        limit_j=_frozen([p[0][1] for p in pairs], np.intp),
        limit_lo=_frozen([p[1] * (1.0 - lim) for p in pairs], np.float64),
        limit_hi=_frozen([p[1] * (1.0 + lim) for p in pairs], np.float64),
        n_edge_limits=len(edges),
        force=np.zeros((len(lattice), 2)),
    )


def build_body(grid: MorphologyGrid, material: VoxelMaterial | None = None,
               terrain: Terrain | None = None, x_offset: float | None = None,
               clearance: float = 0.01) -> BodyState:
    """Instantiate a resting body ``clearance`` side lengths above the terrain.

    By default the body starts at x = 0, shifted left when wider than the
    flat launch pad so that it never straddles terrain features.
    """
    material = material or VoxelMaterial()
    topo = build_topology(grid, material)
    side = material.side_rest_length
    if x_offset is None:
        x_offset = min(0.0, LAUNCH_PAD - grid.width * side)
    pos = np.array([[gx * side + x_offset, gy * side] for gx, gy in topo.lattice],
                   dtype=np.float64)
    ground = terrain.height(pos[:, 0]) if terrain is not None else np.zeros(len(pos))
    pos[:, 1] += np.max(ground - pos[:, 1]) + clearance * side
    return BodyState(
        pos=pos,
        vel=np.zeros_like(pos),
        rest=np.array(topo.spring_rest0),
        contact=np.zeros(topo.n_nodes, dtype=np.uint8),
        topology=topo,
    )


def physics_step(state: BodyState, controls, material: VoxelMaterial,
                 terrain: Terrain, dt: float | None = None, sim: SimParams | None = None,
                 n_sub: int = 1, backend=None) -> BodyState:
    """Advance ``n_sub`` semi-implicit Euler steps of length ``dt``; returns a new state.

    Every spring of voxel ``i`` gets rest length ``rest0 * (1 - rho * a_i)``
    before integrating (edges and diagonals alike, so the voxel scales
    uniformly). Raises ``SimulationDiverged`` on non-finite state.
    """
    sim = sim or SimParams()
    dt = sim.dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    controls = np.ascontiguousarray(controls, dtype=np.float64)
    if controls.shape != (state.topology.n_voxels,):
        raise ValueError(f"expected {state.topology.n_voxels} controls, got {controls.shape}")
    k = kernels.get(backend)
    out = state.copy()
    bad = k.step_physics(out, out.topology, terrain, kernel_consts(material, sim),
                         controls, dt, n_sub)
    out.time = state.time + dt * n_sub
    if bad >= 0:
        raise SimulationDiverged(out.time, int(bad))
    return out


def center_of_mass(state: BodyState) -> np.ndarray:
    m = state.topology.mass
    return (m[:, None] * state.pos).sum(axis=0) / m.sum()


def shoelace_area(corners) -> float:
    pts = np.asarray(corners, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return abs(0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def voxel_area(state: BodyState, voxel) -> float:
    """Current area of one voxel, addressed by ``CellIndex`` or by voxel_order index."""
    topo = state.topology
    if isinstance(voxel, (int, np.integer)):
        idx = int(voxel)
    else:
        idx = voxel_order(topo.grid).index(tuple(voxel))
    return shoelace_area(state.pos[topo.voxel_nodes[idx]])


def edge_lengths(state: BodyState) -> np.ndarray:
    """Lengths of the unique (deduplicated) voxel edges."""
    topo = state.topology
    n = topo.n_edge_limits
    d = state.pos[topo.limit_j[:n]] - state.pos[topo.limit_i[:n]]
    return np.hypot(d[:, 0], d[:, 1])


def voxel_edge_lengths(state: BodyState) -> np.ndarray:
    """``(n_voxels, 4)`` lengths of each voxel's own four edges."""
    vn = state.topology.voxel_nodes
    p = state.pos[vn]
    d = np.roll(p, -1, axis=1) - p
    return np.hypot(d[..., 0], d[..., 1])


def mechanical_energy(state: BodyState, gravity: float = 0.0, velocity=None) -> float:
    """Kinetic + spring potential (+ gravitational, when ``gravity`` is given).

    The integrator stores velocities half a substep out of phase with
    positions, so the raw sum oscillates by O(omega * dt). Passing
    ``velocity = (v_n + v_{n+1}) / 2`` (see ``synchronized_energy``) measures
    the energy at the position's own time level.
    """
    topo = state.topology
    vel = state.vel if velocity is None else np.asarray(velocity)
    kinetic = 0.5 * float(np.sum(topo.mass * np.sum(vel ** 2, axis=1)))
    d = state.pos[topo.spring_j] - state.pos[topo.spring_i]
    stretch = np.hypot(d[:, 0], d[:, 1]) - state.rest
    potential = 0.5 * float(np.sum(topo.spring_k * stretch ** 2))
    return kinetic + potential + gravity * float(np.sum(topo.mass * state.pos[:, 1]))


def synchronized_energy(state: BodyState, following: BodyState, gravity: float = 0.0) -> float:
    """Energy of ``state`` using the velocity averaged with the next substep's."""
    return mechanical_energy(state, gravity, 0.5 * (state.vel + following.vel))


def write_trajectory_csv(path, header_comment: str, times, com, area_ratio, actuation,
                         nodes=None) -> None:
    """Trajectory export: ``t, com_x, com_y, area_<i>..., act_<i>...[, x_<n>, y_<n>...]``."""
    n_vox = area_ratio.shape[1]
    cols = ["t", "com_x", "com_y"]
    cols += [f"area_{i}" for i in range(n_vox)] + [f"act_{i}" for i in range(n_vox)]
    if nodes is not None:
        for n in range(nodes.shape[1]):
            cols += [f"x_{n}", f"y_{n}"]
    with open(path, "w", newline="") as fh:
        for line in header_comment.splitlines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for k in range(len(times)):
            row = [times[k], com[k, 0], com[k, 1], *area_ratio[k], *actuation[k]]
            if nodes is not None:
                row += nodes[k].ravel().tolist()
            w.writerow([repr(float(v)) for v in row])
