"""Geometry of the periodic RHG lattice used by the macronode architecture.

Coordinates live on the doubled cubic grid ``Z_{2d}^3``. Primal vertices have
all coordinates even, primal edges exactly one odd coordinate, primal faces
exactly two odd coordinates and primal cubes three. The RHG cluster has one
node (one macronode) per primal face and per primal edge, so a distance-``d``
lattice holds ``6 d^3`` macronodes. Every node has exactly four neighbours,
one per mode slot of its macronode.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

FACE = 0
EDGE = 1
MODES_PER_NODE = 4
AXES = ("x", "y", "z")


@dataclass(frozen=True)
class LatticeSpec:
    distance: int
    boundaries: str = "periodic"

    def __post_init__(self):
        if int(self.distance) != self.distance or self.distance < 2:
            raise ValueError(f"distance must be an integer >= 2, got {self.distance!r}")
        if self.boundaries != "periodic":
            raise ValueError("only periodic boundaries are supported")

    @property
    def n_nodes(self) -> int:
        return 6 * self.distance**3

    @property
    def n_modes(self) -> int:
        return MODES_PER_NODE * self.n_nodes


class NodeCoord(NamedTuple):
    x: int
    y: int
    z: int
    role: int  # FACE or EDGE


class StabilizerCube(NamedTuple):
    qubit_ids: tuple
    cube_coord: tuple


class CorrelationSurface(NamedTuple):
    axis: str
    qubit_ids: tuple


@dataclass(frozen=True, eq=False)
class RHGGraph:
    """Macronode adjacency of the periodic RHG lattice.

    Attributes
    ----------
    spec : LatticeSpec
    coords : ndarray, shape (N, 3)
        Doubled integer coordinates, nodes sorted lexicographically.
    roles : ndarray, shape (N,)
        ``FACE`` (primal qubit) or ``EDGE`` (dual qubit).
    neighbors : ndarray, shape (N, 4)
        ``neighbors[k, s]`` is the node wired to mode slot ``s`` of node ``k``.
    reciprocal : ndarray, shape (N, 4)
        Slot of node ``k`` inside ``neighbors[k, s]``.
    """

    spec: LatticeSpec
    coords: np.ndarray
    roles: np.ndarray
    neighbors: np.ndarray
    reciprocal: np.ndarray

    @property
    def distance(self) -> int:
        return self.spec.distance

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_modes(self) -> int:
        return MODES_PER_NODE * self.n_nodes

    @property
    def macronode_offsets(self) -> np.ndarray:
        return MODES_PER_NODE * np.arange(self.n_nodes)

    @cached_property
    def faces(self) -> np.ndarray:
        return np.flatnonzero(self.roles == FACE)

    @cached_property
    def edges(self) -> np.ndarray:
        return np.flatnonzero(self.roles == EDGE)

    @cached_property
    def face_index(self) -> np.ndarray:
        """Map node id -> position in ``faces`` (-1 for edge nodes)."""
        idx = np.full(self.n_nodes, -1, dtype=np.int64)
        idx[self.faces] = np.arange(len(self.faces))
        return idx

    @cached_property
    def _lookup(self) -> dict:
        return {tuple(c): k for k, c in enumerate(self.coords.tolist())}

    def node_at(self, coord) -> int:
        """Node id of a (wrapped) doubled coordinate."""
        L = 2 * self.distance
        key = tuple(int(c) % L for c in coord)
        try:
            return self._lookup[key]
        except KeyError:
            raise KeyError(f"no node at {key}") from None

    def node_coord(self, k: int) -> NodeCoord:
        x, y, z = (int(c) for c in self.coords[k])
        return NodeCoord(x, y, z, int(self.roles[k]))

    def write_edge_list(self, path) -> None:
        """Plain-text debug dump: one ``node slot neighbor reciprocal_slot`` per line."""
        with open(path, "w") as fh:
            fh.write(f"# distance={self.distance} nodes={self.n_nodes}\n")
            for k in range(self.n_nodes):
                for s in range(MODES_PER_NODE):
                    fh.write(f"{k} {s} {self.neighbors[k, s]} {self.reciprocal[k, s]}\n")


def _node_coords(d: int) -> tuple[np.ndarray, np.ndarray]:
    L = 2 * d
    grid = np.stack(np.meshgrid(np.arange(L), np.arange(L), np.arange(L), indexing="ij"), -1)
    grid = grid.reshape(-1, 3)  # already lexicographic
    n_odd = (grid % 2).sum(axis=1)
    keep = (n_odd == 1) | (n_odd == 2)
    coords = grid[keep]
    roles = np.where(n_odd[keep] == 2, FACE, EDGE).astype(np.int8)
    return coords, roles


def build_lattice(spec: LatticeSpec | int) -> RHGGraph:
    """Build the distance-``d`` periodic RHG macronode lattice.

    A face steps along its two odd axes, an edge along its two even axes; the
    four neighbours are assigned to slots 0..3 in lexicographic order of their
    wrapped coordinates.
    """
    if not isinstance(spec, LatticeSpec):
        spec = LatticeSpec(int(spec))
    d = spec.distance
    L = 2 * d
    coords, roles = _node_coords(d)
    lookup = {tuple(c): k for k, c in enumerate(coords.tolist())}

    n = len(coords)
    neighbors = np.empty((n, MODES_PER_NODE), dtype=np.int64)
    for k, (c, role) in enumerate(zip(coords.tolist(), roles.tolist())):
        step_axes = [a for a in range(3) if (c[a] % 2 == 1) == (role == FACE)]
        nbrs = []
        for a in step_axes:
            for delta in (-1, 1):
                nc = list(c)
                nc[a] = (nc[a] + delta) % L
                nbrs.append(tuple(nc))
        nbrs.sort()
        neighbors[k] = [lookup[t] for t in nbrs]

    reciprocal = np.empty_like(neighbors)
    for k in range(n):
        for s in range(MODES_PER_NODE):
            back = np.flatnonzero(neighbors[neighbors[k, s]] == k)
            if len(back) != 1:
                raise AssertionError("slot assignment is not a bijection")
            reciprocal[k, s] = back[0]

    for arr in (coords, roles, neighbors, reciprocal):
        arr.setflags(write=False)
    return RHGGraph(spec, coords, roles, neighbors, reciprocal)


def neighbor_slot(graph: RHGGraph, node_a: int, node_b: int) -> tuple[int, int]:
    """Return ``(i, j)``: slot of ``a`` wired to ``b`` and slot of ``b`` wired to ``a``."""
    hit = np.flatnonzero(graph.neighbors[node_a] == node_b)
    if len(hit) == 0:
        raise ValueError(f"nodes {node_a} and {node_b} are not adjacent")
    i = int(hit[0])
    return i, int(graph.reciprocal[node_a, i])


def mode_index(graph: RHGGraph, node: int, slot: int) -> int:
    """Global (0-based) mode index; slot 0 of node ``k`` sits at ``4k``."""
    if not 0 <= node < graph.n_nodes:
        raise IndexError(f"node {node} out of range")
    if not 0 <= slot < MODES_PER_NODE:
        raise IndexError(f"slot {slot} out of range")
    return MODES_PER_NODE * node + slot


def stabilizer_cubes(graph: RHGGraph) -> list[StabilizerCube]:
    """Primal unit cubes, each listing the node ids of its six faces."""
    d = graph.distance
    cubes = []
    for cx in range(1, 2 * d, 2):
        for cy in range(1, 2 * d, 2):
            for cz in range(1, 2 * d, 2):
                ids = []
                for a in range(3):
                    for delta in (-1, 1):
                        c = [cx, cy, cz]
                        c[a] += delta
                        ids.append(graph.node_at(c))
                cubes.append(StabilizerCube(tuple(ids), (cx, cy, cz)))
    return cubes


def correlation_surfaces(graph: RHGGraph) -> list[CorrelationSurface]:
    """One plane of primal faces per axis: faces normal to the axis at coordinate 0.

    A homologically nontrivial error chain along that axis crosses the plane
    an odd number of times, while the four faces around any primal edge meet
    it an even number of times.
    """
    faces = graph.faces
    c = graph.coords[faces]
    out = []
    for a, name in enumerate(AXES):
        others = [b for b in range(3) if b != a]
        mask = (c[:, a] == 0) & (c[:, others[0]] % 2 == 1) & (c[:, others[1]] % 2 == 1)
        out.append(CorrelationSurface(name, tuple(int(k) for k in faces[mask])))
    return out


def edge_loops(graph: RHGGraph) -> np.ndarray:
    """The four faces around every primal edge, shape (n_edges, 4).

    These are the trivial error cycles: flipping all four leaves every cube
    parity and every surface parity unchanged.
    """
    return np.asarray(graph.neighbors[graph.edges])
