"""Outer (qubit-level) decoder for the reduced canonical lattice.

Bits live on primal faces and are indexed by *face position* (``0..3d^3-1``,
the order of ``graph.faces``). Stabilizers are primal cubes; the cube graph
has cubes as vertices and faces as edges, each face weighted by its node
weight, so a shortest cube-to-cube path is a likeliest error chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as _scipy_dijkstra

from ._accel import USE_NUMBA, try_jit
from ._blossom import max_weight_matching_int, neighbour_lists
from .gaussian import SQRT_PI
from .lattice import AXES, RHGGraph, correlation_surfaces, stabilizer_cubes
from .reduction import ReducedLattice

HEURISTIC_PROBS = {4: 2 / 5, 3: 1 / 3, 2: 1 / 4}
P_ERR_FLOOR = 1e-15
_MATCH_RESOLUTION = 2.0**24


class BinnedBit(NamedTuple):
    m_tilde: np.ndarray  # nearest multiple of sqrt(pi)
    r: np.ndarray  # parity bit

    @property
    def r_bar(self):
        return 1 - self.r


def gkp_bin(m) -> BinnedBit:
    """Standard GKP binning; exact half-way points go to the even multiple.

    Examples
    --------
    >>> int(gkp_bin(0.6 * SQRT_PI).r), int(gkp_bin(0.5 * SQRT_PI).r)
    (1, 0)
    """
    m = np.asarray(m, dtype=float)
    n = np.rint(m / SQRT_PI)
    r = np.mod(n, 2).astype(np.int8)
    if m.ndim == 0:
        return BinnedBit(float(n * SQRT_PI), int(r))
    return BinnedBit(n * SQRT_PI, r)


@dataclass(frozen=True, eq=False)
class DecodingGraph:
    """Static decoding structure of one lattice (shared read-only across trials).

    Attributes
    ----------
    graph : RHGGraph
    cube_faces : ndarray, shape (C, 6)
        Face positions of every stabilizer cube.
    face_cubes : ndarray, shape (F, 2)
        The two cubes sharing each face.
    surfaces : ndarray of bool, shape (3, F)
        Correlation-surface membership per axis.
    """

    graph: RHGGraph
    cube_faces: np.ndarray
    face_cubes: np.ndarray
    surfaces: np.ndarray
    adj_start: np.ndarray = field(repr=False)
    adj_cube: np.ndarray = field(repr=False)
    adj_face: np.ndarray = field(repr=False)

    @classmethod
    def from_lattice(cls, graph: RHGGraph) -> "DecodingGraph":
        fidx = graph.face_index
        cube_faces = np.array([[fidx[q] for q in c.qubit_ids] for c in stabilizer_cubes(graph)], dtype=np.int64)
        n_faces = len(graph.faces)
        owners = [[] for _ in range(n_faces)]
        for c, faces in enumerate(cube_faces):
            for f in faces:
                owners[f].append(c)
        if any(len(o) != 2 for o in owners):
            raise AssertionError("every face must border exactly two cubes")
        face_cubes = np.array(owners, dtype=np.int64)
        surfaces = np.zeros((3, n_faces), dtype=bool)
        for a, surf in enumerate(correlation_surfaces(graph)):
            surfaces[a, fidx[list(surf.qubit_ids)]] = True
        # cube adjacency in CSR form, one directed arc per (cube, face)
        src = np.concatenate([face_cubes[:, 0], face_cubes[:, 1]])
        dst = np.concatenate([face_cubes[:, 1], face_cubes[:, 0]])
        fid = np.concatenate([np.arange(n_faces), np.arange(n_faces)])
        order = np.lexsort((fid, src))
        counts = np.bincount(src, minlength=len(cube_faces))
        adj_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return cls(graph, cube_faces, face_cubes, surfaces, adj_start, dst[order], fid[order])

    @property
    def n_cubes(self) -> int:
        return len(self.cube_faces)

    @property
    def n_faces(self) -> int:
        return len(self.face_cubes)

    @cached_property
    def face_edge_neighbors(self) -> np.ndarray:
        """Node ids of the four edge nodes around every face, shape (F, 4)."""
        return np.asarray(self.graph.neighbors[self.graph.faces])


def assign_weights(reduced: ReducedLattice, dg: DecodingGraph) -> np.ndarray:
    """Per-face weights ``-log(2/5 | 1/3 | 1/4 | p_err)`` by number of p-type neighbours.

    ``p_err`` is floored at ``1e-15`` so weights stay finite.
    """
    n_p = reduced.is_p[dg.face_edge_neighbors].sum(axis=1)
    p_err = np.clip(reduced.p_err[dg.graph.faces], P_ERR_FLOOR, 1.0)
    prob = np.where(n_p >= 4, HEURISTIC_PROBS[4],
                    np.where(n_p == 3, HEURISTIC_PROBS[3], np.where(n_p == 2, HEURISTIC_PROBS[2], p_err)))
    return -np.log(prob)


def weight_for(n_p_neighbours: int, p_err: float) -> float:
    """Scalar form of the weight table."""
    if n_p_neighbours >= 2:
        return -float(np.log(HEURISTIC_PROBS[min(n_p_neighbours, 4)]))
    return -float(np.log(min(max(p_err, P_ERR_FLOOR), 1.0)))


def extract_syndrome(bits, cube_faces) -> np.ndarray:
    """Ids of cubes whose six face bits have odd parity."""
    bits = np.asarray(bits, dtype=np.int64)
    parity = bits[np.asarray(cube_faces)].sum(axis=1) & 1
    return np.flatnonzero(parity)


# --------------------------------------------------------------------------
# shortest paths
# --------------------------------------------------------------------------


@try_jit(cache=True)
def _dijkstra_kernel(sources, is_target, n_targets, adj_start, adj_cube, adj_face, face_w,
                     dist, pred_cube, pred_face):
    n = adj_start.shape[0] - 1
    cap = adj_cube.shape[0] + n + 1
    hk = np.empty(cap)
    hv = np.empty(cap, np.int64)
    done = np.zeros(n, np.bool_)
    for si in range(sources.shape[0]):
        s = sources[si]
        for c in range(n):
            dist[si, c] = np.inf
            pred_cube[si, c] = -1
            pred_face[si, c] = -1
            done[c] = False
        dist[si, s] = 0.0
        size = 1
        hk[0] = 0.0
        hv[0] = s
        found = 0
        while size > 0:
            key = hk[0]
            u = hv[0]
            size -= 1
            if size > 0:
                # sift the last element down from the root
                lk = hk[size]
                lv = hv[size]
                i = 0
                while True:
                    c1 = 2 * i + 1
                    if c1 >= size:
                        break
                    c2 = c1 + 1
                    m = c1
                    if c2 < size and (hk[c2] < hk[c1] or (hk[c2] == hk[c1] and hv[c2] < hv[c1])):
                        m = c2
                    if hk[m] < lk or (hk[m] == lk and hv[m] < lv):
                        hk[i] = hk[m]
                        hv[i] = hv[m]
                        i = m
                    else:
                        break
                hk[i] = lk
                hv[i] = lv
            if done[u] or key > dist[si, u]:
                continue
            done[u] = True
            if is_target[u]:
                found += 1
                if found == n_targets:
                    break
            for q in range(adj_start[u], adj_start[u + 1]):
                v = adj_cube[q]
                nd = key + face_w[adj_face[q]]
                if nd < dist[si, v]:
                    dist[si, v] = nd
                    pred_cube[si, v] = u
                    pred_face[si, v] = adj_face[q]
                    # push and sift up
                    i = size
                    size += 1
                    while i > 0:
                        par = (i - 1) // 2
                        if hk[par] > nd or (hk[par] == nd and hv[par] > v):
                            hk[i] = hk[par]
                            hv[i] = hv[par]
                            i = par
                        else:
                            break
                    hk[i] = nd
                    hv[i] = v
    return dist


def _dijkstra_scipy(sources, dg: DecodingGraph, face_w):
    """Fallback: scipy Dijkstra on the cube graph with parallel faces collapsed to the lightest."""
    C = dg.n_cubes
    a = dg.face_cubes.min(axis=1)
    b = dg.face_cubes.max(axis=1)
    order = np.lexsort((np.arange(len(a)), face_w, b, a))
    a, b, faces = a[order], b[order], np.arange(len(face_w))[order]
    first = np.ones(len(a), dtype=bool)
    first[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
    a, b, faces = a[first], b[first], faces[first]
    w = face_w[faces]
    mat = sp.csr_matrix((np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))), shape=(C, C))
    dist, pred = _scipy_dijkstra(mat, directed=True, indices=sources, return_predecessors=True)
    pair_face = np.full((C, C), -1, dtype=np.int64)
    pair_face[a, b] = faces
    pair_face[b, a] = faces
    pred = np.where(pred < 0, -1, pred).astype(np.int64)
    pred_face = np.where(pred >= 0, pair_face[np.maximum(pred, 0), np.arange(C)[None, :]], -1)
    return dist, pred, pred_face


@dataclass
class MatchingGraph:
    """Complete graph on the unsatisfied cubes with shortest-path arc weights.

    ``weights[i, j]`` is the shortest-path weight from ``defects[i]`` to
    ``defects[j]``; :meth:`path` returns the realising face positions.
    """

    defects: np.ndarray
    weights: np.ndarray
    pred_cube: np.ndarray
    pred_face: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.defects)

    def path(self, i: int, j: int) -> np.ndarray:
        """Faces on the stored shortest path between vertices ``i`` and ``j``."""
        faces = []
        c = int(self.defects[j])
        src = int(self.defects[i])
        while c != src:
            f = int(self.pred_face[i, c])
            if f < 0:
                raise RuntimeError("defects are disconnected in the cube graph")
            faces.append(f)
            c = int(self.pred_cube[i, c])
        return np.array(faces, dtype=np.int64)


def build_matching_graph(syndrome, weights, dg: DecodingGraph, use_numba: bool | None = None) -> MatchingGraph:
    """Run Dijkstra from every unsatisfied cube over the weighted cube graph."""
    defects = np.asarray(syndrome, dtype=np.int64)
    if len(defects) % 2:
        raise RuntimeError(f"odd syndrome size {len(defects)} on a periodic lattice")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (dg.n_faces,) or np.any(weights < 0):
        raise ValueError("need one non-negative weight per face")
    m, C = len(defects), dg.n_cubes
    if m == 0:
        empty = np.zeros((0, C), dtype=np.int64)
        return MatchingGraph(defects, np.zeros((0, 0)), empty, empty)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    if use_numba:
        is_target = np.zeros(C, dtype=np.bool_)
        is_target[defects] = True
        dist = np.empty((m, C))
        pred_cube = np.empty((m, C), dtype=np.int64)
        pred_face = np.empty((m, C), dtype=np.int64)
        _dijkstra_kernel(defects, is_target, len(np.unique(defects)), dg.adj_start, dg.adj_cube,
                         dg.adj_face, weights, dist, pred_cube, pred_face)
    else:
        dist, pred_cube, pred_face = _dijkstra_scipy(defects, dg, weights)
    return MatchingGraph(defects, dist[:, defects], pred_cube, pred_face)


# --------------------------------------------------------------------------
# matching
# --------------------------------------------------------------------------


def _quantise(w: np.ndarray) -> np.ndarray:
    top = float(w.max()) if w.size else 0.0
    scale = _MATCH_RESOLUTION / max(top, 1.0)
    return np.rint(w * scale).astype(np.int64)


def mwpm(weights, knn: int | None = None) -> list[tuple[int, int]]:
    """Minimum-weight perfect matching of a complete graph.

    Parameters
    ----------
    weights : array_like, shape (m, m)
        Symmetric arc weights (``MatchingGraph.weights`` or any matrix).
    knn : int, optional
        Keep only each vertex's ``knn`` lightest arcs. Falls back to the full
        graph when the pruned graph has no perfect matching. Off by default.

    Returns
    -------
    list of (i, j)
        Matched vertex pairs with ``i < j``, sorted.

    Notes
    -----
    Weights are scaled to integers with ``2^24`` steps over the largest
    weight so the blossom duals stay exact; the total is optimal up to that
    resolution. Maximising ``W + 1 - w`` under maximum cardinality gives the
    minimum-weight perfect matching.
    """
    if isinstance(weights, MatchingGraph):
        weights = weights.weights
    w = np.asarray(weights, dtype=float)
    m = w.shape[0]
    if w.shape != (m, m):
        raise ValueError("weights must be a square matrix")
    if m % 2:
        raise ValueError(f"perfect matching needs an even vertex count, got {m}")
    if m == 0:
        return []
    if not np.all(np.isfinite(w[~np.eye(m, dtype=bool)])):
        raise ValueError("arc weights must be finite")
    iu, ju = np.triu_indices(m, 1)
    if knn is not None and knn < m - 1:
        wm = w + np.diag(np.full(m, np.inf))
        near = np.argsort(wm, axis=1, kind="stable")[:, :knn]
        keep = np.zeros((m, m), dtype=bool)
        keep[np.repeat(np.arange(m), knn), near.ravel()] = True
        keep |= keep.T
        sel = keep[iu, ju]
        pairs = _match(m, iu[sel], ju[sel], w[iu[sel], ju[sel]])
        if pairs is not None:
            return pairs
    pairs = _match(m, iu, ju, w[iu, ju])
    if pairs is None:  # pragma: no cover - a complete graph always has one
        raise RuntimeError("no perfect matching found")
    return pairs


def _match(m, ei, ej, w):
    q = _quantise(w)
    wt = (int(q.max()) + 1) - q
    ei = ei.astype(np.int64)
    ej = ej.astype(np.int64)
    nb_start, nb_list = neighbour_lists(m, ei, ej)
    mate = max_weight_matching_int(m, ei, ej, wt.astype(np.int64), nb_start, nb_list, True)
    if np.any(mate < 0):
        return None
    return [(i, int(mate[i])) for i in range(m) if i < mate[i]]


def apply_recovery(bits, pairs, mg: MatchingGraph) -> np.ndarray:
    """Flip every face on the stored path of each matched pair."""
    out = np.array(bits, dtype=np.int8, copy=True)
    for i, j in pairs:
        path = mg.path(i, j)
        np.bitwise_xor.at(out, path, 1)
    return out


def surface_parities(bits, surfaces) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return (np.asarray(surfaces) @ bits) & 1


def check_failure(bits, dg: DecodingGraph, reference=None) -> bool:
    """True (failure) if any correlation-surface parity differs from ``reference``.

    The reference defaults to all-even, which is the parity of every noiseless
    outcome pattern (each in-plane edge node touches two in-plane faces).
    """
    if len(extract_syndrome(bits, dg.cube_faces)):
        raise ValueError("cannot judge a lattice with unsatisfied stabilizers")
    par = surface_parities(bits, dg.surfaces)
    ref = np.zeros(len(AXES), dtype=np.int64) if reference is None else np.asarray(reference)
    return bool(np.any(par != ref))


@dataclass
class DecodeResult:
    bits: np.ndarray
    syndrome: np.ndarray
    pairs: list
    corrected: np.ndarray
    failure: bool


def decode(reduced: ReducedLattice, dg: DecodingGraph, knn: int | None = None) -> DecodeResult:
    """Bin, weight, match, recover and judge one reduced lattice."""
    bits = gkp_bin(reduced.effective_outcome[dg.graph.faces]).r
    weights = assign_weights(reduced, dg)
    syndrome = extract_syndrome(bits, dg.cube_faces)
    mg = build_matching_graph(syndrome, weights, dg)
    pairs = mwpm(mg.weights, knn=knn)
    corrected = apply_recovery(bits, pairs, mg)
    return DecodeResult(bits, syndrome, pairs, corrected, check_failure(corrected, dg))


def dump_matching(path, syndrome, pairs, mg: MatchingGraph) -> None:
    """Plain-text debug dump of the syndrome and matched paths."""
    with open(path, "w") as fh:
        fh.write("# syndrome cubes\n")
        fh.write(" ".join(str(int(c)) for c in syndrome) + "\n")
        fh.write("# matched pairs: cube_a cube_b weight faces...\n")
        for i, j in pairs:
            faces = " ".join(str(int(f)) for f in mg.path(i, j))
            fh.write(f"{mg.defects[i]} {mg.defects[j]} {mg.weights[i, j]!r} {faces}\n")
