"""Means-level Gaussian propagation for the macronode lattice.

Quadrature means are stacked as ``(q_1..q_n, p_1..p_n)`` with ``hbar = 1``
(``[q, p] = i``, GKP spacing ``sqrt(pi)``). Every gate is represented by the
real symplectic matrix ``S`` such that the output means are ``S @ m_in``
(Heisenberg action ``U^dag x U = S x``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
import scipy.sparse as sp

from .lattice import MODES_PER_NODE, RHGGraph

SQRT_PI = float(np.sqrt(np.pi))
_R2 = 1.0 / np.sqrt(2.0)


class ModeType(IntEnum):
    GKP_PLUS = 0
    P_SQUEEZED = 1


@dataclass(frozen=True)
class StatePrepConfig:
    """How sources populate the four modes of every macronode.

    ``kind="iid"`` swaps each GKP source for a momentum-squeezed state
    independently with probability ``p_swap``; ``kind="fixed_one_gkp"`` puts
    exactly one GKP state at a uniformly random slot of every macronode.
    """

    kind: str = "iid"
    p_swap: float = 0.0

    def __post_init__(self):
        if self.kind not in ("iid", "fixed_one_gkp"):
            raise ValueError(f"unknown preparation kind {self.kind!r}")
        if not 0.0 <= self.p_swap <= 1.0:
            raise ValueError("p_swap must lie in [0, 1]")
        if self.kind == "fixed_one_gkp" and self.p_swap != 0.0:
            raise ValueError("p_swap is meaningless for fixed_one_gkp")

    @property
    def label(self) -> str:
        return "fixed-one-gkp" if self.kind == "fixed_one_gkp" else "iid"


@dataclass
class QuadratureMeans:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise ValueError("q and p must be 1-d arrays of equal length")

    @property
    def n_modes(self) -> int:
        return len(self.q)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, m) -> "QuadratureMeans":
        m = np.asarray(m, dtype=float)
        n = len(m) // 2
        return cls(m[:n].copy(), m[n:].copy())


@dataclass(frozen=True)
class SymplecticOp:
    matrix: sp.csr_matrix
    tag: str = "elementary"

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def __matmul__(self, other: "SymplecticOp") -> "SymplecticOp":
        return SymplecticOp((self.matrix @ other.matrix).tocsr(), "composite")

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def symplectic_error(self) -> float:
        """``max |S^T Omega S - Omega|``."""
        S = self.matrix
        omega = symplectic_form(self.n_modes)
        return float(abs(S.T @ omega @ S - omega).max()) if S.nnz else 0.0


def symplectic_form(n: int) -> sp.csr_matrix:
    eye = sp.identity(n, format="csr")
    return sp.bmat([[None, eye], [-eye, None]], format="csr")


def identity_op(n: int) -> SymplecticOp:
    return SymplecticOp(sp.identity(2 * n, format="csr"), "identity")


def _two_mode(n, j, k, block, tag):
    """Embed a 4x4 block acting on (q_j, q_k, p_j, p_k) into 2n dims."""
    if j == k:
        raise ValueError("two-mode gate needs distinct modes")
    idx = [j, k, n + j, n + k]
    S = sp.lil_matrix((2 * n, 2 * n))
    S.setdiag(1.0)
    for a in range(4):
        for b in range(4):
            S[idx[a], idx[b]] = block[a, b]
    return SymplecticOp(S.tocsr(), tag)


def _one_mode(n, j, block, tag):
    idx = [j, n + j]
    S = sp.lil_matrix((2 * n, 2 * n))
    S.setdiag(1.0)
    for a in range(2):
        for b in range(2):
            S[idx[a], idx[b]] = block[a, b]
    return SymplecticOp(S.tocsr(), tag)


def beamsplitter(j: int, k: int, n: int | None = None) -> SymplecticOp:
    """50:50 beamsplitter with arrow ``j -> k``: ``q_k -> (q_k + q_j)/sqrt2``, ``q_j -> (q_j - q_k)/sqrt2``."""
    n = max(j, k) + 1 if n is None else n
    b = np.array([[_R2, -_R2], [_R2, _R2]])
    return _two_mode(n, j, k, np.kron(np.eye(2), b), "beamsplitter")


def cz(j: int, k: int, weight: float = 1.0, n: int | None = None) -> SymplecticOp:
    """``exp(i w q_j q_k)``: ``p_j += w q_k``, ``p_k += w q_j``."""
    n = max(j, k) + 1 if n is None else n
    blk = np.eye(4)
    blk[2, 1] = weight
    blk[3, 0] = weight
    return _two_mode(n, j, k, blk, "cz")


def cx(j: int, k: int, n: int | None = None) -> SymplecticOp:
    """``exp(-i q_j p_k)``: ``q_k += q_j``, ``p_j -= p_k``."""
    n = max(j, k) + 1 if n is None else n
    blk = np.eye(4)
    blk[1, 0] = 1.0
    blk[2, 3] = -1.0
    return _two_mode(n, j, k, blk, "cx")


def cx_dagger(j: int, k: int, n: int | None = None) -> SymplecticOp:
    n = max(j, k) + 1 if n is None else n
    blk = np.eye(4)
    blk[1, 0] = -1.0
    blk[2, 3] = 1.0
    return _two_mode(n, j, k, blk, "cx_dagger")


def squeeze(j: int, xi: float, n: int | None = None) -> SymplecticOp:
    """``S(xi)``: ``q -> xi q``, ``p -> p / xi``, so that ``<m|_q S(xi) ~ <m/xi|_q``."""
    if xi <= 0:
        raise ValueError("squeezing factor must be positive")
    n = j + 1 if n is None else n
    return _one_mode(n, j, np.diag([xi, 1.0 / xi]), "squeeze")


def rotate(j: int, theta: float, n: int | None = None) -> SymplecticOp:
    """Phase shift ``R(theta) = exp(i theta n)``; ``R(pi/2)`` maps ``(q, p) -> (-p, q)``."""
    n = j + 1 if n is None else n
    c, s = np.cos(theta), np.sin(theta)
    return _one_mode(n, j, np.array([[c, -s], [s, c]]), "rotate")


def momentum_coupling(j: int, k: int, c: float, n: int | None = None) -> SymplecticOp:
    """``exp(i c p_j p_k)``: ``q_j += c p_k``, ``q_k += c p_j``."""
    n = max(j, k) + 1 if n is None else n
    blk = np.eye(4)
    blk[0, 3] = blk[1, 2] = c
    return _two_mode(n, j, k, blk, "momentum_coupling")


def displace(m: QuadratureMeans, j: int, dq: float = 0.0, dp: float = 0.0) -> QuadratureMeans:
    """Affine displacement ``X(dq) Z(dp)`` of mode ``j``."""
    q, p = m.q.copy(), m.p.copy()
    q[j] += dq
    p[j] += dp
    return QuadratureMeans(q, p)


def elementary_symplectic(kind: str, *args, **kwargs) -> SymplecticOp:
    """Dispatch by name: beamsplitter, cz, cx, cx_dagger, squeeze, rotate."""
    table = {
        "beamsplitter": beamsplitter,
        "cz": cz,
        "cx": cx,
        "cx_dagger": cx_dagger,
        "squeeze": squeeze,
        "rotate": rotate,
    }
    try:
        return table[kind](*args, **kwargs)
    except KeyError:
        raise ValueError(f"unknown gate {kind!r}") from None


# Beamsplitters inside one macronode, wires 0..3 with wire 0 central, in time
# order: B(1->0), B(3->2), B(2->0), B(3->1).
MACRONODE_BS_SEQUENCE = ((1, 0), (3, 2), (2, 0), (3, 1))


def macronode_bs_matrix() -> np.ndarray:
    """4x4 orthogonal map applied identically to the q and to the p wires."""
    M = np.eye(4)
    for j, k in MACRONODE_BS_SEQUENCE:
        B = np.eye(4)
        B[k, k] = B[k, j] = _R2
        B[j, j] = _R2
        B[j, k] = -_R2
        M = B @ M
    return M


def cz_network(graph: RHGGraph, weight: float = 1.0) -> SymplecticOp:
    """Weight-``w`` CZ on every inter-macronode mode pair (mode ``4k+s``)."""
    n = graph.n_modes
    a = MODES_PER_NODE * np.arange(graph.n_nodes)[:, None] + np.arange(MODES_PER_NODE)
    b = MODES_PER_NODE * graph.neighbors + graph.reciprocal
    rows = n + a.ravel()
    cols = b.ravel()
    S = sp.identity(2 * n, format="csr") + sp.csr_matrix(
        (np.full(len(rows), float(weight)), (rows, cols)), shape=(2 * n, 2 * n)
    )
    return SymplecticOp(S.tocsr(), "cz_network")


def bs_network(graph: RHGGraph, wire_order: np.ndarray | None = None) -> SymplecticOp:
    """Four-beamsplitter network on every macronode.

    ``wire_order[k]`` lists the slots of node ``k`` playing wires 0..3 (wire 0
    is the central mode). Defaults to the identity order.
    """
    N, n = graph.n_nodes, graph.n_modes
    if wire_order is None:
        wire_order = np.tile(np.arange(MODES_PER_NODE), (N, 1))
    M = macronode_bs_matrix()
    modes = MODES_PER_NODE * np.arange(N)[:, None] + np.asarray(wire_order)
    rows = np.repeat(modes, MODES_PER_NODE, axis=1).ravel()
    cols = np.tile(modes, (1, MODES_PER_NODE)).ravel()
    vals = np.tile(M.ravel(), N)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return SymplecticOp(sp.block_diag([Q, Q], format="csr"), "bs_network")


def apply(op: SymplecticOp, m) -> QuadratureMeans:
    vec = m.as_vector() if isinstance(m, QuadratureMeans) else np.asarray(m, dtype=float)
    if op.matrix.shape[1] != len(vec):
        raise ValueError(f"dimension mismatch: op {op.matrix.shape}, means {len(vec)}")
    return QuadratureMeans.from_vector(op.matrix @ vec)


def sample_types(prep: StatePrepConfig, n_nodes: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean ``(N, 4)`` array, True where the slot holds a GKP ``|+>`` state."""
    if prep.kind == "fixed_one_gkp":
        is_gkp = np.zeros((n_nodes, MODES_PER_NODE), dtype=bool)
        is_gkp[np.arange(n_nodes), rng.integers(0, MODES_PER_NODE, n_nodes)] = True
        return is_gkp
    if prep.p_swap == 0.0:
        return np.ones((n_nodes, MODES_PER_NODE), dtype=bool)
    return rng.random((n_nodes, MODES_PER_NODE)) >= prep.p_swap


def sample_q(is_gkp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Input q means: ``{0, sqrt(pi)}`` for GKP, ``U[0, 2 sqrt(pi))`` otherwise."""
    gkp_q = SQRT_PI * rng.integers(0, 2, is_gkp.shape)
    sq_q = rng.uniform(0.0, 2.0 * SQRT_PI, is_gkp.shape)
    return np.where(is_gkp, gkp_q, sq_q)


def sample_inputs(prep: StatePrepConfig, graph: RHGGraph, rng: np.random.Generator):
    """Return ``(types, means)``: ModeType per mode and input means (all p zero)."""
    is_gkp = sample_types(prep, graph.n_nodes, rng)
    q = sample_q(is_gkp, rng).ravel()
    types = np.where(is_gkp.ravel(), ModeType.GKP_PLUS, ModeType.P_SQUEEZED)
    return types, QuadratureMeans(q, np.zeros_like(q))


def measure_with_noise(
    m_out: QuadratureMeans, basis, epsilon: float, rng: np.random.Generator
) -> np.ndarray:
    """Homodyne outcomes: chosen quadrature mean plus ``N(0, epsilon)`` noise.

    ``basis`` is per mode, ``"q"``/``"p"`` or a boolean array (True = p).
    """
    if epsilon < 0:
        raise ValueError("noise variance must be non-negative")
    basis = np.asarray(basis)
    use_p = basis == "p" if basis.dtype.kind in "US" else basis.astype(bool)
    use_p = np.broadcast_to(use_p, m_out.q.shape)
    out = np.where(use_p, m_out.p, m_out.q)
    if epsilon > 0:
        out = out + rng.normal(0.0, np.sqrt(epsilon), out.shape)
    return out


def verify_identities() -> dict[str, float]:
    """Maximum deviations of the circuit identities the architecture rests on.

    - ``beamsplitter_cx``: ``B_jk = CX_jk (S_k(sqrt2) S_j(sqrt2)^dag) CX^dag_kj``.
    - ``beamsplitter_cz``: ``R_k(pi/2) B_jk R_k(-pi/2) S_k(sqrt2) S_j(sqrt2)
      = CZ_jk exp(-i p_j p_k / 2)``. The momentum coupling acts trivially
      when either input is ``|0>_p`` (checked on zero-momentum means) and on
      GKP ``|+>|+>`` (phase ``p_j p_k / 2`` is a multiple of ``2 pi`` on the
      momentum comb, ``gkp_phase``).
    - ``loss_commutes_bs`` / ``loss_commutes_rotation`` / ``additive_noise_*``:
      Gaussian channels that fix the vacuum mean commute with ``B``; isotropic
      ones also with ``R(theta)`` (covariance level, random covariances).
    """
    j, k = 0, 1
    r2 = np.sqrt(2.0)
    out = {}

    B = beamsplitter(j, k, 2).dense()
    rhs = (cx(j, k, 2) @ squeeze(k, r2, 2) @ squeeze(j, 1 / r2, 2) @ cx_dagger(k, j, 2)).dense()
    out["beamsplitter_cx"] = float(np.abs(B - rhs).max())

    lhs = (rotate(k, np.pi / 2, 2) @ beamsplitter(j, k, 2) @ rotate(k, -np.pi / 2, 2)
           @ squeeze(k, r2, 2) @ squeeze(j, r2, 2)).dense()
    rhs = (cz(j, k, 1.0, 2) @ momentum_coupling(j, k, -0.5, 2)).dense()
    out["beamsplitter_cz"] = float(np.abs(lhs - rhs).max())
    comb = 2 * SQRT_PI * np.arange(-3, 4)
    phase = np.outer(comb, comb) / 2
    out["gkp_phase"] = float(np.abs(np.exp(-1j * phase) - 1).max())
    # On inputs with zero momentum the coupling term is the identity on means.
    rng = np.random.default_rng(7)
    m = np.concatenate([rng.normal(size=2), np.zeros(2)])
    out["beamsplitter_cz_means"] = float(np.abs(lhs @ m - cz(j, k, 1.0, 2).dense() @ m).max())

    V = rng.normal(size=(4, 4))
    V = V @ V.T + np.eye(4)
    eta, c = 0.8, 0.3
    lossy = lambda cov: eta * cov + 0.5 * (1 - eta) * np.eye(len(cov))  # noqa: E731
    noisy = lambda cov: cov + c * np.eye(len(cov))  # noqa: E731
    R = (rotate(j, 0.37, 2) @ rotate(k, 0.37, 2)).dense()
    for name, S in (("bs", B), ("rotation", R)):
        out[f"loss_commutes_{name}"] = float(np.abs(S @ lossy(V) @ S.T - lossy(S @ V @ S.T)).max())
        out[f"additive_noise_commutes_{name}"] = float(
            np.abs(S @ noisy(V) @ S.T - noisy(S @ V @ S.T)).max()
        )
    return out
