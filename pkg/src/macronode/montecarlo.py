"""Trial orchestration and failure-rate estimation.

Every trial draws from its own counter-based stream
``Philox(SeedSequence(base_seed, spawn_key=(cell_key, trial)))``, so a cell's
result depends only on ``(base_seed, cell parameters, trial range)`` and is
invariant under worker count, chunking and execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .decoder import DecodingGraph, decode
from .gaussian import SQRT_PI, StatePrepConfig, macronode_bs_matrix, sample_q, sample_types
from .lattice import MODES_PER_NODE, build_lattice
from .noise import NOISE_UNITS, detector_variance
from .reduction import measurement_basis, reduce_lattice, select_central

RNG_ALGORITHM = "numpy.random.Philox(SeedSequence(base_seed, spawn_key=(cell_key, trial)))"
WORKERS_ENV = "MACRONODE_WORKERS"
_Z95 = float(norm.ppf(0.975))


@dataclass(frozen=True)
class TrialConfig:
    """One Monte Carlo cell plus the seed of a single trial.

    Attributes
    ----------
    d : int
        Code distance.
    epsilon : float
        Total Gaussian noise variance per homodyne outcome.
    prep : StatePrepConfig
    seed : int
        Base seed; combined with ``trial`` and the cell key.
    trial : int
        Trial index inside the cell.
    knn : int or None
        Optional matching-graph pruning (off by default).
    noise_units : {"vacuum", "absolute"}
        How ``epsilon`` maps to the outcome variance, see
        :func:`~macronode.noise.detector_variance`.
    """

    d: int
    epsilon: float
    prep: StatePrepConfig = field(default_factory=StatePrepConfig)
    seed: int = 0
    trial: int = 0
    knn: int | None = None
    noise_units: str = "vacuum"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("distance must be an integer >= 2")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be finite and non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.noise_units not in NOISE_UNITS:
            raise ValueError(f"noise_units must be one of {NOISE_UNITS}")

    @property
    def cell_key(self) -> int:
        return cell_key(self.d, self.epsilon, self.prep, self.noise_units)

    @property
    def variance(self) -> float:
        return detector_variance(self.epsilon, self.noise_units)


def cell_key(d: int, epsilon: float, prep: StatePrepConfig, noise_units: str = "vacuum") -> int:
    """Stable 63-bit key of a cell's parameters (independent of grid order)."""
    text = f"{int(d)}|{float(epsilon)!r}|{prep.kind}|{float(prep.p_swap)!r}"
    if noise_units != "vacuum":
        text += f"|{noise_units}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


def trial_rng(base_seed: int, key: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(key), int(trial)))
    return np.random.Generator(np.random.Philox(ss))


class TrialContext:
    """Per-distance static data: lattice, decoding graph and beamsplitter matrix."""

    def __init__(self, d: int):
        self.graph = build_lattice(d)
        self.dg = DecodingGraph.from_lattice(self.graph)
        self.bs = macronode_bs_matrix()

    def propagate(self, q_in: np.ndarray, order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Output means ``(q, p)`` per slot for zero input momenta.

        Equivalent to ``apply(bs_network(g, order) @ cz_network(g), m_in)``
        but uses the block structure directly.
        """
        g = self.graph
        p = q_in[g.neighbors, g.reciprocal]  # CZ: p_k += q_neighbour
        q_w = np.take_along_axis(q_in, order, axis=1) @ self.bs.T
        p_w = np.take_along_axis(p, order, axis=1) @ self.bs.T
        q_out = np.empty_like(q_w)
        p_out = np.empty_like(p_w)
        np.put_along_axis(q_out, order, q_w, axis=1)
        np.put_along_axis(p_out, order, p_w, axis=1)
        return q_out, p_out


@lru_cache(maxsize=8)
def get_context(d: int) -> TrialContext:
    return TrialContext(int(d))


@dataclass
class TrialResult:
    failure: bool
    n_syndrome: int
    n_bit_errors: int


def run_trial(cfg: TrialConfig, context: TrialContext | None = None) -> TrialResult:
    """Sample, propagate, measure, reduce, decode and judge one lattice."""
    ctx = context or get_context(cfg.d)
    g = ctx.graph
    N = g.n_nodes
    rng = trial_rng(cfg.seed, cfg.cell_key, cfg.trial)
    is_gkp = sample_types(cfg.prep, N, rng)
    q_in = sample_q(is_gkp, rng)
    types = np.where(is_gkp, 0, 1)
    order = select_central(types)
    q_out, p_out = ctx.propagate(q_in, order)
    basis = measurement_basis(order).reshape(N, MODES_PER_NODE)
    outcomes = np.where(basis, p_out, q_out)
    var = cfg.variance
    if var > 0:
        outcomes = outcomes + rng.normal(0.0, math.sqrt(var), outcomes.shape)
    reduced = reduce_lattice(g, types.ravel(), outcomes.ravel(), basis.ravel(), var)
    res = decode(reduced, ctx.dg, knn=cfg.knn)
    # ideal parities: central p_in = 0 plus the neighbours' central q inputs
    q_central = q_in[np.arange(N), order[:, 0]]
    ideal = np.mod(np.rint(q_central[g.neighbors[g.faces]].sum(axis=1) / SQRT_PI), 2).astype(np.int8)
    return TrialResult(res.failure, len(res.syndrome), int(np.count_nonzero(res.bits != ideal)))


# --------------------------------------------------------------------------
# estimation
# --------------------------------------------------------------------------


def wilson_interval(k: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else min(p, max(0.0, centre - half))
    hi = 1.0 if k == n else max(p, min(1.0, centre + half))
    return lo, hi


@dataclass
class SweepRow:
    d: int
    epsilon: float
    p_swap: float
    prep: str
    n_trials: int
    n_failures: int
    rate: float
    ci_low: float
    ci_high: float
    seed: int = 0
    noise_units: str = "vacuum"

    @classmethod
    def from_counts(cls, d, epsilon, prep: StatePrepConfig, n, k, seed=0, noise_units="vacuum") -> "SweepRow":
        lo, hi = wilson_interval(k, n)
        return cls(int(d), float(epsilon), float(prep.p_swap), prep.kind, int(n), int(k), k / n, lo, hi, int(seed),
                   noise_units)

    @property
    def prep_config(self) -> StatePrepConfig:
        return StatePrepConfig(self.prep, self.p_swap)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def _count_failures(args) -> int:
    d, epsilon, prep_kind, p_swap, seed, start, stop, knn, units = args
    prep = StatePrepConfig(prep_kind, p_swap)
    ctx = get_context(d)
    k = 0
    for t in range(start, stop):
        k += run_trial(TrialConfig(d, epsilon, prep, seed, t, knn, units), ctx).failure
    return k


def _chunks(start: int, stop: int, size: int):
    return [(a, min(a + size, stop)) for a in range(start, stop, size)]


def count_failures(d, epsilon, prep, seed, start, stop, workers=None, chunk=250, knn=None,
                   noise_units="vacuum") -> int:
    """Failures among trials ``[start, stop)`` of one cell."""
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(int(d), float(epsilon), prep.kind, float(prep.p_swap), int(seed), a, b, knn, noise_units)
            for a, b in _chunks(start, stop, chunk)]
    if workers == 1 or len(jobs) == 1:
        return sum(map(_count_failures, jobs))
    import multiprocessing as mp

    with mp.get_context("fork").Pool(workers) as pool:
        return sum(pool.map(_count_failures, jobs))


def estimate_rate(d: int, epsilon: float, prep: StatePrepConfig, n_trials: int, seed: int = 0,
                  workers: int | None = None, knn: int | None = None, noise_units: str = "vacuum") -> SweepRow:
    """Failure rate of one cell over ``n_trials`` with a 95% Wilson interval."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    k = count_failures(d, epsilon, prep, seed, 0, n_trials, workers=workers, knn=knn, noise_units=noise_units)
    return SweepRow.from_counts(d, epsilon, prep, n_trials, k, seed, noise_units)


# --------------------------------------------------------------------------
# sweeps with checkpoints
# --------------------------------------------------------------------------


def _chunk_key(d, epsilon, prep, seed, noise_units="vacuum") -> str:
    fields = [int(d), float(epsilon), prep.kind, float(prep.p_swap), int(seed)]
    if noise_units != "vacuum":
        fields.append(noise_units)
    return json.dumps(fields)


def read_records(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def rows_from_records(records) -> list[SweepRow]:
    return [SweepRow(**{k: v for k, v in r.items() if k != "type"}) for r in records if r.get("type") == "row"]


def sweep(distances, epsilons, preps, n_trials: int, seed: int = 0, checkpoint=None,
          workers: int | None = None, chunk: int = 1000, knn: int | None = None,
          progress=None, noise_units: str = "vacuum") -> list[SweepRow]:
    """Estimate every ``(d, epsilon, prep)`` cell, resumably.

    With ``checkpoint`` set, each finished chunk of trials is appended as a
    ``{"type": "chunk"}`` record and each finished cell as a ``{"type": "row"}``
    record; re-running skips completed work and never duplicates rows.
    """
    grid = [(int(d), float(e), p) for d in distances for e in epsilons for p in preps]
    if not grid:
        raise ValueError("empty sweep grid")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if noise_units not in NOISE_UNITS:
        raise ValueError(f"noise_units must be one of {NOISE_UNITS}")
    done_chunks: dict[str, dict[tuple[int, int], int]] = {}
    done_rows: dict[tuple, SweepRow] = {}
    fh = None
    if checkpoint is not None:
        path = Path(checkpoint)
        records = read_records(path)
        for r in records:
            if r.get("type") == "header" and int(r["base_seed"]) != int(seed):
                raise ValueError(f"checkpoint {path} was written with base seed {r['base_seed']}")
            if r.get("type") == "chunk":
                done_chunks.setdefault(r["key"], {})[(r["start"], r["stop"])] = r["n_failures"]
        for row in rows_from_records(records):
            done_rows[(row.d, row.epsilon, row.prep, row.p_swap, row.n_trials, row.seed, row.noise_units)] = row
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = path.open("a")
        if not records:
            fh.write(json.dumps({"type": "header", "rng": RNG_ALGORITHM, "base_seed": int(seed)}) + "\n")
            fh.flush()
    rows = []
    try:
        for d, e, prep in grid:
            rk = (d, e, prep.kind, float(prep.p_swap), int(n_trials), int(seed), noise_units)
            if rk in done_rows:
                rows.append(done_rows[rk])
                continue
            key = _chunk_key(d, e, prep, seed, noise_units)
            have = done_chunks.get(key, {})
            k = 0
            for a, b in _chunks(0, n_trials, chunk):
                if (a, b) in have:
                    k += have[(a, b)]
                    continue
                kk = count_failures(d, e, prep, seed, a, b, workers=workers, knn=knn, noise_units=noise_units)
                k += kk
                if fh is not None:
                    fh.write(json.dumps({"type": "chunk", "key": key, "start": a, "stop": b, "n_failures": kk}) + "\n")
                    fh.flush()
            row = SweepRow.from_counts(d, e, prep, n_trials, k, seed, noise_units)
            if fh is not None:
                fh.write(json.dumps({"type": "row", **asdict(row)}) + "\n")
                fh.flush()
            if progress is not None:
                progress(row)
            rows.append(row)
    finally:
        if fh is not None:
            fh.close()
    return rows


TABLE_COLUMNS = ("d", "epsilon", "p_swap", "prep", "n_trials", "n_failures", "rate", "ci_low", "ci_high", "seed",
                 "noise_units")


def write_table(rows, path) -> None:
    """Whitespace-separated columnar table for plotting.

    Floats are written with ``repr`` so :func:`read_table` recovers them
    exactly.
    """
    with open(path, "w") as fh:
        fh.write("# " + " ".join(TABLE_COLUMNS) + "\n")
        for r in rows:
            fh.write(" ".join(repr(v) if isinstance(v, float) else str(v)
                              for v in (getattr(r, c) for c in TABLE_COLUMNS)) + "\n")


def read_table(path) -> list[SweepRow]:
    """Inverse of :func:`write_table`."""
    rows = []
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
        if header[:9] != list(TABLE_COLUMNS[:9]):
            raise ValueError(f"{path}: not a sweep table (header {header})")
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            rec = dict(zip(header, parts))
            rows.append(SweepRow(int(rec["d"]), float(rec["epsilon"]), float(rec["p_swap"]), rec["prep"],
                                 int(rec["n_trials"]), int(rec["n_failures"]), float(rec["rate"]),
                                 float(rec["ci_low"]), float(rec["ci_high"]), int(rec.get("seed", 0)),
                                 rec.get("noise_units", "vacuum")))
    return rows
