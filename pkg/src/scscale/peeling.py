"""Erasure sampling, peeling decoding, and residual classification.

The decoder removes all non-erased VNs up front, then repeatedly picks
a degree-one CN uniformly at random over all positions, resolves its
unique remaining VN and deletes that VN's edges. It stops when no
degree-one CN is left; an empty residual means success, a non-empty
residual is the maximal stopping set inside the erasure pattern.

Bookkeeping is O(1) per step: per-CN degrees plus an xor accumulator of
incident VN ids (a degree-one CN's xor IS its remaining VN), and the
degree-one pool is a swap-with-last array with an index map. Traces
record the degree-one fraction r1 = pool/N every `stride` iterations
plus the final point.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .ensemble import EnsembleSpec, TannerGraph, sample_graph, validate_spec
from .errors import EmptyResidual, ValidationError
from .rng import as_generator, trial_rng

_NORMAL_Z = 1.959963984540054  # two-sided 95%


def default_stride(N: int) -> int:
    # every iteration for small N, ~1000 samples per unit tau otherwise
    return 1 if N <= 2000 else math.ceil(N / 1000)


@dataclass(frozen=True)
class ErasurePattern:
    mask: np.ndarray  # bool per VN
    eps: float
    seed: object = None

    @property
    def erased_count(self) -> int:
        return int(self.mask.sum())


def sample_erasures(graph_or_spec, eps: float, seed_or_rng) -> ErasurePattern:
    """Erase each VN independently with probability eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValidationError(f"eps={eps} outside [0, 1]")
    spec = graph_or_spec.spec if isinstance(graph_or_spec, TannerGraph) else graph_or_spec
    rng = as_generator(seed_or_rng)
    mask = rng.random(spec.vn_count) < eps
    seed = seed_or_rng if isinstance(seed_or_rng, int) else None
    return ErasurePattern(mask=mask, eps=float(eps), seed=seed)


@njit(cache=True, nogil=True)
def _peel_kernel(vn_cns, erased, sel_u, n_cn, M, N, stride,
                 rec_ell, rec_pool, rec_pos, record_pos):
    n_vn, dv = vn_cns.shape

    cn_deg = np.zeros(n_cn, np.int32)
    cn_xor = np.zeros(n_cn, np.int64)
    for v in range(n_vn):
        if erased[v]:
            for j in range(dv):
                c = vn_cns[v, j]
                if c >= 0:
                    cn_deg[c] += 1
                    cn_xor[c] ^= v

    pool = np.empty(n_cn, np.int32)
    pool_pos = np.full(n_cn, -1, np.int32)
    psize = 0
    for c in range(n_cn):
        if cn_deg[c] == 1:
            pool[psize] = c
            pool_pos[c] = psize
            psize += 1

    n_pos = n_cn // M
    pos_count = np.zeros(n_pos, np.int32)
    if record_pos:
        for k in range(psize):
            pos_count[pool[k] // M] += 1

    n_rec = 0
    rec_ell[n_rec] = 0
    rec_pool[n_rec] = psize
    if record_pos:
        for u in range(n_pos):
            rec_pos[n_rec, u] = pos_count[u]
    n_rec += 1

    ell = 0
    while psize > 0:
        k = int(sel_u[ell] * psize)
        if k == psize:  # sel_u may be arbitrarily close to 1
            k = psize - 1
        c = pool[k]
        v = int(cn_xor[c])
        erased[v] = False
        for j in range(dv):
            c2 = vn_cns[v, j]
            if c2 < 0:
                continue
            d = cn_deg[c2] - 1
            cn_deg[c2] = d
            cn_xor[c2] ^= v
            if d == 1:
                pool[psize] = c2
                pool_pos[c2] = psize
                psize += 1
                if record_pos:
                    pos_count[c2 // M] += 1
            elif d == 0:
                # c2 was degree one, so it sits in the pool; drop it
                p = pool_pos[c2]
                last = pool[psize - 1]
                pool[p] = last
                pool_pos[last] = p
                pool_pos[c2] = -1
                psize -= 1
                if record_pos:
                    pos_count[c2 // M] -= 1
        ell += 1
        if psize == 0 or ell % stride == 0:
            rec_ell[n_rec] = ell
            rec_pool[n_rec] = psize
            if record_pos:
                for u in range(n_pos):
                    rec_pos[n_rec, u] = pos_count[u]
            n_rec += 1
    return ell, n_rec


@njit(cache=True, nogil=True)
def _component_roots(vn_cns, residual_ids, n_cn):
    """Union-find roots of the residual VNs, linked through shared CNs."""
    n_vn = vn_cns.shape[0]
    dv = vn_cns.shape[1]
    parent = np.full(n_vn, -1, np.int64)
    for idx in range(residual_ids.size):
        v = residual_ids[idx]
        parent[v] = v
    cn_first = np.full(n_cn, -1, np.int64)
    for idx in range(residual_ids.size):
        v = residual_ids[idx]
        for j in range(dv):
            c = vn_cns[v, j]
            if c < 0:
                continue
            w = cn_first[c]
            if w < 0:
                cn_first[c] = v
            else:
                ra = v
                while parent[ra] != ra:
                    ra = parent[ra]
                rb = w
                while parent[rb] != rb:
                    rb = parent[rb]
                if ra != rb:
                    parent[ra] = rb
    roots = np.empty(residual_ids.size, np.int64)
    for idx in range(residual_ids.size):
        r = residual_ids[idx]
        while parent[r] != r:
            r = parent[r]
        roots[idx] = r
    return roots


@dataclass
class DecodingTrace:
    spec: EnsembleSpec
    stride: int
    ell: np.ndarray            # recorded iteration numbers
    r1: np.ndarray             # degree-one CN count / N at those iterations
    r1_per_position: np.ndarray | None  # raw per-position counts, or None
    ell_max: int
    erased_count: int
    residual_vns: np.ndarray   # ids of unresolved VNs (empty on success)
    residual_cn_degrees: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return self.ell / self.spec.N

    @property
    def tau0(self) -> float:
        """First time the degree-one fraction hits zero (decoding halts)."""
        return self.ell_max / self.spec.N

    @property
    def success(self) -> bool:
        return self.residual_vns.size == 0

    @property
    def residual_count(self) -> int:
        return int(self.residual_vns.size)


def peel(graph: TannerGraph, pattern: ErasurePattern, trace_stride: int | None = None,
         selection_rng=0, record_per_position: bool = False) -> DecodingTrace:
    """Run peeling decoding on one (graph, erasure) pair.

    `selection_rng` feeds the uniform degree-one choices; an integer is
    treated as a seed, so identical inputs give identical traces.
    """
    spec = graph.spec
    stride = trace_stride if trace_stride is not None else default_stride(spec.N)
    if stride < 1:
        raise ValidationError(f"trace_stride={stride} must be >= 1")
    rng = as_generator(selection_rng)
    erased = pattern.mask.copy()
    n_erased = int(erased.sum())
    sel_u = rng.random(n_erased)
    return _peel_into(graph, erased, n_erased, sel_u, stride, record_per_position)


def _peel_into(graph, erased, n_erased, sel_u, stride, record_per_position):
    spec = graph.spec
    max_rec = n_erased // stride + 3
    rec_ell = np.empty(max_rec, np.int64)
    rec_pool = np.empty(max_rec, np.int64)
    if record_per_position:
        rec_pos = np.empty((max_rec, spec.cn_positions), np.int32)
    else:
        rec_pos = np.empty((0, 0), np.int32)
    ell_max, n_rec = _peel_kernel(
        graph.vn_cns, erased, sel_u, spec.cn_count, spec.M, spec.N,
        stride, rec_ell, rec_pool, rec_pos, record_per_position,
    )
    residual = np.flatnonzero(erased)
    cn_deg = _residual_cn_degrees(graph, residual)
    return DecodingTrace(
        spec=spec,
        stride=stride,
        ell=rec_ell[:n_rec].copy(),
        r1=rec_pool[:n_rec] / spec.N,
        r1_per_position=rec_pos[:n_rec].copy() if record_per_position else None,
        ell_max=int(ell_max),
        erased_count=n_erased,
        residual_vns=residual,
        residual_cn_degrees=cn_deg,
    )


def _residual_cn_degrees(graph: TannerGraph, residual: np.ndarray) -> np.ndarray:
    if residual.size == 0:
        return np.zeros(0, dtype=np.int64)
    edges = graph.vn_cns[residual]
    edges = edges[edges >= 0]
    deg = np.bincount(edges, minlength=graph.cn_count)
    return deg[deg > 0]


def classify_residual(graph: TannerGraph, trace: DecodingTrace):
    """Component-size multiset of the residual graph plus expurgation flag.

    A failure is expurgated when every connected component of the
    residual contains exactly two VNs. Raises EmptyResidual on success.
    """
    residual = trace.residual_vns
    if residual.size == 0:
        raise EmptyResidual("trial decoded fully; no residual to classify")
    roots = _component_roots(graph.vn_cns, residual.astype(np.int64), trace.spec.cn_count)
    _, counts = np.unique(roots, return_counts=True)
    sizes = np.sort(counts)
    return sizes, bool((sizes == 2).all())


def debris_threshold(spec: EnsembleSpec) -> int:
    """Residual size below which a failure counts as isolated debris.

    Sub-block-scale stopping sets (a handful of bits) do not stop the
    decoding wave; it peels around them. A stalled wave strands at
    least a position's worth of erasures, orders of magnitude more.
    """
    return max(2 * spec.dc, spec.N // 50)


def wave_died(trace: DecodingTrace) -> bool:
    """Whether the decoding wave stalled in the interior of the chain.

    Truncated chains always strand a right-boundary tail of reduced
    degree VNs, so for single-wave runs the meaningful failure event is
    a macroscopic residual before the tail region: at least
    debris_threshold residual VNs at positions < L - 2*dv. A position
    test alone would misread small stopping-set debris (which the wave
    peels past, leaving a few bits at a random position) as a stall.
    """
    spec = trace.spec
    if trace.residual_vns.size == 0:
        return False
    cutoff = (spec.L - 2 * spec.dv) * spec.N
    interior = int(np.searchsorted(trace.residual_vns, cutoff))
    return interior >= debris_threshold(spec)


@dataclass
class TrialOutcome:
    success: bool
    expurgated: bool
    residual_bits: int
    tau0: float
    wave_death: bool = False

    @property
    def counted_failure(self) -> bool:
        return (not self.success) and (not self.expurgated)


@dataclass
class RunResult:
    spec: EnsembleSpec
    eps: float
    trials: int
    seed: int
    expurgate: bool
    failures: int              # non-expurgated failures
    expurgated_failures: int
    fer: float
    fer_lo: float
    fer_hi: float
    ber: float
    ber_lo: float
    ber_hi: float
    tau0: np.ndarray
    success: np.ndarray        # bool per trial
    expurgated: np.ndarray     # bool per trial
    residual_bits: np.ndarray  # int per trial
    wave_death: np.ndarray = field(default=None)

    def failure_tau0(self) -> np.ndarray:
        """First-hit samples of the counted (non-expurgated) failures."""
        mask = (~self.success) & (~self.expurgated)
        return self.tau0[mask]


def wilson_interval(k: int, n: int, z: float = _NORMAL_Z) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    # the corner endpoints are exactly 0 and 1; round-off must not
    # break lo <= phat <= hi there
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SCSCALE_WORKERS")
    return max(1, int(env)) if env else 1


def run_single_trial(spec: EnsembleSpec, eps: float, master_seed: int, trial_index: int,
                     stride: int | None = None, record_per_position: bool = False,
                     classify: bool = True) -> tuple[TrialOutcome, DecodingTrace, TannerGraph]:
    """One fully seeded trial: fresh graph, fresh erasures, one decode."""
    rng = trial_rng(master_seed, trial_index)
    graph = sample_graph(spec, rng)
    pattern = sample_erasures(graph, eps, rng)
    erased = pattern.mask  # kernel consumes it; pattern not reused
    n_erased = int(erased.sum())
    sel_u = rng.random(n_erased)
    use_stride = stride if stride is not None else default_stride(spec.N)
    if use_stride < 1:
        raise ValidationError(f"stride={use_stride} must be >= 1")
    trace = _peel_into(graph, erased, n_erased, sel_u, use_stride, record_per_position)
    if trace.success:
        outcome = TrialOutcome(True, False, 0, trace.tau0)
    else:
        expurgated = False
        if classify:
            _, expurgated = classify_residual(graph, trace)
        outcome = TrialOutcome(False, expurgated, trace.residual_count, trace.tau0,
                               wave_death=wave_died(trace))
    return outcome, trace, graph


def run_trials(spec: EnsembleSpec, eps: float, trials: int, seed: int,
               expurgate: bool = True, workers: int | None = None,
               stride: int | None = None) -> RunResult:
    """Monte-Carlo FER/BER estimation over independently sampled trials.

    FER counts non-expurgated failures; BER counts all residual erased
    bits of those failures and treats expurgated trials as error-free.
    95% intervals: Wilson for FER, normal approximation on the per-trial
    residual-bit fraction for BER. tau0 samples are kept for
    distribution fitting.
    """
    spec = validate_spec(spec)
    if trials < 1:
        raise ValidationError(f"trials={trials} must be >= 1")
    if not 0.0 <= eps <= 1.0:
        raise ValidationError(f"eps={eps} outside [0, 1]")
    n_workers = resolve_workers(workers)

    tau0 = np.empty(trials, dtype=np.float64)
    success = np.empty(trials, dtype=bool)
    expurg = np.zeros(trials, dtype=bool)
    residual_bits = np.zeros(trials, dtype=np.int64)
    wave_death = np.zeros(trials, dtype=bool)

    def one(t: int) -> None:
        outcome, _, _ = run_single_trial(spec, eps, seed, t, stride=stride,
                                         classify=expurgate)
        tau0[t] = outcome.tau0
        success[t] = outcome.success
        expurg[t] = outcome.expurgated if expurgate else False
        residual_bits[t] = outcome.residual_bits
        wave_death[t] = outcome.wave_death

    if n_workers == 1:
        for t in range(trials):
            one(t)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(one, range(trials)))

    counted = (~success) & (~expurg)
    failures = int(counted.sum())
    fer = failures / trials
    fer_lo, fer_hi = wilson_interval(failures, trials)

    frac = np.where(counted, residual_bits, 0) / spec.vn_count
    ber = float(frac.mean())
    if trials > 1:
        se = float(frac.std(ddof=1)) / math.sqrt(trials)
    else:
        se = 0.0
    ber_lo = max(0.0, ber - _NORMAL_Z * se)
    ber_hi = min(1.0, ber + _NORMAL_Z * se)

    return RunResult(
        spec=spec, eps=eps, trials=trials, seed=seed, expurgate=expurgate,
        failures=failures, expurgated_failures=int(expurg.sum()),
        fer=fer, fer_lo=fer_lo, fer_hi=fer_hi,
        ber=ber, ber_lo=ber_lo, ber_hi=ber_hi,
        tau0=tau0, success=success, expurgated=expurg,
        residual_bits=residual_bits, wave_death=wave_death,
    )


def dump_tau0_samples(result: RunResult, path: str) -> None:
    """CSV dump: trial,tau0,outcome,expurgated,residual_bits."""
    with open(path, "w") as fh:
        fh.write("trial,tau0,outcome,expurgated,residual_bits\n")
        for t in range(result.trials):
            outcome = "success" if result.success[t] else "failure"
            fh.write(
                f"{t},{float(result.tau0[t])!r},{outcome},"
                f"{int(result.expurgated[t])},{int(result.residual_bits[t])}\n"
            )
