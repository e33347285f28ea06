"""Semi-structured spatially coupled LDPC ensembles.

A (dv, dc, L, N) ensemble chains L regular LDPC blocks. Each variable
node at position i places one edge at every check-node position
i .. i+dv-1. A terminated chain appends dv-1 extra check-only positions
so both ends behave alike; a truncated chain simply stops the check
positions at L, dropping the out-of-range edges of right-boundary VNs.

Within a check position, the incoming edges are matched onto the M*dc
check sockets by a random partial permutation, so fully covered
positions have check degree exactly dc (boundary positions are only
partially filled). A VN contributes at most one edge per position, so
duplicate VN-CN edges cannot occur.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import DegenerateChain, NonIntegerM, ValidationError
from .rng import as_generator


class Termination(str, Enum):
    TERMINATED = "terminated"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class EnsembleSpec:
    dv: int
    dc: int
    L: int
    N: int
    termination: Termination = Termination.TERMINATED

    @property
    def M(self) -> int:
        """Check nodes per position."""
        return self.dv * self.N // self.dc

    @property
    def vn_count(self) -> int:
        return self.L * self.N

    @property
    def cn_positions(self) -> int:
        if self.termination is Termination.TERMINATED:
            return self.L + self.dv - 1
        return self.L

    @property
    def cn_count(self) -> int:
        return self.cn_positions * self.M

    @property
    def design_rate(self) -> float:
        return 1.0 - self.cn_count / self.vn_count

    @property
    def edge_count(self) -> int:
        if self.termination is Termination.TERMINATED:
            return self.dv * self.L * self.N
        # right-boundary VNs lose the offsets that would fall past position L
        return sum(min(self.dv, self.L - i) * self.N for i in range(self.L))

    def vn_degree(self, position: int) -> int:
        if self.termination is Termination.TERMINATED:
            return self.dv
        return min(self.dv, self.L - position)

    def with_termination(self, termination: Termination) -> "EnsembleSpec":
        return replace(self, termination=Termination(termination))


def validate_spec(spec: EnsembleSpec) -> EnsembleSpec:
    if spec.L < 1:
        raise DegenerateChain(f"L={spec.L} must be >= 1")
    if spec.dv < 2:
        raise ValidationError(f"dv={spec.dv} must be >= 2")
    if spec.dc <= spec.dv:
        raise ValidationError(f"dc={spec.dc} must exceed dv={spec.dv}")
    if spec.N < 1:
        raise ValidationError(f"N={spec.N} must be >= 1")
    if (spec.dv * spec.N) % spec.dc != 0:
        raise NonIntegerM(
            f"dv*N = {spec.dv * spec.N} is not divisible by dc = {spec.dc}"
        )
    if not isinstance(spec.termination, Termination):
        return replace(spec, termination=Termination(spec.termination))
    return spec


@dataclass
class TannerGraph:
    """Sampled bipartite graph.

    vn_cns[v, j] is the global check-node id that VN v reaches through
    offset j, or -1 when the truncated boundary dropped that edge.
    Global CN ids are u * M + m for CN m of position u; VN ids are
    i * N + n for VN n of position i.
    """

    spec: EnsembleSpec
    vn_cns: np.ndarray

    @property
    def vn_count(self) -> int:
        return self.spec.vn_count

    @property
    def cn_count(self) -> int:
        return self.spec.cn_count

    @property
    def edge_count(self) -> int:
        return int((self.vn_cns >= 0).sum())

    def vn_positions(self, vn_ids: np.ndarray) -> np.ndarray:
        return np.asarray(vn_ids) // self.spec.N

    def cn_degrees(self) -> np.ndarray:
        """Full recount of per-CN degrees from the edge list."""
        edges = self.vn_cns[self.vn_cns >= 0]
        return np.bincount(edges, minlength=self.cn_count).astype(np.int64)

    @cached_property
    def cn_to_vns(self) -> tuple[np.ndarray, np.ndarray]:
        """Reverse adjacency in CSR form: (indptr, vn_ids)."""
        mask = self.vn_cns >= 0
        cns = self.vn_cns[mask].astype(np.int64)
        vns = np.nonzero(mask)[0].astype(np.int64)
        order = np.argsort(cns, kind="stable")
        counts = np.bincount(cns, minlength=self.cn_count)
        indptr = np.zeros(self.cn_count + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return indptr, vns[order]


def sample_graph(spec: EnsembleSpec, seed_or_rng) -> TannerGraph:
    """Draw one graph from the ensemble.

    Deterministic for a given seed. Socket matching is done position by
    position: the incoming edges (ordered by VN position, then VN index)
    are mapped onto a random sample of the M*dc sockets, and a socket's
    check node is socket // dc.
    """
    spec = validate_spec(spec)
    rng = as_generator(seed_or_rng)
    dv, L, N, M, dc = spec.dv, spec.L, spec.N, spec.M, spec.dc

    vn_cns = np.full((spec.vn_count, dv), -1, dtype=np.int32)
    for u in range(spec.cn_positions):
        i_lo = max(0, u - dv + 1)
        i_hi = min(L - 1, u)
        n_contrib = i_hi - i_lo + 1
        sockets = rng.permutation(M * dc)[: n_contrib * N]
        cn_index = (sockets // dc).astype(np.int32)
        base = np.int32(u * M)
        for k, i in enumerate(range(i_lo, i_hi + 1)):
            vn_cns[i * N : (i + 1) * N, u - i] = base + cn_index[k * N : (k + 1) * N]
    return TannerGraph(spec=spec, vn_cns=vn_cns)


def dump_graph(graph: TannerGraph, path_or_file) -> None:
    """Plain-text edge list, one line per edge: vn_pos vn_idx cn_pos cn_idx.

    All indices are 0-based. Debug and oracle cross-check format only.
    """
    spec = graph.spec
    close = False
    if isinstance(path_or_file, (str, bytes)):
        fh = open(path_or_file, "w")
        close = True
    else:
        fh = path_or_file
    try:
        fh.write(
            f"# dv={spec.dv} dc={spec.dc} L={spec.L} N={spec.N} "
            f"termination={spec.termination.value}\n"
        )
        N, M = spec.N, spec.M
        for v in range(graph.vn_count):
            for j in range(spec.dv):
                c = graph.vn_cns[v, j]
                if c < 0:
                    continue
                fh.write(f"{v // N} {v % N} {c // M} {c % M}\n")
    finally:
        if close:
            fh.close()


def dumps_graph(graph: TannerGraph) -> str:
    buf = io.StringIO()
    dump_graph(graph, buf)
    return buf.getvalue()
