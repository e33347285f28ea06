"""Density evolution for the coupled chain and the uncoupled base code.

Messages are tracked per (VN position, edge offset): x[i, k] is the
erasure probability of the message a position-i VN sends along its
k-th edge (toward CN position i+k). A CN position averages its
incoming sockets; sockets left unfilled by the construction (chain
boundaries, dropped edges) carry known values and enter the average
as zeros. This socket-level accounting is what the sampler in
`ensemble` realizes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import Termination
from .errors import DegenerateChain, ValidationError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 100_000


@dataclass
class DEProfile:
    dv: int
    dc: int
    L: int
    termination: Termination
    eps: float
    x: np.ndarray          # per-VN-position marginal erasure probability
    edge_x: np.ndarray     # (L, dv) per-edge messages; dropped edges stay 0
    y: np.ndarray          # per-CN-position average incoming erasure
    iterations: int
    converged: bool
    tol: float = DEFAULT_TOL
    history: np.ndarray | None = None  # per-iteration marginals if recorded

    @property
    def interior_converged(self) -> bool:
        """Convergence left of the truncated chain's boundary layer.

        A truncated chain strands its reduced-degree right tail at a
        nonzero fixed point for any eps above the uncoupled threshold,
        and that tail back-feeds a geometrically decaying erasure floor
        into the neighboring full-degree positions. The floor stays
        above any practical tol within roughly 2*dv positions of the
        tail (wider as eps approaches the wave threshold), so the
        verdict reads only positions left of a 2*dv buffer: either the
        decoding wave cleared them all or it died and left them at a
        macroscopic value.
        """
        if self.termination is Termination.TERMINATED:
            return bool(self.x.max() < self.tol)
        cut = self.L - 3 * self.dv + 1
        if cut < 1:
            raise DegenerateChain(
                f"truncated chain L={self.L} too short for an interior "
                f"wave verdict with dv={self.dv} (needs L >= 3*dv)")
        return bool(self.x[:cut].max() < self.tol)


def _vn_degrees(dv: int, L: int, termination: Termination) -> np.ndarray:
    if termination is Termination.TERMINATED:
        return np.full(L, dv)
    return np.minimum(dv, L - np.arange(L))


def de_step(edge_x: np.ndarray, eps: float, dv: int, dc: int, L: int,
            termination: Termination) -> tuple[np.ndarray, np.ndarray]:
    """One flooding update; returns (new edge messages, CN-side averages)."""
    n_cn_pos = L + dv - 1 if termination is Termination.TERMINATED else L
    y = np.zeros(n_cn_pos)
    for j in range(dv):
        # VN position i feeds CN position i + j along edge j
        y[j:j + L] += edge_x[:, j][: n_cn_pos - j]
    y /= dv
    with np.errstate(divide="ignore"):
        q = -np.expm1((dc - 1) * np.log1p(-np.minimum(y, 1.0)))

    deg = _vn_degrees(dv, L, termination)
    w = np.ones((L, dv))
    for j in range(dv):
        rows = deg > j
        w[rows, j] = q[np.arange(L)[rows] + j]
    # leave-one-out products over the dv-wide window of q values
    prefix = np.ones((L, dv))
    suffix = np.ones((L, dv))
    prefix[:, 1:] = np.cumprod(w[:, :-1], axis=1)
    suffix[:, :-1] = np.cumprod(w[:, :0:-1], axis=1)[:, ::-1]
    new_x = eps * prefix * suffix
    new_x[np.arange(dv)[None, :] >= deg[:, None]] = 0.0
    return new_x, y


def coupled_de(dv: int, dc: int, L: int, eps: float,
               max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL,
               termination=Termination.TERMINATED,
               record_history: bool = False) -> DEProfile:
    """Iterate the coupled recursion from the all-eps start.

    Stops when every message falls below tol (converged), when the
    largest per-iteration change falls below tol (stalled at a nonzero
    fixed point), or at max_iters. Non-convergence is reported in the
    returned profile, never raised.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValidationError(f"eps={eps} outside [0, 1]")
    termination = Termination(termination)
    deg = _vn_degrees(dv, L, termination)
    edge_x = np.where(np.arange(dv)[None, :] < deg[:, None], eps, 0.0)
    history = [] if record_history else None

    iterations = 0
    converged = False
    y = np.zeros(L + dv - 1 if termination is Termination.TERMINATED else L)
    for iterations in range(1, max_iters + 1):
        new_x, y = de_step(edge_x, eps, dv, dc, L, termination)
        delta = np.abs(new_x - edge_x).max()
        edge_x = new_x
        if record_history:
            history.append(edge_x.sum(axis=1) / deg)
        if edge_x.max() < tol:
            converged = True
            break
        if delta < tol:
            break

    marginal = edge_x.sum(axis=1) / deg
    return DEProfile(
        dv=dv, dc=dc, L=L, termination=termination, eps=eps,
        x=marginal, edge_x=edge_x, y=y, iterations=iterations,
        converged=converged, tol=tol,
        history=np.array(history) if record_history else None,
    )


def coupled_threshold(dv: int, dc: int, L: int, tol_eps: float = 2e-5,
                      tol_de: float = DEFAULT_TOL,
                      termination=Termination.TERMINATED,
                      max_iters: int = DEFAULT_MAX_ITERS) -> float:
    """BP threshold of the coupled chain by bisection on eps.

    Search interval: [uncoupled threshold, rate-based capacity bound].
    The coupled threshold always lies strictly inside for the regular
    ensembles handled here.
    """
    if tol_eps <= 0:
        raise ValidationError(f"tol_eps={tol_eps} must be positive")
    termination = Termination(termination)
    lo = uncoupled_threshold(dv, dc)
    n_cn_pos = L + dv - 1 if termination is Termination.TERMINATED else L
    hi = min(1.0, (dv / dc) * n_cn_pos / L)
    full_chain = termination is Termination.TERMINATED
    while hi - lo > tol_eps:
        mid = 0.5 * (lo + hi)
        prof = coupled_de(dv, dc, L, mid, max_iters=max_iters, tol=tol_de,
                          termination=termination)
        if prof.converged if full_chain else prof.interior_converged:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FixedPoint:
    eps: float
    x_bar: float   # VN-to-CN erasure probability at the fixed point
    q_bar: float   # CN-to-VN erasure probability, 1 - (1 - x_bar)^(dc-1)
    iterations: int


def uncoupled_fixed_point(dv: int, dc: int, eps: float, tol: float = 1e-12,
                          max_iters: int = 1_000_000) -> FixedPoint:
    """Fixed point of x = eps * (1 - (1-x)^(dc-1))^(dv-1), started at eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValidationError(f"eps={eps} outside [0, 1]")
    if eps == 1.0:  # log1p(-1) warns; the all-erased point is exact
        return FixedPoint(eps=1.0, x_bar=1.0, q_bar=1.0, iterations=0)
    x = eps
    it = 0
    for it in range(1, max_iters + 1):
        q = -np.expm1((dc - 1) * np.log1p(-x))
        new_x = eps * q ** (dv - 1)
        if abs(new_x - x) < tol:
            x = new_x
            break
        x = new_x
    q = float(-np.expm1((dc - 1) * np.log1p(-x)))
    return FixedPoint(eps=eps, x_bar=float(x), q_bar=q, iterations=it)


def uncoupled_threshold(dv: int, dc: int, tol: float = 1e-10) -> float:
    """BP threshold of the uncoupled (dv, dc) ensemble by bisection."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fp = uncoupled_fixed_point(dv, dc, mid, tol=1e-13)
        if fp.x_bar < 1e-6:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def alpha_lower_bound(dv: int, dc: int, L: int, eps_star: float) -> float:
    """Chain-normalized erased mass the uncoupled decoder clears.

    Evaluates the uncoupled fixed point at eps_star; an erased VN stays
    stuck with probability q_bar^dv (all incoming messages erased), so
    the recovered fraction per position is eps_star * (1 - q_bar^dv).
    Diagnostic bound only; predictions use Monte-Carlo trajectories.
    """
    fp = uncoupled_fixed_point(dv, dc, eps_star)
    return L * eps_star * (1.0 - fp.q_bar ** dv)
