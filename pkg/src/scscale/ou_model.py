"""Mean-reverting diffusion surrogate for the steady-state r1 process.

The degree-one fraction fluctuates around gamma*(eps_star - eps) with
stationary variance nu/N and exponentially decaying autocovariance;
its first passage of zero is what the exponential / Erlang laws
approximate. This module simulates that surrogate directly so the
approximations can be checked against something with no decoding in
the loop.

Paths follow Euler-Maruyama, dX = -theta*(X - m) dt + sigma dW with
sigma^2 = 2*theta*s2. The update is a first-order linear recurrence,
so whole blocks of steps are evaluated with one IIR filter call per
block over the still-active paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr, ndtri

from .errors import ExcessiveCensoring, ValidationError
from .rng import as_generator
from .scaling_law import (Mu0, first_hit_cdf_erlang, first_hit_cdf_exponential,
                          mu0_from_w)

_BLOCK = 2048
MAX_CENSORED_FRACTION = 1e-3

VARIANT_SINGLE = "single"
VARIANT_SUM_OF_HITS = "sum_of_hits"
VARIANT_SUM_PROCESS = "sum_process"
TWO_WAVE_VARIANTS = (VARIANT_SUM_OF_HITS, VARIANT_SUM_PROCESS)


@dataclass(frozen=True)
class OUParams:
    m: float        # stationary mean, gamma * (eps_star - eps)
    theta: float    # relaxation rate
    s2: float       # stationary variance, nu / N
    alpha: float    # start of the steady-state window
    dt: float
    tau_max: float

    def __post_init__(self) -> None:
        if self.m <= 0 or self.theta <= 0 or self.s2 <= 0:
            raise ValidationError(
                f"m={self.m}, theta={self.theta}, s2={self.s2} must be positive")
        if self.dt <= 0 or self.dt > 0.01 / self.theta * (1 + 1e-9):
            raise ValidationError(
                f"dt={self.dt} violates 0 < dt <= 0.01/theta = {0.01 / self.theta}")
        if self.tau_max <= self.alpha:
            raise ValidationError(
                f"tau_max={self.tau_max} must exceed alpha={self.alpha}")

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0 * self.theta * self.s2)

    @property
    def noise_ratio(self) -> float:
        """m/s, which equals the w argument of the mu0 integral."""
        return self.m / math.sqrt(self.s2)

    def mu0(self) -> Mu0:
        return mu0_from_w(self.noise_ratio, self.theta)

    @classmethod
    def from_scaling(cls, gamma: float, nu: float, theta: float, N: int,
                     eps: float, eps_star: float, alpha: float = 0.0,
                     dt: float | None = None,
                     tau_max: float | None = None) -> "OUParams":
        m = gamma * (eps_star - eps)
        s2 = nu / N
        if dt is None:
            dt = 0.01 / theta
        if tau_max is None:
            ref = mu0_from_w(m / math.sqrt(s2), theta)
            if not math.isfinite(ref.value):
                raise ValidationError(
                    "mu0 exceeds double range; pass tau_max explicitly")
            tau_max = alpha + 12.0 * max(ref.value, 1.0 / theta)
        return cls(m=m, theta=theta, s2=s2, alpha=alpha, dt=dt, tau_max=tau_max)


@dataclass
class OUSamples:
    variant: str
    params: OUParams
    tau0: np.ndarray
    censored: np.ndarray

    @property
    def n(self) -> int:
        return int(self.tau0.size)

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean())

    def uncensored(self) -> np.ndarray:
        return self.tau0[~self.censored]

    def model_mu0(self) -> Mu0:
        """Scale of this variant's own exponential hit-time model.

        The summed process is itself mean-reverting with noise ratio
        sqrt(2) * m/s, so its hits are exponentially rarer than the
        single wave's; the other variants share the single-wave scale.
        """
        if self.variant == VARIANT_SUM_PROCESS:
            return mu0_from_w(math.sqrt(2.0) * self.params.noise_ratio,
                              self.params.theta)
        return self.params.mu0()


def _truncated_positive_start(m: float, s: float, u: np.ndarray) -> np.ndarray:
    # stationary draw conditioned positive: invert the CDF on [Phi(-m/s), 1]
    return m + s * ndtri(ndtr(-m / s) + u * ndtr(m / s))


def _first_hits(m: float, theta: float, s2: float, alpha: float, dt: float,
                tau_max: float, x0: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    n = x0.size
    a = 1.0 - theta * dt
    c = math.sqrt(2.0 * theta * s2 * dt)
    max_steps = int(math.ceil((tau_max - alpha) / dt))
    tau0 = np.full(n, tau_max)
    censored = np.ones(n, dtype=bool)
    idx = np.arange(n)
    zi = (a * (x0 - m))[:, None]
    done = 0
    while idx.size and done < max_steps:
        k = min(_BLOCK, max_steps - done)
        z = rng.standard_normal((idx.size, k))
        dev, zf = lfilter([c], [1.0, -a], z, axis=1, zi=zi)
        hit = dev <= -m
        any_hit = hit.any(axis=1)
        rows = np.flatnonzero(any_hit)
        if rows.size:
            first = hit[rows].argmax(axis=1)
            tau0[idx[rows]] = alpha + (done + first + 1) * dt
            censored[idx[rows]] = False
        keep = ~any_hit
        idx = idx[keep]
        zi = zf[keep]
        done += k
    return tau0, censored


def ou_first_hit(params: OUParams, samples: int, seed) -> OUSamples:
    """First hits of zero for the single-wave surrogate."""
    if samples < 1:
        raise ValidationError(f"samples={samples} must be >= 1")
    rng = as_generator(seed)
    s = math.sqrt(params.s2)
    x0 = _truncated_positive_start(params.m, s, rng.random(samples))
    tau0, cens = _first_hits(params.m, params.theta, params.s2, params.alpha,
                             params.dt, params.tau_max, x0, rng)
    return OUSamples(VARIANT_SINGLE, params, tau0, cens)


def two_wave_first_hit(params: OUParams, samples: int, seed,
                       variant: str = VARIANT_SUM_OF_HITS) -> OUSamples:
    """Composite two-wave surrogate, in either of two readings.

    sum_of_hits: tau0 = alpha + (T1 - alpha) + (T2 - alpha) for two
    independent single-wave hits; the convolution the Erlang formula
    integrates. sum_process: first hit of zero by the literal sum of
    two independent waves (an OU process with mean 2m and variance
    2*s2, started from the sum of two positive stationary draws).
    """
    if samples < 1:
        raise ValidationError(f"samples={samples} must be >= 1")
    if variant not in TWO_WAVE_VARIANTS:
        raise ValidationError(f"variant={variant!r} not in {TWO_WAVE_VARIANTS}")
    rng = as_generator(seed)
    s = math.sqrt(params.s2)
    if variant == VARIANT_SUM_OF_HITS:
        x0a = _truncated_positive_start(params.m, s, rng.random(samples))
        t1, c1 = _first_hits(params.m, params.theta, params.s2, params.alpha,
                             params.dt, params.tau_max, x0a, rng)
        x0b = _truncated_positive_start(params.m, s, rng.random(samples))
        t2, c2 = _first_hits(params.m, params.theta, params.s2, params.alpha,
                             params.dt, params.tau_max, x0b, rng)
        tau0 = params.alpha + (t1 - params.alpha) + (t2 - params.alpha)
        cens = c1 | c2
        return OUSamples(VARIANT_SUM_OF_HITS, params, tau0, cens)
    x0 = (_truncated_positive_start(params.m, s, rng.random(samples))
          + _truncated_positive_start(params.m, s, rng.random(samples)))
    # the summed process hits zero far more rarely (its noise ratio is
    # sqrt(2) times the single wave's), so the horizon must stretch
    ref = mu0_from_w(math.sqrt(2.0) * params.noise_ratio, params.theta)
    if not math.isfinite(ref.value):
        raise ValidationError(
            "sum-process horizon exceeds double range; reduce the noise ratio")
    eff = replace(params, tau_max=max(params.tau_max,
                                      params.alpha + 12.0 * ref.value))
    tau0, cens = _first_hits(2.0 * params.m, params.theta, 2.0 * params.s2,
                             eff.alpha, eff.dt, eff.tau_max, x0, rng)
    return OUSamples(VARIANT_SUM_PROCESS, eff, tau0, cens)


def ou_path(params: OUParams, steps: int, seed) -> np.ndarray:
    """One unabsorbed path of `steps` increments from a stationary start
    (no positivity conditioning); used for stationarity diagnostics."""
    rng = as_generator(seed)
    a = 1.0 - params.theta * params.dt
    c = math.sqrt(2.0 * params.theta * params.s2 * params.dt)
    x0 = params.m + math.sqrt(params.s2) * rng.standard_normal()
    z = rng.standard_normal(steps)
    dev, _ = lfilter([c], [1.0, -a], z, zi=np.array([a * (x0 - params.m)]))
    return np.concatenate(([x0], dev + params.m))


def ks_statistic(samples, cdf) -> float:
    """Sup distance between the empirical CDF of `samples` and `cdf`."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < 100:
        raise ValidationError(f"need >= 100 samples for a KS fit, got {x.size}")
    f = np.asarray(cdf(x), dtype=float)
    grid = np.arange(1, x.size + 1) / x.size
    return float(np.maximum(np.abs(f - grid), np.abs(f - grid + 1.0 / x.size)).max())


def fit_report(samples: OUSamples, alpha: float | None = None,
               mu0_like=None) -> dict:
    """KS distances of an OU sample set against both candidate laws.

    Aborts when the censored fraction reaches the shipping bound; a
    truncated sample set would bias every comparison silently.
    """
    frac = samples.censored_fraction
    if frac >= MAX_CENSORED_FRACTION:
        raise ExcessiveCensoring(
            f"censored fraction {frac:.2e} >= {MAX_CENSORED_FRACTION:.0e}; "
            f"raise tau_max (currently {samples.params.tau_max})")
    if alpha is None:
        alpha = samples.params.alpha
    m = samples.model_mu0() if mu0_like is None else mu0_like
    data = samples.uncensored()
    return {
        "variant": samples.variant,
        "n": int(data.size),
        "censored_fraction": frac,
        "ks_vs_exponential": ks_statistic(
            data, lambda x: first_hit_cdf_exponential(x, alpha, m)),
        "ks_vs_erlang": ks_statistic(
            data, lambda x: first_hit_cdf_erlang(x, alpha, m)),
    }


def dump_ou_samples(sample_sets, path: str) -> None:
    """CSV dump: variant,tau0,censored (one row per path)."""
    if isinstance(sample_sets, OUSamples):
        sample_sets = [sample_sets]
    with open(path, "w") as fh:
        fh.write("# scsale-v1\n")
        fh.write("variant,tau0,censored\n")
        for ss in sample_sets:
            for i in range(ss.n):
                fh.write(f"{ss.variant},{float(ss.tau0[i])!r},{int(ss.censored[i])}\n")


def refine_dt(params: OUParams, factor: float = 0.5) -> OUParams:
    return replace(params, dt=params.dt * factor)


def coupled_refinement_ks(params: OUParams, samples: int, seed) -> float:
    """KS distance between first-hit CDFs at dt and dt/2, measured on a
    shared Brownian motion.

    Both resolutions consume the same fine-grid increments (the coarse
    grid sums adjacent pairs), so the distance isolates the
    discretization shift instead of drowning it in two independent
    Monte-Carlo noise floors of ~1.36*sqrt(2/n).
    """
    if samples < 100:
        raise ValidationError(f"samples={samples} must be >= 100")
    rng = as_generator(seed)
    m, theta, s2, alpha = params.m, params.theta, params.s2, params.alpha
    dt_c = params.dt
    dt_f = 0.5 * dt_c
    a_c = 1.0 - theta * dt_c
    a_f = 1.0 - theta * dt_f
    c_c = math.sqrt(2.0 * theta * s2 * dt_c)
    c_f = math.sqrt(2.0 * theta * s2 * dt_f)
    max_fine = int(math.ceil((params.tau_max - alpha) / dt_f))
    if max_fine % 2:
        max_fine += 1
    x0 = _truncated_positive_start(m, math.sqrt(s2), rng.random(samples))

    tau = np.full((2, samples), params.tau_max)
    open_mask = np.ones((2, samples), dtype=bool)  # [coarse, fine]
    idx = np.arange(samples)
    zi_c = (a_c * (x0 - m))[:, None]
    zi_f = (a_f * (x0 - m))[:, None]
    done = 0
    while idx.size and done < max_fine:
        k = min(_BLOCK, max_fine - done)  # _BLOCK is even
        zf_draw = rng.standard_normal((idx.size, k))
        zc_draw = (zf_draw[:, 0::2] + zf_draw[:, 1::2]) / math.sqrt(2.0)
        for which, (draw, a, c, zi, dt, off) in enumerate((
                (zc_draw, a_c, c_c, zi_c, dt_c, done // 2),
                (zf_draw, a_f, c_f, zi_f, dt_f, done))):
            dev, zf_state = lfilter([c], [1.0, -a], draw, axis=1, zi=zi)
            if which == 0:
                zi_c = zf_state
            else:
                zi_f = zf_state
            hit = dev <= -m
            rows = np.flatnonzero(hit.any(axis=1) & open_mask[which, idx])
            if rows.size:
                first = hit[rows].argmax(axis=1)
                tau[which, idx[rows]] = alpha + (off + first + 1) * dt
                open_mask[which, idx[rows]] = False
        keep = open_mask[:, idx].any(axis=0)
        idx = idx[keep]
        zi_c = zi_c[keep]
        zi_f = zi_f[keep]
        done += k

    both = ~open_mask.any(axis=0)
    if both.sum() < 100:
        raise ValidationError("too few paths hit at both resolutions")
    xc = np.sort(tau[0, both])
    xf = np.sort(tau[1, both])
    grid = np.concatenate([xc, xf])
    ec = np.searchsorted(xc, grid, "right") / xc.size
    ef = np.searchsorted(xf, grid, "right") / xf.size
    return float(np.abs(ec - ef).max())
