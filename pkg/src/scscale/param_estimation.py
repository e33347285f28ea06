"""Monte-Carlo estimation of the scaling constants.

The window parameters (alpha, beta) and plateau constant gamma come
from mean degree-one trajectories; the variance and correlation-decay
constants (nu, theta) come from steady-state fluctuations of r1 around
the plateau. Everything is estimated from seeded peeling runs; results
are deterministic functions of (spec, eps, trials, seed).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleSpec, Termination, validate_spec
from .errors import (NonPositiveGap, NoPlateau, TooManyFailures,
                     ValidationError, WindowTooShort)
from .peeling import (debris_threshold, default_stride, resolve_workers,
                      run_single_trial, wave_died)
from .rng import derive_seed
from .scaling_law import ScalingParameters, TableEntry

MAX_FAILURE_FRACTION = 1e-2
PLATEAU_DELTA = 0.05
MIN_WINDOW_FRACTION = 0.20


def default_eps_grid(eps_star: float, points: int = 5, lo_gap: float = 0.03,
                     hi_gap: float = 0.005) -> list[float]:
    """Evenly spaced estimation knots below the threshold."""
    if points < 1:
        raise ValidationError(f"points={points} must be >= 1")
    if not 0.0 < hi_gap < lo_gap:
        raise ValidationError(f"need 0 < hi_gap < lo_gap, got {hi_gap}, {lo_gap}")
    return [float(e) for e in
            np.linspace(eps_star - lo_gap, eps_star - hi_gap, points)]


@dataclass
class MeanTrajectory:
    spec: EnsembleSpec
    eps: float
    tau: np.ndarray
    r1_mean: np.ndarray
    r1_var: np.ndarray       # across-trial variance, ddof=1
    trials: int              # total trials run
    successes: int           # trials entering the average
    failure_fraction: float
    stride: int


@dataclass
class FluctuationStats:
    spec: EnsembleSpec
    eps: float
    window: tuple[float, float]          # steady-state [tau_a, tau_b]
    central_window: tuple[float, float]  # inner 60% actually used
    nu: float
    theta: float
    se_nu: float
    se_theta: float
    r_squared: float
    fit_ok: bool                         # r_squared >= 0.95
    lags: np.ndarray
    autocov: np.ndarray
    fit_mask: np.ndarray
    tau: np.ndarray
    v_hat: np.ndarray                    # per-grid-point variance, full trace
    trials: int
    successes: int


def _trial_succeeded(spec: EnsembleSpec, trace) -> bool:
    # trajectory averaging keeps every trial whose decoding wave ran to
    # completion: a truncated chain always strands its right tail, and
    # small stopping-set debris (below debris_threshold) perturbs the
    # degree-one pool by a few bits without truncating the path
    if spec.termination is Termination.TRUNCATED:
        return not wave_died(trace)
    return trace.residual_count < debris_threshold(spec)


def _collect_traces(spec: EnsembleSpec, eps: float, trials: int, seed: int,
                    workers: int | None, stride: int | None):
    """Per-trial r1 records on the shared stride grid.

    Returns (stride, rows, success flags): rows[t] holds trial t's r1
    at iteration counts 0, stride, 2*stride, ... (float32).
    """
    spec = validate_spec(spec)
    if trials < 1:
        raise ValidationError(f"trials={trials} must be >= 1")
    use_stride = stride if stride is not None else default_stride(spec.N)
    n_workers = resolve_workers(workers)
    rows: list = [None] * trials
    succ = np.zeros(trials, dtype=bool)

    def one(t: int) -> None:
        _, trace, _ = run_single_trial(spec, eps, seed, t, stride=use_stride,
                                       classify=False)
        # drop the final off-grid record unless it fell on the grid
        m = trace.ell.size
        if m > 1 and trace.ell[m - 1] % use_stride != 0:
            m -= 1
        rows[t] = trace.r1[:m].astype(np.float32)
        succ[t] = _trial_succeeded(spec, trace)

    if n_workers == 1:
        for t in range(trials):
            one(t)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(one, range(trials)))
    return use_stride, rows, succ


def mean_trajectory(spec: EnsembleSpec, eps: float, trials: int, seed: int,
                    workers: int | None = None, stride: int | None = None,
                    max_failure_fraction: float = MAX_FAILURE_FRACTION
                    ) -> MeanTrajectory:
    """Average r1(tau) over successful trials on a common grid.

    Aborts when the failure fraction exceeds the guard: failed trials
    truncate early and conditioning on success would then no longer
    track the typical trajectory.
    """
    use_stride, rows, succ = _collect_traces(spec, eps, trials, seed,
                                             workers, stride)
    failure_fraction = 1.0 - succ.sum() / trials
    if failure_fraction > max_failure_fraction:
        raise TooManyFailures(
            f"failure fraction {failure_fraction:.3g} exceeds "
            f"{max_failure_fraction:.3g} at eps={eps} "
            f"({spec.termination.value}, N={spec.N})")
    kept = [rows[t] for t in range(trials) if succ[t]]
    n = len(kept)
    K = max(r.size for r in kept)
    acc = np.zeros(K)
    acc2 = np.zeros(K)
    for r in kept:
        acc[: r.size] += r
        acc2[: r.size] += r.astype(np.float64) ** 2
    mean = acc / n
    var = (acc2 / n - mean ** 2) * (n / (n - 1)) if n > 1 else np.zeros(K)
    tau = np.arange(K) * (use_stride / spec.N)
    return MeanTrajectory(
        spec=spec, eps=eps, tau=tau, r1_mean=mean,
        r1_var=np.maximum(var, 0.0), trials=trials, successes=n,
        failure_fraction=failure_fraction, stride=use_stride,
    )


def _plateau_window(tau: np.ndarray, r1: np.ndarray, delta: float
                    ) -> tuple[int, int, float]:
    """Self-consistent plateau: longest contiguous run within a relative
    delta-band of its own median. Returns (first index, last index, level)."""
    alive = np.flatnonzero(r1 > 0)
    if alive.size < 3:
        raise NoPlateau("trajectory has no positive segment")
    span = slice(alive[0], alive[-1] + 1)
    sub = r1[span]
    # seed with the median of the middle half of the decoding span
    q = sub.size // 4
    level = float(np.median(sub[q: sub.size - q or None]))
    window = (-1, -1)
    for _ in range(100):
        if level <= 0:
            raise NoPlateau("plateau level collapsed to zero")
        mask = np.abs(sub - level) <= delta * level
        best_len, best = 0, (-1, -1)
        i = 0
        while i < mask.size:
            if mask[i]:
                j = i
                while j + 1 < mask.size and mask[j + 1]:
                    j += 1
                if j - i + 1 > best_len:
                    best_len, best = j - i + 1, (i, j)
                i = j + 1
            else:
                i += 1
        if best_len == 0:
            raise NoPlateau(f"no contiguous region within {delta:.3g} of level")
        if best == window:
            break
        window = best
        level = float(np.median(sub[best[0]: best[1] + 1]))
    lo, hi = window[0] + alive[0], window[1] + alive[0]
    return lo, hi, level


def extract_window_params(traj: MeanTrajectory, eps: float, eps_star: float,
                          delta: float = PLATEAU_DELTA
                          ) -> tuple[float, float, float]:
    """(alpha, beta, gamma) from a mean trajectory's plateau."""
    if eps >= eps_star:
        raise NonPositiveGap(f"eps={eps} is not below eps_star={eps_star}")
    lo, hi, level = _plateau_window(traj.tau, traj.r1_mean, delta)
    span = traj.tau[-1] - traj.tau[0]
    if traj.tau[hi] - traj.tau[lo] < MIN_WINDOW_FRACTION * span:
        raise NoPlateau(
            f"plateau covers {(traj.tau[hi] - traj.tau[lo]) / span:.2%} of the "
            f"decoding span, below {MIN_WINDOW_FRACTION:.0%}")
    alpha = float(traj.tau[lo])
    beta = float(traj.tau[hi])
    gamma = level / (eps_star - eps)
    return alpha, beta, gamma


def _theta_fit(lags: np.ndarray, autocov: np.ndarray, mask: np.ndarray
               ) -> tuple[float, float]:
    """(-slope, R^2) of the LS line through (lag, ln autocov) on mask."""
    x = lags[mask]
    y = np.log(autocov[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return -slope, r2


def estimate_nu_theta(spec: EnsembleSpec, eps: float, trials: int, seed: int,
                      workers: int | None = None, stride: int | None = None,
                      n_refs: int = 25, n_lags: int = 60, n_boot: int = 200,
                      delta: float = PLATEAU_DELTA,
                      max_failure_fraction: float = MAX_FAILURE_FRACTION
                      ) -> FluctuationStats:
    """Fluctuation constants from steady-state r1 statistics.

    nu-hat = N * mean over the central 60% of the plateau of the
    across-trial variance of r1(tau). theta-hat = decay rate of the
    mean autocovariance over 25 reference times, fitted on lags where
    the autocovariance stays within [0.1, 1] of its lag-0 value.
    Standard errors come from a trial-level bootstrap with the window,
    reference times, and fitted lag set held fixed.
    """
    spec = validate_spec(spec)
    if spec.termination is not Termination.TRUNCATED:
        raise ValidationError(
            "fluctuation constants are defined on the truncated (single-wave) "
            "ensemble; got terminated")
    use_stride, rows, succ = _collect_traces(spec, eps, trials, seed,
                                             workers, stride)
    failure_fraction = 1.0 - succ.sum() / trials
    if failure_fraction > max_failure_fraction:
        raise TooManyFailures(
            f"failure fraction {failure_fraction:.3g} exceeds "
            f"{max_failure_fraction:.3g} at eps={eps}")
    kept = [rows[t] for t in range(trials) if succ[t]]
    n = len(kept)
    if n < 3:
        raise WindowTooShort(f"only {n} successful trials")
    K = max(r.size for r in kept)
    R = np.zeros((n, K), dtype=np.float32)
    for i, r in enumerate(kept):
        R[i, : r.size] = r
    h = use_stride / spec.N
    tau = np.arange(K) * h

    mean = R.mean(axis=0, dtype=np.float64)
    v_hat = R.var(axis=0, dtype=np.float64, ddof=1)

    lo, hi, _ = _plateau_window(tau, mean, delta)
    tau_a, tau_b = tau[lo], tau[hi]
    width = tau_b - tau_a
    c_lo, c_hi = tau_a + 0.2 * width, tau_b - 0.2 * width
    i_lo, i_hi = int(np.searchsorted(tau, c_lo)), int(np.searchsorted(tau, c_hi, "right")) - 1
    if i_hi - i_lo < 10:
        raise WindowTooShort("central steady-state window has <10 grid points")
    nu = spec.N * float(v_hat[i_lo: i_hi + 1].mean())

    ref_idx = np.unique(np.linspace(i_lo, i_hi, n_refs).round().astype(int))
    # candidate lags: bounded by a quarter window and by staying inside
    # both the trace and the plateau for every reference time
    max_lag = min(width / 4.0, tau_b - tau[ref_idx[-1]], tau[-1] - tau[ref_idx[-1]])
    lag_idx = np.unique(np.linspace(0, max(1, int(round(max_lag / h))), n_lags)
                        .round().astype(int))
    X = R[:, ref_idx].astype(np.float64)           # n x refs
    xm = X.mean(axis=0)
    autocov = np.empty(lag_idx.size)
    for j, l in enumerate(lag_idx):
        Y = R[:, ref_idx + l].astype(np.float64)
        cov = ((X * Y).mean(axis=0) - xm * Y.mean(axis=0)) * (n / (n - 1))
        autocov[j] = cov.mean()
    lags = lag_idx * h

    if autocov[0] <= 0:
        raise WindowTooShort("steady-state variance estimate is nonpositive")
    ratio = autocov / autocov[0]
    rough = (autocov > 0) & (ratio >= 0.1)
    if rough.sum() < 3:
        raise WindowTooShort("autocovariance decays too fast for a rough fit")
    theta_rough, _ = _theta_fit(lags, autocov, rough)
    lag_cap = min(3.0 / theta_rough, max_lag) if theta_rough > 0 else max_lag
    mask = (autocov > 0) & (ratio >= 0.1) & (ratio <= 1.0 + 1e-12) & (lags <= lag_cap)
    if mask.sum() < 10:
        raise WindowTooShort(f"only {int(mask.sum())} usable autocovariance lags")
    theta, r_squared = _theta_fit(lags, autocov, mask)

    se_nu, se_theta = _bootstrap_se(R, ref_idx, lag_idx, lags, mask,
                                    (i_lo, i_hi), spec.N, n_boot,
                                    derive_seed(seed, "bootstrap"))
    return FluctuationStats(
        spec=spec, eps=eps, window=(float(tau_a), float(tau_b)),
        central_window=(float(tau[i_lo]), float(tau[i_hi])),
        nu=nu, theta=theta, se_nu=se_nu, se_theta=se_theta,
        r_squared=r_squared, fit_ok=bool(r_squared >= 0.95),
        lags=lags, autocov=autocov, fit_mask=mask, tau=tau, v_hat=v_hat,
        trials=trials, successes=n,
    )


def _bootstrap_se(R, ref_idx, lag_idx, lags, mask, window_idx, N, n_boot, seed):
    """Trial-level bootstrap of (nu-hat, theta-hat) via weight matrices."""
    n = R.shape[0]
    rng = np.random.default_rng(seed)
    W = rng.multinomial(n, np.full(n, 1.0 / n), size=n_boot) / n   # B x n
    i_lo, i_hi = window_idx
    cols = np.ascontiguousarray(R[:, i_lo: i_hi + 1], dtype=np.float64)
    m1 = W @ cols
    m2 = W @ (cols ** 2)
    nu_b = N * ((m2 - m1 ** 2) * (n / (n - 1))).mean(axis=1)

    fit_lags = lag_idx[mask]
    X = R[:, ref_idx].astype(np.float64)
    prods = np.empty((n, fit_lags.size, ref_idx.size))
    ys = np.empty_like(prods)
    for j, l in enumerate(fit_lags):
        Y = R[:, ref_idx + l].astype(np.float64)
        prods[:, j, :] = X * Y
        ys[:, j, :] = Y
    flat = prods.reshape(n, -1)
    yflat = ys.reshape(n, -1)
    e_xy = (W @ flat).reshape(n_boot, fit_lags.size, ref_idx.size)
    e_y = (W @ yflat).reshape(n_boot, fit_lags.size, ref_idx.size)
    e_x = (W @ X)[:, None, :]
    cov_b = ((e_xy - e_x * e_y) * (n / (n - 1))).mean(axis=2)  # B x lags

    x = lags[mask]
    theta_b = np.full(n_boot, np.nan)
    ok = (cov_b > 0).all(axis=1)
    if ok.any():
        ylog = np.log(cov_b[ok])
        xc = x - x.mean()
        slope = (ylog @ xc) / (xc @ xc)
        theta_b[ok] = -slope
    se_nu = float(np.std(nu_b, ddof=1))
    good = theta_b[np.isfinite(theta_b)]
    se_theta = float(np.std(good, ddof=1)) if good.size > 1 else math.nan
    return se_nu, se_theta


def measure_table_knots(spec: EnsembleSpec, eps_grid, trials: int, seed: int,
                        eps_star: float, workers: int | None = None,
                        stride: int | None = None,
                        delta: float = PLATEAU_DELTA,
                        fill: str = "extrapolate",
                        audit_dir: str | None = None) -> list[TableEntry]:
    """Window parameters per grid point: (alpha, beta, gamma) knots.

    Per knot: (alpha, beta) from the terminated mean trajectory and
    gamma from the truncated one. Knots whose failure fraction trips
    the estimation guard (the grid may reach eps values where failures
    dominate at any feasible N) are filled by a least-squares line
    through the measured knots when fill="extrapolate", or re-raise
    when fill="error"; filled knots are marked and clipped into
    0 <= alpha < beta <= eps*L.
    """
    if fill not in ("extrapolate", "error"):
        raise ValidationError(f"fill={fill!r} not in ('extrapolate', 'error')")
    eps_grid = sorted(float(e) for e in eps_grid)
    if not eps_grid:
        raise ValidationError("eps grid is empty")
    if eps_grid[-1] >= eps_star:
        raise NonPositiveGap(
            f"grid point {eps_grid[-1]} is not below eps_star={eps_star}")
    spec = validate_spec(spec)

    measured: dict[float, tuple[float, float, float]] = {}
    missing: list[float] = []
    for i, eps in enumerate(eps_grid):
        try:
            term = mean_trajectory(
                spec.with_termination(Termination.TERMINATED), eps, trials,
                derive_seed(seed, "knot-term", i), workers=workers, stride=stride)
            a, b, _ = extract_window_params(term, eps, eps_star, delta)
            trunc = mean_trajectory(
                spec.with_termination(Termination.TRUNCATED), eps, trials,
                derive_seed(seed, "knot-trunc", i), workers=workers, stride=stride)
            _, _, g = extract_window_params(trunc, eps, eps_star, delta)
        except TooManyFailures:
            if fill == "error":
                raise
            missing.append(eps)
            continue
        measured[eps] = (a, b, g)
        if audit_dir:
            dump_trajectory_csv(term, f"{audit_dir}/trace_terminated_{eps:.6f}.csv")
            dump_trajectory_csv(trunc, f"{audit_dir}/trace_truncated_{eps:.6f}.csv")

    if len(measured) < 2 and missing:
        raise TooManyFailures(
            f"only {len(measured)} measured knots; cannot extrapolate "
            f"{len(missing)} guard-violating knots {missing}")

    entries = [TableEntry(eps=e, alpha=a, beta=b, gamma=g)
               for e, (a, b, g) in measured.items()]
    if missing:
        xs = np.array(sorted(measured))
        comp = np.array([measured[e] for e in sorted(measured)])
        coeffs = [np.polyfit(xs, comp[:, j], 1) for j in range(3)]
        for e in missing:
            a, b, g = (float(np.polyval(c, e)) for c in coeffs)
            b = min(b, e * spec.L)
            a = min(max(a, 0.0), 0.999 * b)
            entries.append(TableEntry(eps=e, alpha=a, beta=b, gamma=g,
                                      extrapolated=True))
    return sorted(entries, key=lambda t: t.eps)


def build_parameter_table(spec: EnsembleSpec, eps_grid, trials: int, seed: int,
                          eps_star: float, workers: int | None = None,
                          stride: int | None = None,
                          nu_theta_eps: float | None = None,
                          nu_theta_trials: int | None = None,
                          nu_theta_spec: EnsembleSpec | None = None,
                          delta: float = PLATEAU_DELTA,
                          fill: str = "extrapolate",
                          audit_dir: str | None = None) -> ScalingParameters:
    """Full (eps -> alpha, beta, gamma) table plus the (nu, theta) pair.

    Wraps measure_table_knots and adds the fluctuation constants,
    estimated on the truncated ensemble (by default at the largest eps
    whose threshold gap stays comfortably estimable at the given N).
    """
    spec = validate_spec(spec)
    entries = measure_table_knots(spec, eps_grid, trials, seed, eps_star,
                                  workers=workers, stride=stride, delta=delta,
                                  fill=fill, audit_dir=audit_dir)

    fluct_spec = nu_theta_spec or spec.with_termination(Termination.TRUNCATED)
    if nu_theta_eps is None:
        # highest eps that keeps the failure guard comfortable; the
        # tolerable threshold gap shrinks like 1/sqrt(N)
        nu_theta_eps = eps_star - 1.6 / math.sqrt(fluct_spec.N)
    stats = estimate_nu_theta(
        fluct_spec.with_termination(Termination.TRUNCATED), nu_theta_eps,
        nu_theta_trials or trials, derive_seed(seed, "fluct"),
        workers=workers, stride=stride, delta=delta)
    if audit_dir:
        dump_autocov_csv(stats, f"{audit_dir}/autocov_{nu_theta_eps:.6f}.csv")

    return ScalingParameters(
        dv=spec.dv, dc=spec.dc, L=spec.L, eps_star=eps_star,
        nu=stats.nu, theta=stats.theta, table=entries,
    )


def dump_trajectory_csv(traj: MeanTrajectory, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("# scsale-v1\n")
        fh.write("tau,r1_mean,r1_var\n")
        for i in range(traj.tau.size):
            fh.write(f"{float(traj.tau[i])!r},{float(traj.r1_mean[i])!r},"
                     f"{float(traj.r1_var[i])!r}\n")


def dump_autocov_csv(stats: FluctuationStats, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("# scsale-v1\n")
        fh.write("lag,autocov\n")
        for i in range(stats.lags.size):
            fh.write(f"{float(stats.lags[i])!r},{float(stats.autocov[i])!r}\n")
