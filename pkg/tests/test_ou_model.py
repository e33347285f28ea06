"""Mean-reverting surrogate: first-hit sampling and distribution fits.

The two KS bars (single wave vs exponential, summed hit times vs the
two-stage law) run at noise ratio 3 with dt = ceiling/16, where the
grid-hit delay bias is ~0.01 and the bars hold with 2-4x margin.
"""
import math

import numpy as np
import pytest

from scscale.errors import ExcessiveCensoring, ValidationError
from scscale.ou_model import (MAX_CENSORED_FRACTION, OUParams, OUSamples,
                              VARIANT_SINGLE, VARIANT_SUM_OF_HITS,
                              VARIANT_SUM_PROCESS, coupled_refinement_ks,
                              dump_ou_samples, fit_report, ks_statistic,
                              ou_first_hit, ou_path, refine_dt,
                              two_wave_first_hit)
from scscale.scaling_law import mu0_from_w

THETA = 1.64
S = 0.02


def make_params(ratio: float, dt_div: float = 16.0, alpha: float = 0.0,
                tau_mult: float = 12.0) -> OUParams:
    mu = mu0_from_w(ratio, THETA).value
    return OUParams(m=ratio * S, theta=THETA, s2=S * S, alpha=alpha,
                    dt=0.01 / THETA / dt_div,
                    tau_max=alpha + tau_mult * max(mu, 1.0 / THETA))


# ------------------------------------------------------------- params

def test_params_validation():
    with pytest.raises(ValidationError):
        OUParams(m=0.0, theta=1.0, s2=1.0, alpha=0.0, dt=1e-3, tau_max=1.0)
    with pytest.raises(ValidationError):
        OUParams(m=1.0, theta=-1.0, s2=1.0, alpha=0.0, dt=1e-3, tau_max=1.0)
    with pytest.raises(ValidationError):
        OUParams(m=1.0, theta=1.0, s2=0.0, alpha=0.0, dt=1e-3, tau_max=1.0)
    with pytest.raises(ValidationError):
        OUParams(m=1.0, theta=2.0, s2=1.0, alpha=0.0, dt=0.0051, tau_max=1.0)
    with pytest.raises(ValidationError):
        OUParams(m=1.0, theta=1.0, s2=1.0, alpha=2.0, dt=1e-3, tau_max=2.0)
    # the documented ceiling itself is admissible
    p = OUParams(m=1.0, theta=2.0, s2=1.0, alpha=0.0, dt=0.005, tau_max=1.0)
    assert p.sigma == math.sqrt(2.0 * 2.0 * 1.0)
    assert p.noise_ratio == 1.0


def test_from_scaling_fields():
    p = OUParams.from_scaling(gamma=2.0, nu=0.424, theta=THETA, N=2000,
                              eps=0.4875, eps_star=0.4994)
    assert p.m == pytest.approx(2.0 * (0.4994 - 0.4875))
    assert p.s2 == pytest.approx(0.424 / 2000)
    assert p.dt == pytest.approx(0.01 / THETA)
    mu = mu0_from_w(p.noise_ratio, THETA).value
    assert p.tau_max == pytest.approx(12.0 * max(mu, 1.0 / THETA))


def test_from_scaling_horizon_floor():
    # nearly closed gap: mu0 collapses below the relaxation time and the
    # horizon must fall back to 12/theta
    p = OUParams.from_scaling(gamma=2.0, nu=0.424, theta=THETA, N=2000,
                              eps=0.49935, eps_star=0.4994)
    assert mu0_from_w(p.noise_ratio, THETA).value < 1.0 / THETA
    assert p.tau_max == pytest.approx(12.0 / THETA)


def test_refine_dt():
    p = make_params(2.0)
    q = refine_dt(p)
    assert q.dt == pytest.approx(0.5 * p.dt)
    assert q.tau_max == p.tau_max and q.m == p.m


# ------------------------------------------------------- path sampling

def test_path_stationarity():
    p = make_params(3.0, dt_div=1.0)
    steps = 150_000
    x = ou_path(p, steps, seed=5)
    assert x.shape == (steps + 1,)
    horizon = steps * p.dt
    # time-average variance of an OU mean estimate: 2*s2/(theta*T)
    se_mean = math.sqrt(2.0 * p.s2 / (p.theta * horizon))
    assert abs(x.mean() - p.m) < 4.0 * se_mean
    assert np.var(x) == pytest.approx(p.s2, rel=0.10)


def test_hit_times_live_on_the_step_grid():
    p = make_params(1.5, dt_div=1.0)
    out = ou_first_hit(p, 500, seed=9)
    assert out.variant == VARIANT_SINGLE
    hits = out.uncensored()
    steps = (hits - p.alpha) / p.dt
    assert np.all(hits >= p.alpha + p.dt * (1 - 1e-9))
    assert np.allclose(steps, np.round(steps), atol=1e-6)


def test_alpha_only_shifts_hits():
    base = make_params(1.5, dt_div=1.0)
    shifted = OUParams(m=base.m, theta=base.theta, s2=base.s2, alpha=2.5,
                       dt=base.dt, tau_max=base.tau_max + 2.5)
    a = ou_first_hit(base, 400, seed=21)
    b = ou_first_hit(shifted, 400, seed=21)
    assert np.allclose(b.tau0, a.tau0 + 2.5, atol=1e-12)


def test_low_ratio_hits_are_fast_and_uncensored():
    p = make_params(1.0)
    out = ou_first_hit(p, 800, seed=3)
    assert out.censored_fraction == 0.0
    med = float(np.median(out.tau0))
    assert med < 0.1 * p.tau_max
    # the exponential approximation is loose at this ratio, but the
    # scale must still be right to within a small factor
    assert med < 2.5 * p.mu0().value


# ------------------------------------------------------ distribution fits

def test_single_wave_fits_exponential_not_erlang():
    p = make_params(3.0)
    report = fit_report(ou_first_hit(p, 3500, seed=11))
    assert report["variant"] == VARIANT_SINGLE
    assert report["censored_fraction"] < MAX_CENSORED_FRACTION
    assert report["ks_vs_exponential"] < 0.05
    assert report["ks_vs_erlang"] > 0.25


def test_sum_of_hits_fits_erlang_not_exponential():
    p = make_params(3.0)
    report = fit_report(two_wave_first_hit(p, 3500, seed=12))
    assert report["variant"] == VARIANT_SUM_OF_HITS
    assert report["ks_vs_erlang"] < 0.05
    assert report["ks_vs_exponential"] > 0.25


def test_sum_process_is_a_different_law():
    # diagnostic, not a pass bar: the literal summed process hits far
    # later than the summed hit times, because its noise ratio gains a
    # factor sqrt(2); its own exponential reference uses that scale
    p = make_params(2.5, dt_div=1.0)
    hits = two_wave_first_hit(p, 600, seed=13, variant=VARIANT_SUM_PROCESS)
    conv = two_wave_first_hit(p, 600, seed=14, variant=VARIANT_SUM_OF_HITS)
    assert hits.variant == VARIANT_SUM_PROCESS
    ref = mu0_from_w(math.sqrt(2.0) * p.noise_ratio, p.theta)
    assert hits.model_mu0().value == pytest.approx(ref.value)
    assert conv.model_mu0().value == pytest.approx(p.mu0().value)
    # the horizon was stretched to the summed process's own scale
    assert hits.params.tau_max >= p.alpha + 11.9 * ref.value
    assert hits.uncensored().mean() > 3.0 * conv.uncensored().mean()


def test_two_wave_rejects_unknown_variant():
    p = make_params(2.0, dt_div=1.0)
    with pytest.raises(ValidationError):
        two_wave_first_hit(p, 100, seed=1, variant="both")


def test_refinement_is_converged_at_shipped_dt():
    # halving dt moves the first-hit CDF by less than 0.01 when both
    # resolutions ride the same Brownian increments
    p = make_params(2.5, dt_div=8.0)
    ks = coupled_refinement_ks(p, 20_000, seed=17)
    assert ks < 0.01


def test_refinement_needs_enough_joint_hits():
    p = make_params(2.5, dt_div=1.0)
    starved = OUParams(m=p.m, theta=p.theta, s2=p.s2, alpha=p.alpha,
                       dt=p.dt, tau_max=p.alpha + 3 * p.dt)
    with pytest.raises(ValidationError):
        coupled_refinement_ks(starved, 150, seed=2)
    with pytest.raises(ValidationError):
        coupled_refinement_ks(p, 99, seed=2)


# ------------------------------------------------------------- guards

def test_fit_report_aborts_on_censoring():
    p = make_params(2.0, dt_div=1.0, tau_mult=0.5)
    out = ou_first_hit(p, 300, seed=8)
    assert out.censored_fraction > MAX_CENSORED_FRACTION
    with pytest.raises(ExcessiveCensoring):
        fit_report(out)


def test_sample_count_validation():
    p = make_params(2.0, dt_div=1.0)
    with pytest.raises(ValidationError):
        ou_first_hit(p, 0, seed=1)
    with pytest.raises(ValidationError):
        two_wave_first_hit(p, 0, seed=1)
    with pytest.raises(ValidationError):
        ks_statistic(np.arange(50, dtype=float), lambda x: x)


# --------------------------------------------------------------- dumps

def test_dump_ou_samples_round_trip(tmp_path):
    p = make_params(1.0, dt_div=1.0)
    single = ou_first_hit(p, 150, seed=4)
    pair = two_wave_first_hit(p, 100, seed=5)
    path = tmp_path / "ou.csv"
    dump_ou_samples([single, pair], str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "# scsale-v1"
    assert lines[1] == "variant,tau0,censored"
    rows = [ln.split(",") for ln in lines[2:]]
    assert len(rows) == 250
    variants = {r[0] for r in rows}
    assert variants == {VARIANT_SINGLE, VARIANT_SUM_OF_HITS}
    got = np.array([float(r[1]) for r in rows[:150]])
    assert np.array_equal(got, single.tau0)
    assert {r[2] for r in rows} <= {"0", "1"}


def test_dump_accepts_single_set(tmp_path):
    p = make_params(1.0, dt_div=1.0)
    out = ou_first_hit(p, 120, seed=6)
    path = tmp_path / "one.csv"
    dump_ou_samples(out, str(path))
    assert len(path.read_text().splitlines()) == 122
