"""Shared fixtures: profile scaling and the expensive estimation runs.

Profiles (env vars):
  default        - desk scale: every criterion at its stated tolerance;
                   Monte-Carlo budgets sized to the measured error rates
                   with a margin rather than to worst-case guesses.
  SCSCALE_FULL=1 - full stated scales everywhere.
  SCSCALE_FAST=1 - CI scale: widened, documented tolerances.

Session-scoped fixtures hold the Monte-Carlo products several criteria
share (thresholds, parameter tables, fluctuation constants, first-hit
samples), so each is computed once per run.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import pytest

from scscale import EnsembleSpec, ScalingParameters, Termination
from scscale.density_evolution import coupled_threshold
from scscale.param_estimation import (estimate_nu_theta, measure_table_knots)
from scscale.peeling import run_trials
from scscale.rng import derive_seed

FULL = os.environ.get("SCSCALE_FULL") == "1"
FAST = os.environ.get("SCSCALE_FAST") == "1" and not FULL

ENSEMBLES = ((5, 10), (4, 8), (3, 6))
L = 50
MASTER_SEED = 20260817


@dataclass(frozen=True)
class Profile:
    name: str
    threshold_tol: float
    table_trials: int       # trials per estimation knot
    est_n: int              # block size for trajectory estimation
    fluct_n: int            # block size for (nu, theta)
    fluct_trials: int
    fluct_at_caption: bool  # estimate at the published eps vs auto gap
    nu_theta_rtol: float
    fig2_n: int
    fig2_term_trials: int
    fig2_trunc_trials: int
    curve_trials: int       # per candidate eps in the end-to-end checks


def _profile() -> Profile:
    # the first-hit operating point fails almost every trial, so a few
    # thousand trials already yield the required failure-sample counts
    if FULL:
        return Profile("full", 2e-5, 600, 2000, 10000, 400, True, 0.20,
                       2000, 10000, 4000, 6000)
    if FAST:
        return Profile("fast", 1e-4, 150, 1000, 2000, 150, False, 0.35,
                       1000, 3000, 1500, 3000)
    return Profile("default", 2e-5, 300, 2000, 10000, 400, True, 0.20,
                   2000, 7000, 3000, 4000)


PROFILE = _profile()


@pytest.fixture(scope="session")
def profile() -> Profile:
    return PROFILE


@pytest.fixture(scope="session")
def thresholds() -> dict:
    """Coupled-chain thresholds for the three (dv, dc) pairs at L=50."""
    return {
        (dv, dc): coupled_threshold(dv, dc, L, tol_eps=PROFILE.threshold_tol)
        for dv, dc in ENSEMBLES
    }


@pytest.fixture(scope="session")
def fluct_stats(thresholds) -> dict:
    """(nu, theta) estimation runs on the truncated single-wave chains."""
    from oracles import FLUCTUATION_CONSTANTS

    out = {}
    for dv, dc in ENSEMBLES:
        spec = EnsembleSpec(dv, dc, L, PROFILE.fluct_n, Termination.TRUNCATED)
        if PROFILE.fluct_at_caption:
            eps = FLUCTUATION_CONSTANTS[(dv, dc)][0]
        else:
            eps = thresholds[(dv, dc)] - 1.6 / np.sqrt(PROFILE.fluct_n)
        out[(dv, dc)] = estimate_nu_theta(
            spec, eps, PROFILE.fluct_trials,
            derive_seed(MASTER_SEED, "fluct", dv, dc))
    return out


def _table_grid(eps_star: float) -> list[float]:
    # wider than the CLI default: the low end reaches the waterfall of
    # N=500 curves and the high end covers the distribution-shape
    # operating point, so one table serves every shipping check
    return [float(e) for e in np.linspace(eps_star - 0.06,
                                          eps_star - 0.005, 7)]


@pytest.fixture(scope="session")
def parameter_tables(thresholds, fluct_stats) -> dict:
    """Estimated scaling-parameter tables for all three ensembles."""
    out = {}
    for dv, dc in ENSEMBLES:
        eps_star = thresholds[(dv, dc)]
        spec = EnsembleSpec(dv, dc, L, PROFILE.est_n, Termination.TERMINATED)
        entries = measure_table_knots(
            spec, _table_grid(eps_star), PROFILE.table_trials,
            derive_seed(MASTER_SEED, "table", dv, dc), eps_star)
        stats = fluct_stats[(dv, dc)]
        out[(dv, dc)] = ScalingParameters(
            dv=dv, dc=dc, L=L, eps_star=eps_star,
            nu=stats.nu, theta=stats.theta, table=entries)
    return out


FIG2_EPS = 0.4875


@pytest.fixture(scope="session")
def fig2_samples():
    """First-hit samples at the distribution-shape operating point.

    This close to threshold decoding fails almost every trial (measured
    failure fractions: ~0.96 terminated / ~1.0 truncated at N=2000, ~1.0
    at the N=1000 fallback), so the trial budgets above already clear the
    required failure-sample counts with margin.
    """
    out = {}
    for term, trials in ((Termination.TERMINATED, PROFILE.fig2_term_trials),
                         (Termination.TRUNCATED, PROFILE.fig2_trunc_trials)):
        spec = EnsembleSpec(5, 10, L, PROFILE.fig2_n, term)
        out[term] = run_trials(
            spec, FIG2_EPS, trials,
            derive_seed(MASTER_SEED, "fig2", term.value))
    return out
