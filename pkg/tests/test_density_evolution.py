"""Density evolution: fixed points, thresholds, coupled profiles."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from scscale.density_evolution import (alpha_lower_bound, coupled_de,
                                       coupled_threshold, de_step,
                                       uncoupled_fixed_point,
                                       uncoupled_threshold)
from scscale.ensemble import Termination
from scscale.errors import DegenerateChain, ValidationError


# -------------------------------------------------------- uncoupled BP

def test_uncoupled_thresholds_match_frozen_values():
    for (dv, dc), expected in oracles.UNCOUPLED_BP.items():
        assert uncoupled_threshold(dv, dc) == pytest.approx(expected, abs=1e-9)


def test_uncoupled_threshold_agrees_with_reference_bisection():
    for dv, dc in ((3, 6), (5, 10)):
        ref = oracles.uncoupled_threshold_reference(dv, dc)
        assert uncoupled_threshold(dv, dc) == pytest.approx(ref, abs=2e-9)


def test_uncoupled_fixed_point_against_plain_loop():
    for dv, dc, eps in ((3, 6, 0.40), (3, 6, 0.45), (5, 10, 0.30),
                        (5, 10, 0.42), (4, 8, 0.45)):
        ref = oracles.uncoupled_fixed_point_reference(dv, dc, eps)
        fp = uncoupled_fixed_point(dv, dc, eps)
        assert fp.x_bar == pytest.approx(ref, abs=1e-11)


def test_uncoupled_stuck_above_own_threshold():
    # at the coupled chain's threshold the uncoupled ensemble still fails
    fp = uncoupled_fixed_point(3, 6, 0.4881)
    assert fp.x_bar > 0.1
    assert fp.q_bar == pytest.approx(1 - (1 - fp.x_bar) ** 5, rel=1e-12)


def test_uncoupled_clears_below_own_threshold():
    fp = uncoupled_fixed_point(3, 6, 0.42)
    assert fp.x_bar < 1e-9


@given(st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_uncoupled_fixed_point_bounded(eps):
    fp = uncoupled_fixed_point(4, 8, eps, tol=1e-10, max_iters=200_000)
    assert 0.0 <= fp.x_bar <= eps + 1e-15
    assert 0.0 <= fp.q_bar <= 1.0


def test_uncoupled_rejects_bad_eps():
    with pytest.raises(ValidationError):
        uncoupled_fixed_point(3, 6, 1.5)


# ------------------------------------------------------- coupled chain

def test_coupled_de_converges_below_threshold():
    prof = coupled_de(5, 10, 50, 0.45)
    assert prof.converged
    assert prof.x.max() < prof.tol
    assert prof.interior_converged


def test_coupled_de_stalls_above_threshold():
    prof = coupled_de(5, 10, 50, 0.52)
    assert not prof.converged
    assert prof.x.max() > 0.3


def test_terminated_profile_is_symmetric():
    prof = coupled_de(5, 10, 30, 0.51, max_iters=300)
    assert np.allclose(prof.x, prof.x[::-1], atol=1e-12)
    assert np.allclose(prof.y, prof.y[::-1], atol=1e-12)


def test_terminated_history_decreases_monotonically():
    prof = coupled_de(3, 6, 20, 0.47, record_history=True)
    assert prof.converged
    mass = prof.history.sum(axis=1)
    assert np.all(np.diff(mass) <= 1e-12)
    assert prof.history.shape == (prof.iterations, 20)


def test_truncated_tail_stays_stuck_interior_clears():
    # between the uncoupled and coupled thresholds the single decoding
    # wave clears the interior; the reduced-degree tail holds a nonzero
    # fixed point and back-feeds a floor into its full-degree neighbors
    prof = coupled_de(5, 10, 50, 0.45, termination=Termination.TRUNCATED)
    assert prof.interior_converged
    assert not prof.converged
    assert prof.x[-1] > 0.1
    assert prof.x[: 50 - 3 * 5 + 1].max() < prof.tol
    assert prof.x[45] > prof.tol  # last full-degree position, contaminated


def test_truncated_interior_fails_when_wave_dies():
    prof = coupled_de(5, 10, 50, 0.502, termination=Termination.TRUNCATED)
    assert not prof.interior_converged
    assert prof.x[: 50 - 3 * 5 + 1].max() > 0.3  # stalled mid-chain


def test_interior_verdict_needs_room_for_buffer():
    prof = coupled_de(5, 10, 12, 0.45, termination=Termination.TRUNCATED)
    with pytest.raises(DegenerateChain):
        prof.interior_converged


def test_truncated_dropped_edges_stay_zero():
    prof = coupled_de(4, 8, 12, 0.40, termination=Termination.TRUNCATED,
                      max_iters=5)
    for pos in range(12):
        deg = min(4, 12 - pos)
        assert np.all(prof.edge_x[pos, deg:] == 0.0)


def test_coupled_de_rejects_bad_eps():
    with pytest.raises(ValidationError):
        coupled_de(3, 6, 10, -0.1)


@given(st.integers(2, 5), st.integers(1, 7), st.integers(3, 12),
       st.floats(0.0, 1.0), st.sampled_from(list(Termination)))
@settings(max_examples=40, deadline=None)
def test_de_step_stays_in_unit_interval(dv, extra, L, eps, term):
    dc = dv + extra
    prof = coupled_de(dv, dc, L, eps, termination=term, max_iters=3)
    assert np.all(prof.edge_x >= 0.0) and np.all(prof.edge_x <= 1.0)
    assert np.all(prof.x >= 0.0) and np.all(prof.x <= eps + 1e-15)
    assert np.all(prof.y >= 0.0) and np.all(prof.y <= 1.0)
    step_x, step_y = de_step(prof.edge_x, eps, dv, dc, L, term)
    assert step_x.shape == prof.edge_x.shape
    assert np.all(step_x <= prof.edge_x + 1e-15)  # monotone from above


# ------------------------------------------------------ chain threshold

def test_short_chain_threshold_brackets():
    thr = coupled_threshold(3, 6, 10, tol_eps=5e-4)
    lo = oracles.UNCOUPLED_BP[(3, 6)]
    hi = 0.5 * 12 / 10  # rate bound for the 12-CN-position chain
    assert lo < thr < hi
    assert thr == pytest.approx(0.4957, abs=3e-3)


def test_threshold_gains_over_uncoupled_for_truncated_chain():
    thr = coupled_threshold(3, 6, 16, tol_eps=1e-3,
                            termination=Termination.TRUNCATED)
    assert thr > oracles.UNCOUPLED_BP[(3, 6)] + 0.03


def test_threshold_rejects_bad_tolerance():
    with pytest.raises(ValidationError):
        coupled_threshold(3, 6, 10, tol_eps=0.0)


# --------------------------------------------- early-clearing mass bound

def test_alpha_lower_bound_range_and_formula():
    for (dv, dc), eps_star in oracles.COUPLED_THRESHOLD.items():
        lb = alpha_lower_bound(dv, dc, 50, eps_star)
        assert 0.0 < lb < eps_star * 50
        # independent recomputation from the reference fixed point
        x_bar = oracles.uncoupled_fixed_point_reference(dv, dc, eps_star)
        q_bar = 1.0 - (1.0 - x_bar) ** (dc - 1)
        assert lb == pytest.approx(50 * eps_star * (1 - q_bar ** dv), rel=1e-9)


def test_alpha_lower_bound_scales_with_chain_length():
    a25 = alpha_lower_bound(5, 10, 25, 0.4994)
    a50 = alpha_lower_bound(5, 10, 50, 0.4994)
    assert a50 == pytest.approx(2 * a25, rel=1e-12)
