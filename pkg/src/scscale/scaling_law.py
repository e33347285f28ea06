"""Closed-form failure-rate predictions from the fitted scaling constants.

The decoder's degree-one fraction in steady state behaves like a
mean-reverting diffusion; its first hit of zero is approximately
exponential with mean mu0, and the two-boundary chain fails like the
SUM of two such hits, i.e. an Erlang(2, mu0) shifted to the start of
the steady-state window [alpha, beta]. Frame and bit error rates are
integrals of those laws over the window, evaluated here in closed form
with log-domain companions so that predictions survive mu0 values far
beyond double-precision range.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx, erfi, gammainc, ndtr

from .errors import (InvalidWindow, MissingParams, NonPositiveGap,
                     OutOfTableRange, ValidationError)

SQRT_2PI = math.sqrt(2.0 * math.pi)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_ASYMPTOTIC_W = 30.0  # erfi(w/sqrt(2)) overflows near w = 37.7


def normal_cdf(z):
    """Standard normal CDF (abs error well below 1e-12)."""
    return ndtr(z)


@dataclass(frozen=True)
class Mu0:
    """Mean of the exponential first-hit approximation, with log."""
    value: float   # inf when the double range is exceeded
    log: float     # always finite for w > 0
    w: float
    theta: float

    def __float__(self) -> float:
        return self.value


def _log_upper_integral(w: float) -> float:
    """log of integral_0^w exp(z^2/2) dz for large w, by the asymptotic
    series exp(w^2/2) * sum_k (2k-1)!! / w^(2k+1)."""
    term = 1.0 / w
    total = term
    k = 0
    while True:
        k += 1
        term *= (2 * k - 1) / (w * w)
        total += term
        if term < 1e-17 * total or k > 40:
            break
    return 0.5 * w * w + math.log(total)


def mu0_from_w(w: float, theta: float) -> Mu0:
    """mu0 = (sqrt(2*pi)/theta) * integral_0^w Phi(z) exp(z^2/2) dz.

    For moderate w the integral splits exactly into
    sqrt(pi/2)*erfi(w/sqrt(2)) minus the bounded correction
    (1/2) integral_0^w erfcx(z/sqrt(2)) dz (Gauss-Legendre, 64 nodes),
    because (1 - Phi(z))*exp(z^2/2) = erfcx(z/sqrt(2))/2. Past w = 30
    the correction is negligible relative to exp(w^2/2) and the result
    is carried in the log domain.
    """
    if theta <= 0:
        raise ValidationError(f"theta={theta} must be positive")
    if w < 0:
        raise NonPositiveGap(f"w={w} must be nonnegative")
    coeff = SQRT_2PI / theta
    if w == 0.0:
        return Mu0(value=0.0, log=-math.inf, w=0.0, theta=theta)
    if w <= _ASYMPTOTIC_W:
        z = 0.5 * w * (_GL_NODES + 1.0)
        correction = 0.25 * w * float(_GL_WEIGHTS @ erfcx(z / math.sqrt(2.0)))
        upper = math.sqrt(math.pi / 2.0) * float(erfi(w / math.sqrt(2.0)))
        value = coeff * (upper - correction)
        return Mu0(value=value, log=math.log(value), w=w, theta=theta)
    log_value = math.log(coeff) + _log_upper_integral(w)
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    return Mu0(value=value, log=log_value, w=w, theta=theta)


def mu0(gamma: float, nu: float, theta: float, N: int, eps: float,
        eps_star: float) -> Mu0:
    """Scale of the first-hit law at channel parameter eps."""
    for name, val in (("gamma", gamma), ("nu", nu), ("theta", theta), ("N", N)):
        if val <= 0:
            raise ValidationError(f"{name}={val} must be positive")
    if eps >= eps_star:
        raise NonPositiveGap(f"eps={eps} is not below eps_star={eps_star}")
    w = gamma * math.sqrt(N / nu) * (eps_star - eps)
    return mu0_from_w(w, theta)


# --- first-hit distributions -------------------------------------------------

def _mu_pair(mu0_like) -> tuple[float, float]:
    if isinstance(mu0_like, Mu0):
        return mu0_like.value, mu0_like.log
    m = float(mu0_like)
    if m < 0:
        raise ValidationError(f"mu0={m} must be nonnegative")
    return m, (math.log(m) if m > 0 else -math.inf)


def first_hit_pdf_exponential(x, alpha: float, mu0_like):
    m, _ = _mu_pair(mu0_like)
    x = np.asarray(x, dtype=float)
    s = (x - alpha) / m
    out = np.where(s >= 0, np.exp(-np.maximum(s, 0.0)) / m, 0.0)
    return out if out.ndim else float(out)


def first_hit_cdf_exponential(x, alpha: float, mu0_like):
    m, _ = _mu_pair(mu0_like)
    x = np.asarray(x, dtype=float)
    s = np.maximum((x - alpha) / m, 0.0)
    out = -np.expm1(-s)
    return out if out.ndim else float(out)


def first_hit_pdf_erlang(x, alpha: float, mu0_like):
    m, _ = _mu_pair(mu0_like)
    x = np.asarray(x, dtype=float)
    s = (x - alpha) / m
    out = np.where(s >= 0, np.maximum(s, 0.0) * np.exp(-np.maximum(s, 0.0)) / m, 0.0)
    return out if out.ndim else float(out)


def first_hit_cdf_erlang(x, alpha: float, mu0_like):
    m, _ = _mu_pair(mu0_like)
    x = np.asarray(x, dtype=float)
    s = np.maximum((x - alpha) / m, 0.0)
    out = gammainc(2, s)
    return out if out.ndim else float(out)


# --- frame error rate ---------------------------------------------------------

def _window_t(alpha: float, beta: float, mu0_like) -> tuple[float, float]:
    """(t, log_t) with t = (beta - alpha)/mu0, safe when mu0 overflows."""
    if beta < alpha:
        raise InvalidWindow(f"beta={beta} < alpha={alpha}")
    m, log_m = _mu_pair(mu0_like)
    if beta == alpha:
        return 0.0, -math.inf
    log_t = math.log(beta - alpha) - log_m
    t = (beta - alpha) / m if math.isfinite(m) else 0.0
    return t, log_t


def fer_exponential(alpha: float, beta: float, mu0_like) -> float:
    """P(exponential first hit lands inside [alpha, beta])."""
    t, _ = _window_t(alpha, beta, mu0_like)
    return float(-np.expm1(-t))


def fer_erlang(alpha: float, beta: float, mu0_like) -> float:
    """P(Erlang(2) first hit lands inside [alpha, beta]) = 1-(1+t)e^-t."""
    t, _ = _window_t(alpha, beta, mu0_like)
    return float(gammainc(2, t))


def log_fer_exponential(alpha: float, beta: float, mu0_like) -> float:
    t, log_t = _window_t(alpha, beta, mu0_like)
    if t > 1e-8:
        return math.log(-np.expm1(-t))
    # 1 - e^-t = t*(1 - t/2 + ...)
    return log_t + math.log1p(-0.5 * t)


def log_fer_erlang(alpha: float, beta: float, mu0_like) -> float:
    t, log_t = _window_t(alpha, beta, mu0_like)
    if t > 1e-4:
        return math.log(gammainc(2, t))
    # 1 - (1+t)e^-t = (t^2/2)*(1 - 2t/3 + ...)
    return 2.0 * log_t - math.log(2.0) + math.log1p(-2.0 * t / 3.0)


# --- bit error rate ------------------------------------------------------------

def _check_ber_window(alpha: float, beta: float, eps: float, L: int) -> None:
    if not 0.0 <= alpha <= beta:
        raise InvalidWindow(f"need 0 <= alpha <= beta, got ({alpha}, {beta})")
    if beta > eps * L * (1.0 + 1e-12):
        raise InvalidWindow(f"beta={beta} exceeds eps*L={eps * L}")


def ber_erlang(alpha: float, beta: float, mu0_like, eps: float, L: int) -> float:
    """integral over [alpha, beta] of (eps - x/L) * Erlang pdf(x) dx.

    Evaluated as ((eps*L-alpha)/L)*P(2,t) - (2*mu0/L)*P(3,t) with
    regularized lower incomplete gammas; the two terms never cancel
    catastrophically (their ratio stays below 2/3). Unclamped: callers
    clamp at the reporting layer only.
    """
    _check_ber_window(alpha, beta, eps, L)
    t, log_t = _window_t(alpha, beta, mu0_like)
    if t == 0.0 and log_t == -math.inf:
        return 0.0
    m, _ = _mu_pair(mu0_like)
    if math.isfinite(m):
        return float(((eps * L - alpha) / L) * gammainc(2, t)
                     - (2.0 * m / L) * gammainc(3, t))
    return math.exp(log_ber_erlang(alpha, beta, mu0_like, eps, L))


def log_ber_erlang(alpha: float, beta: float, mu0_like, eps: float, L: int) -> float:
    _check_ber_window(alpha, beta, eps, L)
    t, log_t = _window_t(alpha, beta, mu0_like)
    if log_t == -math.inf:
        return -math.inf
    if t > 1e-3:
        val = ber_erlang(alpha, beta, mu0_like, eps, L)
        if val > 0:
            return math.log(val)
    # leading series: P_b = (t^2/L) * (b0 - b1*t + O(t^2))
    b0 = (eps * L - alpha) / 2.0 - (beta - alpha) / 3.0
    b1 = (eps * L - alpha) / 3.0 - (beta - alpha) / 4.0
    return 2.0 * log_t - math.log(L) + math.log(b0) + math.log1p(-(b1 / b0) * t)


def ber_exponential(alpha: float, beta: float, mu0_like, eps: float, L: int) -> float:
    """Same integral against the exponential pdf (baseline law)."""
    _check_ber_window(alpha, beta, eps, L)
    t, log_t = _window_t(alpha, beta, mu0_like)
    if t == 0.0 and log_t == -math.inf:
        return 0.0
    m, _ = _mu_pair(mu0_like)
    if math.isfinite(m):
        return float(((eps * L - alpha) / L) * gammainc(1, t)
                     - (m / L) * gammainc(2, t))
    return math.exp(log_ber_exponential(alpha, beta, mu0_like, eps, L))


def log_ber_exponential(alpha: float, beta: float, mu0_like, eps: float, L: int) -> float:
    _check_ber_window(alpha, beta, eps, L)
    t, log_t = _window_t(alpha, beta, mu0_like)
    if log_t == -math.inf:
        return -math.inf
    if t > 1e-3:
        val = ber_exponential(alpha, beta, mu0_like, eps, L)
        if val > 0:
            return math.log(val)
    # P_b = (t/L) * (c0 - c1*t + O(t^2))
    c0 = eps * L - alpha
    c1 = (eps * L - alpha) / 2.0 - (beta - alpha) / 2.0
    arg = -(c1 / c0) * t
    return log_t - math.log(L) + math.log(c0) + math.log1p(arg)


# --- parameter tables -----------------------------------------------------------

@dataclass(frozen=True)
class TableEntry:
    eps: float
    alpha: float
    beta: float
    gamma: float
    extrapolated: bool = False


@dataclass
class ScalingParameters:
    dv: int
    dc: int
    L: int
    eps_star: float
    nu: float
    theta: float
    table: list[TableEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.table = [
            e if isinstance(e, TableEntry) else TableEntry(**e) for e in self.table
        ]
        self.table.sort(key=lambda e: e.eps)
        self.validate()

    def validate(self) -> None:
        if self.nu <= 0 or self.theta <= 0:
            raise ValidationError(
                f"nu={self.nu}, theta={self.theta} must be positive")
        if not self.table:
            raise ValidationError("parameter table is empty")
        seen = set()
        for e in self.table:
            if e.eps in seen:
                raise ValidationError(f"duplicate table knot eps={e.eps}")
            seen.add(e.eps)
            if not (0.0 <= e.alpha < e.beta <= e.eps * self.L * (1 + 1e-12)):
                raise ValidationError(
                    f"table entry at eps={e.eps} violates "
                    f"0 <= alpha < beta <= eps*L: ({e.alpha}, {e.beta})")
            if e.gamma <= 0:
                raise ValidationError(f"gamma={e.gamma} at eps={e.eps} must be positive")

    @property
    def eps_min(self) -> float:
        return self.table[0].eps

    @property
    def eps_max(self) -> float:
        return self.table[-1].eps


def interpolate(params: ScalingParameters, eps: float) -> tuple[float, float, float]:
    """Componentwise linear interpolation of (alpha, beta, gamma) at eps."""
    knots = np.array([e.eps for e in params.table])
    if eps < knots[0] or eps > knots[-1]:
        raise OutOfTableRange(
            f"eps={eps} outside table range [{knots[0]}, {knots[-1]}]")
    cols = np.array([[e.alpha, e.beta, e.gamma] for e in params.table])
    a, b, g = (float(np.interp(eps, knots, cols[:, j])) for j in range(3))
    return a, b, g


def save_params(params: ScalingParameters, path: str) -> None:
    doc = {
        "dv": params.dv, "dc": params.dc, "L": params.L,
        "eps_star": params.eps_star, "nu": params.nu, "theta": params.theta,
        "table": [
            {"eps": e.eps, "alpha": e.alpha, "beta": e.beta, "gamma": e.gamma,
             **({"extrapolated": True} if e.extrapolated else {})}
            for e in params.table
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_params(path: str) -> ScalingParameters:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingParams(f"parameter file not found: {path}") from exc
    try:
        return ScalingParameters(
            dv=doc["dv"], dc=doc["dc"], L=doc["L"], eps_star=doc["eps_star"],
            nu=doc["nu"], theta=doc["theta"],
            table=[TableEntry(**entry) for entry in doc["table"]],
        )
    except KeyError as exc:
        raise MissingParams(f"parameter file {path} lacks field {exc}") from exc


# --- prediction ------------------------------------------------------------------

LAWS = ("exponential", "erlang")


@dataclass(frozen=True)
class Prediction:
    eps: float
    N: int
    law: str
    fer: float        # clamped to [0, 1]
    ber: float        # clamped to [0, 1]
    mu0: Mu0
    log_fer: float
    log_ber: float
    alpha: float
    beta: float
    gamma: float
    raw_ber: float    # unclamped closed-form value

    @property
    def log_mu0(self) -> float:
        return self.mu0.log


def predict(params: ScalingParameters, eps: float, N: int, law: str = "erlang",
            beta_from_eps_l: bool = False) -> Prediction:
    """Interpolate the table at eps, evaluate mu0, apply the chosen law.

    beta_from_eps_l swaps the trajectory-estimated beta for the crude
    eps*L steady-state end used by the older exponential baseline.
    """
    law = law.lower()
    if law not in LAWS:
        raise ValidationError(f"law={law!r} not in {LAWS}")
    alpha, beta, gamma = interpolate(params, eps)
    if beta_from_eps_l:
        beta = eps * params.L
    m = mu0(gamma, params.nu, params.theta, N, eps, params.eps_star)
    if law == "erlang":
        fer = fer_erlang(alpha, beta, m)
        log_fer = log_fer_erlang(alpha, beta, m)
        raw_ber = ber_erlang(alpha, beta, m, eps, params.L)
        log_ber = log_ber_erlang(alpha, beta, m, eps, params.L)
    else:
        fer = fer_exponential(alpha, beta, m)
        log_fer = log_fer_exponential(alpha, beta, m)
        raw_ber = ber_exponential(alpha, beta, m, eps, params.L)
        log_ber = log_ber_exponential(alpha, beta, m, eps, params.L)
    return Prediction(
        eps=eps, N=int(N), law=law,
        fer=min(max(fer, 0.0), 1.0), ber=min(max(raw_ber, 0.0), 1.0),
        mu0=m, log_fer=log_fer, log_ber=log_ber,
        alpha=alpha, beta=beta, gamma=gamma, raw_ber=raw_ber,
    )
