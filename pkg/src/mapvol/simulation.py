"""Data-generating processes for every model kind.

The generator runs the exact filtering recursion forward, drawing the
multiplicative error from a Gamma with unit mean, and returns both the
synthetic panel and the true component paths so tests can compare against
them directly. Returns are synthetic: only their sign matters to the
models, and the sign dummy is an independent fair coin, matching the
one-half negative-return probability used in forecasting.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import SimulationError
from .models import FilterOutput, ModelKind, ParamSet
from .panel import CenteredCovariates, PanelSeries

DEFAULT_PARAMS = {
    ModelKind.AMEM: ParamSet(omega=0.5, alpha=0.15, beta=0.70, gamma=0.10, theta=8.0),
    ModelKind.XMAP: ParamSet(omega=1.1, alpha=0.17, beta=0.69, gamma=0.12,
                             delta=-0.64, phi=1.30, theta=8.0),
    ModelKind.MAP: ParamSet(omega=1.06, alpha=0.15, beta=0.71, gamma=0.12,
                            delta=-1.80, phi=2.80, psi=0.11, theta=8.0),
    ModelKind.LMAP: ParamSet(omega=1.0, alpha=0.15, beta=0.71, gamma=0.12,
                             delta=-0.30, phi=0.46, psi=0.19, theta=8.0),
    ModelKind.PMAP: ParamSet(omega=1.0, alpha=0.15, beta=0.71, gamma=0.12,
                             delta=-0.16, phi=0.23, psi=0.13, theta=8.0),
}


def default_params(kind: ModelKind) -> ParamSet:
    """Plausible magnitudes for simulation scenarios, by kind."""
    return DEFAULT_PARAMS[ModelKind(kind)]


def gamma_draw(theta: float, rng: np.random.Generator) -> float:
    """One Gamma(theta, 1/theta) variate: unit mean, variance 1/theta."""
    if theta <= 0:
        raise SimulationError("gamma shape must be positive")
    return float(rng.gamma(theta, 1.0 / theta))


def business_dates(n: int, start: datetime.date = datetime.date(2010, 1, 4)) -> tuple:
    """n consecutive weekdays starting at start."""
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += datetime.timedelta(days=1)
    return tuple(out)


@dataclass(frozen=True)
class SimScenario:
    """Recipe for one synthetic panel.

    x path: constant at x0, a reflected random walk in [0, 1] with optional
    drift, or a user path. Announcements: none, every k-th day (days k, 2k,
    ... 1-based), or a user calendar. The seed fixes the whole output.
    """

    kind: ModelKind
    params: ParamSet | None = None
    T: int = 2500
    x_mode: str = "walk"          # constant | walk | path
    x0: float = 0.10
    x_drift: float = 0.0
    x_sigma: float = 0.002
    x_path: np.ndarray | None = None
    announce_mode: str = "every"  # none | every | calendar
    announce_every: int = 21
    announce_calendar: np.ndarray | None = None
    seed: int = 0


@dataclass(frozen=True)
class SimResult:
    scenario: SimScenario
    panel: PanelSeries
    truth: FilterOutput
    centered: CenteredCovariates
    init_level: float
    eps: np.ndarray


def _x_path(s: SimScenario, rng: np.random.Generator) -> np.ndarray:
    if s.x_mode == "constant":
        return np.full(s.T, float(s.x0))
    if s.x_mode == "path":
        if s.x_path is None or len(s.x_path) != s.T:
            raise SimulationError("x_mode='path' requires an x_path of length T")
        return np.asarray(s.x_path, dtype=float)
    if s.x_mode != "walk":
        raise SimulationError(f"unknown x_mode {s.x_mode!r}")
    steps = rng.normal(s.x_drift, s.x_sigma, size=s.T)
    x = np.empty(s.T)
    level = float(s.x0)
    for t in range(s.T):
        level += steps[t]
        # reflect back into [0, 1]
        while level < 0.0 or level > 1.0:
            level = -level if level < 0.0 else 2.0 - level
        x[t] = level
    return x


def _delta_path(s: SimScenario) -> np.ndarray:
    if s.announce_mode == "none":
        return np.zeros(s.T)
    if s.announce_mode == "calendar":
        if s.announce_calendar is None or len(s.announce_calendar) != s.T:
            raise SimulationError("announce_mode='calendar' requires a 0/1 path of length T")
        return np.asarray(s.announce_calendar, dtype=float)
    if s.announce_mode != "every":
        raise SimulationError(f"unknown announce_mode {s.announce_mode!r}")
    if s.announce_every < 1:
        raise SimulationError("announce_every must be >= 1")
    delta = np.zeros(s.T)
    delta[s.announce_every - 1::s.announce_every] = 1.0
    return delta


def simulate_panel(s: SimScenario) -> SimResult:
    """Generate a panel from the exact model recursion, rv_t = mu_t * eps_t.

    The base component starts at the unconditional mean and the policy
    component at its fixed point (0, or 1 for PMAP); covariates are
    centered with their full-sample means, matching what estimation on the
    full window recomputes. Filtering the output panel with the recorded
    init level reproduces the true components bit-for-bit.
    """
    kind = ModelKind(s.kind)
    params = s.params if s.params is not None else default_params(kind)
    params.require_valid(kind)
    if s.T < 2:
        raise SimulationError("T must be >= 2")
    rng = np.random.default_rng(s.seed)

    x = _x_path(s, rng)
    delta = _delta_path(s)
    x_bar = float(np.mean(x))
    delta_bar = float(np.mean(delta))
    xc = x - x_bar
    dc = delta - delta_bar

    d = (rng.random(s.T) < 0.5).astype(float)
    mag = np.abs(rng.standard_normal(s.T)) + 1e-12
    ret = np.where(d == 1.0, -mag, mag)
    eps = rng.gamma(params.theta, 1.0 / params.theta, size=s.T)

    omega, alpha, beta = params.omega, params.alpha, params.beta
    gamma, delta_c, phi, psi = params.gamma, params.delta, params.phi, params.psi
    init = params.omega / (1.0 - params.persistence)

    sigma = np.empty(s.T)
    xi = np.empty(s.T)
    mu = np.empty(s.T)
    rv = np.empty(s.T)
    sigma[0] = init
    xi[0] = 1.0 if kind is ModelKind.PMAP else 0.0
    if kind in (ModelKind.AMEM, ModelKind.XMAP):
        mu[0] = init
    elif kind is ModelKind.PMAP:
        mu[0] = sigma[0] * xi[0]
    elif kind is ModelKind.LMAP:
        mu[0] = 2.0 * sigma[0] * expit(xi[0])
    else:
        mu[0] = sigma[0] + xi[0]
    rv[0] = mu[0] * eps[0]

    # expression grouping mirrors filter_panel so round trips are exact
    for t in range(1, s.T):
        if kind in (ModelKind.AMEM, ModelKind.XMAP):
            mu[t] = (omega + (alpha + gamma * d[t - 1]) * rv[t - 1]
                     + delta_c * xc[t - 1] + phi * dc[t]) + beta * mu[t - 1]
            sigma[t] = mu[t]
            xi[t] = 0.0
        else:
            sigma[t] = (omega + (alpha + gamma * d[t - 1]) * rv[t - 1]) + beta * sigma[t - 1]
            u = delta_c * xc[t - 1] + phi * dc[t]
            if kind is ModelKind.PMAP:
                xi[t] = (u + (1.0 - psi)) + psi * xi[t - 1]
                mu[t] = sigma[t] * xi[t]
            elif kind is ModelKind.LMAP:
                xi[t] = u + psi * xi[t - 1]
                mu[t] = 2.0 * sigma[t] * expit(xi[t])
            else:
                xi[t] = u + psi * xi[t - 1]
                mu[t] = sigma[t] + xi[t]
        if not np.isfinite(mu[t]) or mu[t] <= 0.0:
            raise SimulationError(
                f"non-positive expected volatility at t={t}; "
                "weaken the policy coefficients or shrink the covariate paths")
        rv[t] = mu[t] * eps[t]

    panel = PanelSeries(business_dates(s.T), rv, ret, x, delta)
    if not np.array_equal(panel.sign, d):
        raise SimulationError("sign dummy does not match the generated coin")
    truth = FilterOutput(kind, sigma, xi, mu, rv / mu, valid=True)
    centered = CenteredCovariates(x_bar, delta_bar, xc, dc)
    return SimResult(scenario=s, panel=panel, truth=truth, centered=centered,
                     init_level=init, eps=eps)
