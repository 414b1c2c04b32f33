"""Multi-step forecasts, impulse responses and marginal effects.

Beyond the first step (which uses the observed rv, sign dummy and
covariates at the origin), expected volatility is propagated with the
negative-return probability fixed at one half:

    sigma_{t+h} = omega + (alpha + gamma/2) * mu_{t+h-1} + beta * sigma_{t+h-1}

while the policy component follows its own linear recursion under the
covariate rules: the proxy is held at its last observed value (its
random-walk expectation) or follows a user path, and the announcement
dummy defaults to its window mean (centered zero) or a known calendar.
Nonlinear compositions (LMAP/PMAP) are evaluated by plugging the expected
components in; an optional Monte Carlo mode simulates error and sign draws
forward to bound the plug-in approximation.

The impulse response is the difference between two such paths whose only
difference is a sustained shift of the proxy path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import ForecastError
from .models import FilterOutput, ModelKind, ParamSet, unconditional_mean
from .panel import CenteredCovariates, PanelSeries

DEFAULT_TOLERANCE = 0.01  # one basis point of annualized volatility


@dataclass(frozen=True)
class ForecastRules:
    """Assumptions about future covariates and the propagation settings."""

    x_mode: str = "hold"            # hold | path
    x_path: np.ndarray | None = None    # levels for x_{t+1}..x_{t+H-1} (used from h=2 on)
    delta_mode: str = "mean"        # mean | calendar
    delta_path: np.ndarray | None = None  # 0/1 for Delta_{t+1}..Delta_{t+H}
    p_neg: float = 0.5
    max_horizon: int = 750
    tolerance: float = DEFAULT_TOLERANCE
    mc_draws: int = 0
    seed: int = 0

    def describe(self) -> dict:
        return {
            "x_mode": self.x_mode,
            "delta_mode": self.delta_mode,
            "p_neg": self.p_neg,
            "tolerance": self.tolerance,
            "mc_draws": self.mc_draws,
        }


@dataclass(frozen=True)
class ForecastState:
    """Filter state at the forecast origin t."""

    sigma: float
    xi: float
    mu: float
    rv: float
    d: float
    xc: float          # x_t - x_bar
    x_bar: float
    delta_bar: float

    @classmethod
    def from_filter(cls, output: FilterOutput, panel: PanelSeries,
                    centered: CenteredCovariates, t: int) -> "ForecastState":
        if not output.valid:
            raise ForecastError("cannot forecast from an invalid filter output")
        if not 0 <= t < panel.T:
            raise ForecastError(f"origin {t} outside the panel")
        return cls(sigma=float(output.sigma[t]), xi=float(output.xi[t]),
                   mu=float(output.mu[t]), rv=float(panel.rv[t]),
                   d=float(panel.sign[t]), xc=float(centered.xc[t]),
                   x_bar=centered.x_bar, delta_bar=centered.delta_bar)

    def validate(self) -> None:
        vals = (self.sigma, self.xi, self.mu, self.rv, self.d, self.xc)
        if not all(np.isfinite(v) for v in vals) or self.mu <= 0 or self.rv <= 0:
            raise ForecastError("forecast origin state is not finite and positive")


@dataclass(frozen=True)
class ForecastPath:
    """Expected-volatility path mu_{t+1..t+H} with its component paths."""

    kind: ModelKind
    horizon: int
    mu: np.ndarray
    sigma: np.ndarray
    xi: np.ndarray
    assumptions: dict
    tolerance: float
    convergence_horizon: int | None
    converged: bool
    mc_mu: np.ndarray | None = None


@dataclass(frozen=True)
class IrfPath:
    """Shocked-minus-baseline forecast differences for a sustained proxy shock."""

    baseline: ForecastPath
    shocked: ForecastPath
    diff: np.ndarray
    shock: float


def convergence_horizon(mu: np.ndarray, tol: float = DEFAULT_TOLERANCE) -> int | None:
    """Smallest h such that every later forecast stays within tol of step h.

    Operationally: forecasts from step h on do not differ by more than tol.
    Returns None when no such step exists within the path (unconverged).
    """
    mu = np.asarray(mu, dtype=float)
    if mu.size < 2:
        raise ForecastError("convergence needs a path of at least two steps")
    # suffix envelope: widest excursion of the remaining path around mu[h];
    # the last step has no later forecasts to check, so it never qualifies
    suffix_max = np.maximum.accumulate(mu[::-1])[::-1]
    suffix_min = np.minimum.accumulate(mu[::-1])[::-1]
    spread = np.maximum(suffix_max - mu, mu - suffix_min)
    hits = np.flatnonzero(spread[:-1] <= tol)
    if hits.size == 0:
        return None
    return int(hits[0]) + 1


def _future_xc(rules: ForecastRules, state: ForecastState, horizon: int) -> np.ndarray:
    """Centered proxy feeding xi_{t+h} for h = 1..H (entry h-1 is x_{t+h-1} - x_bar)."""
    xc = np.empty(horizon)
    xc[0] = state.xc  # x_t is observed at the origin
    if horizon == 1:
        return xc
    if rules.x_mode == "hold":
        xc[1:] = state.xc
    elif rules.x_mode == "path":
        if rules.x_path is None or len(rules.x_path) < horizon - 1:
            raise ForecastError("x_mode='path' requires x_path with at least H-1 levels")
        xc[1:] = np.asarray(rules.x_path[:horizon - 1], dtype=float) - state.x_bar
    else:
        raise ForecastError(f"unknown x rule {rules.x_mode!r}")
    return xc


def _future_dc(rules: ForecastRules, state: ForecastState, horizon: int) -> np.ndarray:
    """Centered announcement dummy for Delta_{t+1}..Delta_{t+H}."""
    if rules.delta_mode == "mean":
        return np.zeros(horizon)
    if rules.delta_mode == "calendar":
        if rules.delta_path is None or len(rules.delta_path) < horizon:
            raise ForecastError("delta_mode='calendar' requires delta_path with H entries")
        return np.asarray(rules.delta_path[:horizon], dtype=float) - state.delta_bar
    raise ForecastError(f"unknown delta rule {rules.delta_mode!r}")


def multi_step_forecast(kind: ModelKind, params: ParamSet, state: ForecastState,
                        horizon: int, rules: ForecastRules | None = None) -> ForecastPath:
    """Expected volatility h = 1..H steps past the origin state."""
    kind = ModelKind(kind)
    rules = rules or ForecastRules()
    if horizon < 1:
        raise ForecastError("horizon must be >= 1")
    if horizon > rules.max_horizon:
        raise ForecastError(f"horizon {horizon} exceeds the configured maximum "
                            f"{rules.max_horizon}")
    state.validate()

    xc = _future_xc(rules, state, horizon)
    dc = _future_dc(rules, state, horizon)
    o, a, b, g = params.omega, params.alpha, params.beta, params.gamma
    de, ph, ps = params.delta, params.phi, params.psi
    pneg = rules.p_neg

    sigma = np.empty(horizon)
    xi = np.empty(horizon)
    mu = np.empty(horizon)
    for h in range(horizon):
        if kind in (ModelKind.AMEM, ModelKind.XMAP):
            if h == 0:
                m = o + a * state.rv + b * state.mu + g * state.d * state.rv \
                    + de * xc[0] + ph * dc[0]
            else:
                m = o + (a + b + g * pneg) * mu[h - 1] + de * xc[h] + ph * dc[h]
            sigma[h] = mu[h] = m
            xi[h] = 0.0
        else:
            if h == 0:
                sigma[h] = o + a * state.rv + b * state.sigma + g * state.d * state.rv
                xi_prev = state.xi
            else:
                sigma[h] = o + (a + g * pneg) * mu[h - 1] + b * sigma[h - 1]
                xi_prev = xi[h - 1]
            drive = de * xc[h] + ph * dc[h]
            if kind is ModelKind.PMAP:
                xi[h] = (1.0 - ps) + drive + ps * xi_prev
                mu[h] = sigma[h] * xi[h]
            elif kind is ModelKind.LMAP:
                xi[h] = drive + ps * xi_prev
                mu[h] = 2.0 * sigma[h] * expit(xi[h])
            else:
                xi[h] = drive + ps * xi_prev
                mu[h] = sigma[h] + xi[h]
        if not np.isfinite(mu[h]) or mu[h] <= 0.0:
            raise ForecastError(f"forecast positivity violated at step {h + 1}")

    conv = convergence_horizon(mu, rules.tolerance) if horizon >= 2 else None
    mc = _mc_forecast(kind, params, state, horizon, rules, xc, dc) if rules.mc_draws > 0 else None
    return ForecastPath(kind=kind, horizon=horizon, mu=mu, sigma=sigma, xi=xi,
                        assumptions=rules.describe(), tolerance=rules.tolerance,
                        convergence_horizon=conv, converged=conv is not None,
                        mc_mu=mc)


def _mc_forecast(kind: ModelKind, params: ParamSet, state: ForecastState,
                 horizon: int, rules: ForecastRules,
                 xc: np.ndarray, dc: np.ndarray) -> np.ndarray:
    """Average simulated paths (error and sign draws) under the same rules."""
    rng = np.random.default_rng(rules.seed)
    n = rules.mc_draws
    o, a, b, g = params.omega, params.alpha, params.beta, params.gamma
    de, ph, ps = params.delta, params.phi, params.psi

    sigma = np.full(n, state.sigma)
    mu = np.full(n, state.mu)
    rv = np.full(n, state.rv)
    d = np.full(n, state.d)
    xi_prev = state.xi
    out = np.empty(horizon)
    for h in range(horizon):
        drive = de * xc[h] + ph * dc[h]
        if kind in (ModelKind.AMEM, ModelKind.XMAP):
            mu = o + a * rv + b * mu + g * d * rv + drive
            sigma = mu
            xi = 0.0
        else:
            sigma = o + a * rv + b * sigma + g * d * rv
            if kind is ModelKind.PMAP:
                xi = (1.0 - ps) + drive + ps * xi_prev
                mu = sigma * xi
            elif kind is ModelKind.LMAP:
                xi = drive + ps * xi_prev
                mu = 2.0 * sigma * expit(xi)
            else:
                xi = drive + ps * xi_prev
                mu = sigma + xi
            xi_prev = xi
        out[h] = float(np.mean(mu))
        rv = mu * rng.gamma(params.theta, 1.0 / params.theta, size=n)
        d = (rng.random(n) < rules.p_neg).astype(float)
    return out


def impulse_response(kind: ModelKind, params: ParamSet, state: ForecastState,
                     horizon: int, shock: float,
                     rules: ForecastRules | None = None) -> IrfPath:
    """Forecast difference from a sustained shift of the policy proxy.

    The shocked path holds x at its origin value plus the shock (or shifts
    a user-supplied path by the shock); everything else is shared with the
    baseline. Raises when the shocked path violates positivity, naming the
    offending step.
    """
    rules = rules or ForecastRules()
    baseline = multi_step_forecast(kind, params, state, horizon, rules)
    shocked_state = replace(state, xc=state.xc + shock)
    shocked_rules = rules
    if rules.x_mode == "path":
        shocked_rules = replace(rules, x_path=np.asarray(rules.x_path, dtype=float) + shock)
    shocked = multi_step_forecast(kind, params, shocked_state, horizon, shocked_rules)
    return IrfPath(baseline=baseline, shocked=shocked,
                   diff=shocked.mu - baseline.mu, shock=float(shock))


@dataclass(frozen=True)
class MarginalEffect:
    """Response of mu_{t+tau} to a unit move of a policy variable.

    kappa is delta for the (lagged) implementation proxy and phi for the
    announcement dummy. Constant for the additive kinds; a per-day series
    plus its average for the multiplicative kinds, where announcements
    average over announcement days only.
    """

    kind: ModelKind
    variable: str
    kappa: float
    tau: int
    value: float
    series: np.ndarray | None = None
    anchor_indices: np.ndarray | None = None


def marginal_effects(kind: ModelKind, params: ParamSet, output: FilterOutput,
                     variable: str, tau: int,
                     panel: PanelSeries | None = None) -> MarginalEffect:
    """Closed-form marginal effect of x_{t-1} or of Delta_t on mu_{t+tau}.

    MAP: kappa*psi^tau; XMAP: kappa*beta^tau;
    LMAP: 2*sigma_{t+tau}*kappa*psi^tau*expit(xi)*(1-expit(xi));
    PMAP: kappa*psi^tau*sigma_{t+tau}.

    For LMAP/PMAP the effect is evaluated on each anchor day of the filter
    output (announcement days only for the dummy) and averaged. panel is
    required for variable='delta' to locate the announcement days.
    """
    kind = ModelKind(kind)
    if variable not in ("x", "delta"):
        raise ForecastError(f"unknown policy variable {variable!r}")
    if tau < 0:
        raise ForecastError("tau must be >= 0")
    kappa = params.delta if variable == "x" else params.phi

    if kind in (ModelKind.AMEM, ModelKind.XMAP):
        return MarginalEffect(kind, variable, kappa, tau,
                              value=kappa * params.beta ** tau)
    if kind is ModelKind.MAP:
        return MarginalEffect(kind, variable, kappa, tau,
                              value=kappa * params.psi ** tau)

    T = output.mu.size
    if variable == "delta":
        if panel is None:
            raise ForecastError("panel is required to locate announcement days")
        anchors = np.flatnonzero(panel.delta == 1.0)
        anchors = anchors[anchors + tau < T]
        if anchors.size == 0:
            raise ForecastError("no announcement days in the evaluation window")
    else:
        # x_{t-1} first moves mu_t at t = 1 (it needs a lagged value)
        anchors = np.arange(1, T - tau)
    resp = anchors + tau
    scale = params.psi ** tau
    if kind is ModelKind.LMAP:
        p = expit(output.xi[resp])
        series = 2.0 * output.sigma[resp] * kappa * scale * p * (1.0 - p)
    else:
        series = kappa * scale * output.sigma[resp]
    return MarginalEffect(kind, variable, kappa, tau,
                          value=float(np.mean(series)), series=series,
                          anchor_indices=anchors)


def forecast_to_unconditional(kind: ModelKind, params: ParamSet) -> float:
    """Limit of the default-rule forecast with covariates at their means."""
    return unconditional_mean(kind, params)
