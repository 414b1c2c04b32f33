"""Model kinds and deterministic filtering recursions.

Five specifications share a GARCH-type base component
``sigma_t = omega + alpha*rv_{t-1} + beta*sigma_{t-1} + gamma*D_{t-1}*rv_{t-1}``
and differ in how the policy component xi enters expected volatility mu:

* AMEM  -- no policy terms (XMAP with delta = phi = 0).
* XMAP  -- single recursion on mu with the centered covariates added
           (equivalently: psi tied to beta).
* MAP   -- additive: mu = sigma + xi, with
           ``xi_t = delta*xc_{t-1} + phi*dc_t + psi*xi_{t-1}``.
* LMAP  -- multiplicative through a logistic: mu = 2*sigma*expit(xi).
* PMAP  -- multiplicative with a unit-mean AR(1):
           ``xi_t = (1-psi) + delta*xc_{t-1} + phi*dc_t + psi*xi_{t-1}``,
           mu = sigma*xi.

The implementation proxy enters lagged (its random-walk expectation), the
announcement dummy enters contemporaneously (announcements are scheduled in
advance), and both are centered with estimation-window means.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from .errors import ModelError
from .panel import CenteredCovariates, PanelSeries


class ModelKind(str, Enum):
    AMEM = "AMEM"
    XMAP = "XMAP"
    MAP = "MAP"
    LMAP = "LMAP"
    PMAP = "PMAP"

    @property
    def uses_policy(self) -> bool:
        return self is not ModelKind.AMEM

    @property
    def has_policy_state(self) -> bool:
        """True when psi is a free parameter (separate xi recursion)."""
        return self in (ModelKind.MAP, ModelKind.LMAP, ModelKind.PMAP)


FREE_PARAMS = {
    ModelKind.AMEM: ("omega", "alpha", "beta", "gamma", "theta"),
    ModelKind.XMAP: ("omega", "alpha", "beta", "gamma", "delta", "phi", "theta"),
    ModelKind.MAP: ("omega", "alpha", "beta", "gamma", "delta", "phi", "psi", "theta"),
    ModelKind.LMAP: ("omega", "alpha", "beta", "gamma", "delta", "phi", "psi", "theta"),
    ModelKind.PMAP: ("omega", "alpha", "beta", "gamma", "delta", "phi", "psi", "theta"),
}


def n_free_params(kind: ModelKind) -> int:
    return len(FREE_PARAMS[kind])


@dataclass(frozen=True)
class ParamSet:
    """Parameter vector shared by all model kinds.

    theta is the Gamma shape of the multiplicative error (unit mean,
    variance 1/theta). delta is the implementation-proxy coefficient
    (expected negative), phi the announcement coefficient (expected
    positive), psi the persistence of the policy component.
    """

    omega: float
    alpha: float
    beta: float
    gamma: float
    delta: float = 0.0
    phi: float = 0.0
    psi: float = 0.0
    theta: float = 1.0

    @property
    def persistence(self) -> float:
        """alpha + beta + gamma/2, the decay rate of the base component."""
        return self.alpha + self.beta + self.gamma / 2.0

    def violations(self, kind: ModelKind) -> list[str]:
        """Constraint violations of this vector under the given kind."""
        problems = []
        if self.omega < 0:
            problems.append("omega < 0")
        if self.alpha < 0:
            problems.append("alpha < 0")
        if self.beta < 0:
            problems.append("beta < 0")
        if self.theta <= 0:
            problems.append("theta <= 0")
        if self.persistence >= 1:
            problems.append("alpha + beta + gamma/2 >= 1")
        if kind is ModelKind.AMEM:
            if self.delta != 0 or self.phi != 0 or self.psi != 0:
                problems.append("AMEM requires delta = phi = psi = 0")
        elif kind is ModelKind.XMAP:
            if self.psi != 0:
                problems.append("XMAP has no free psi (tied to beta); store 0")
        else:
            if not 0 < self.psi < self.beta:
                problems.append("component models require 0 < psi < beta")
            if self.psi >= 1:
                problems.append("psi >= 1")
        return problems

    def require_valid(self, kind: ModelKind) -> None:
        problems = self.violations(kind)
        if problems:
            raise ModelError(f"invalid {kind.value} parameters: {'; '.join(problems)}")

    def to_vector(self, kind: ModelKind) -> np.ndarray:
        return np.array([getattr(self, name) for name in FREE_PARAMS[kind]], dtype=float)

    @classmethod
    def from_vector(cls, kind: ModelKind, values) -> "ParamSet":
        return cls(**dict(zip(FREE_PARAMS[kind], map(float, values))))

    def as_dict(self, kind: ModelKind | None = None) -> dict:
        names = FREE_PARAMS[kind] if kind is not None else FREE_PARAMS[ModelKind.MAP]
        return {name: float(getattr(self, name)) for name in names}


@dataclass(frozen=True)
class FilterOutput:
    """Per-day components from a filtering pass.

    For MAP, mu = sigma + xi holds exactly; for LMAP/PMAP mu equals the
    respective product form; for AMEM/XMAP the decomposition is degenerate
    (sigma aliases mu, xi is zero). eps are the standardized residuals
    rv/mu. valid is False when any mu is non-positive or non-finite, with
    first_invalid pointing at the first offending index.
    """

    kind: ModelKind
    sigma: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    eps: np.ndarray
    valid: bool
    first_invalid: int | None = None


def _ar1_path(inputs: np.ndarray, coef: float, init: float) -> np.ndarray:
    """y_t = inputs_t + coef*y_{t-1} for t >= 1 with y_0 = init."""
    out = np.empty(inputs.size + 1)
    out[0] = init
    if inputs.size:
        out[1:] = lfilter([1.0], [1.0, -coef], inputs, zi=np.array([coef * init]))[0]
    return out


def filter_panel(kind: ModelKind, params: ParamSet, panel: PanelSeries,
                 centered: CenteredCovariates | None = None,
                 init_level: float | None = None) -> FilterOutput:
    """Run the filtering recursion of a model kind over a panel.

    Parameters
    ----------
    centered : CenteredCovariates, optional
        Centered policy covariates. None is treated as covariates held at
        their means (zero centered values), which is all AMEM ever needs.
    init_level : float, optional
        Value of the base component (and mu) on the first day. Defaults to
        the sample mean of rv over the panel, the unconditional target of
        the recursion. xi starts at its own fixed point under centered
        inputs: 0 for MAP/LMAP, 1 for PMAP.

    The first observation only seeds the recursion; components for
    t >= 2 use lagged rv, the lagged sign dummy, the lagged centered proxy
    and the contemporaneous centered announcement dummy.
    """
    if not (params.omega >= 0 and params.alpha >= 0 and params.beta >= 0 and params.theta > 0):
        raise ModelError("filter requires omega, alpha, beta >= 0 and theta > 0")
    rv = panel.rv
    d = panel.sign
    T = panel.T
    if init_level is None:
        init_level = float(np.mean(rv))
    if centered is None:
        xc = np.zeros(T)
        dc = np.zeros(T)
    else:
        xc, dc = centered.xc, centered.dc
        if xc.shape != (T,) or dc.shape != (T,):
            raise ModelError("centered covariates do not span the panel")

    base_in = params.omega + (params.alpha + params.gamma * d[:-1]) * rv[:-1]

    if kind in (ModelKind.AMEM, ModelKind.XMAP):
        mu_in = base_in + params.delta * xc[:-1] + params.phi * dc[1:]
        mu = _ar1_path(mu_in, params.beta, init_level)
        sigma = mu
        xi = np.zeros(T)
    else:
        sigma = _ar1_path(base_in, params.beta, init_level)
        xi_in = params.delta * xc[:-1] + params.phi * dc[1:]
        if kind is ModelKind.PMAP:
            xi_in = xi_in + (1.0 - params.psi)
            xi = _ar1_path(xi_in, params.psi, 1.0)
            mu = sigma * xi
        elif kind is ModelKind.LMAP:
            xi = _ar1_path(xi_in, params.psi, 0.0)
            mu = 2.0 * sigma * expit(xi)
        else:
            xi = _ar1_path(xi_in, params.psi, 0.0)
            mu = sigma + xi

    bad = ~np.isfinite(mu) | (mu <= 0.0)
    if bad.any():
        first_bad = int(np.argmax(bad))
        eps = np.full(T, np.nan)
        return FilterOutput(kind, sigma, xi, mu, eps, valid=False, first_invalid=first_bad)
    eps = rv / mu
    return FilterOutput(kind, sigma, xi, mu, eps, valid=True)


def unconditional_mean(kind: ModelKind, params: ParamSet) -> float:
    """Long-run expected volatility, omega / (1 - alpha - beta - gamma/2).

    The same expression holds for every kind: the policy terms are centered
    (zero mean), and the multiplicative factors have unit mean at the fixed
    point of the xi recursion (expit(0) doubles to 1; the PMAP AR(1)
    settles at 1).
    """
    persistence = params.persistence
    if persistence >= 1:
        raise ModelError(f"persistence {persistence:.6g} >= 1, no unconditional mean")
    return params.omega / (1.0 - persistence)


def policy_share(output: FilterOutput) -> tuple[np.ndarray, float]:
    """Share of expected volatility attributed to the policy component.

    Defined for the additive decomposition only: xi_t / mu_t per day plus
    the sample average. Other kinds have no additive share and raise.
    """
    if output.kind is not ModelKind.MAP:
        raise ModelError("policy share is defined for the additive (MAP) decomposition only")
    if not output.valid:
        raise ModelError("policy share requires a valid filter output")
    share = output.xi / output.mu
    return share, float(np.mean(share))
