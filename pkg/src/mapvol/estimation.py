"""Gamma quasi-maximum-likelihood estimation with robust standard errors.

The error term is Gamma(theta, 1/theta), giving per-observation
log-likelihood contributions

    theta*ln(theta) - ln(Gamma(theta)) + (theta-1)*ln(rv_t)
        - theta*ln(mu_t) - theta*rv_t/mu_t

summed over t >= 2 of the estimation window (the first observation seeds
the recursion). QML makes the estimators consistent and asymptotically
normal under correct specification of the conditional mean, whatever the
true error shape; the sandwich covariance below shields the standard
errors against it.

Optimization runs on an unconstrained reparameterization:

    omega = exp(u0), theta = exp(u_theta), delta/phi unconstrained,
    (alpha, beta, gamma/2) = softmax-style map onto the open region
        alpha, beta, gamma >= 0, alpha + beta + gamma/2 < 1,
    psi = beta * expit(u_psi)  (identification: 0 < psi < beta).

Filter outputs violating positivity get a -inf likelihood, so the
optimizer rejects those points and the feasible region stays implicit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.special import expit, gammaln, logit
from scipy.stats import chi2

from .errors import DataError, EstimationError
from .models import (FREE_PARAMS, FilterOutput, ModelKind, ParamSet,
                     filter_panel, n_free_params)
from .panel import CenteredCovariates, PanelSeries, center_covariates

logger = logging.getLogger("mapvol.estimation")

_STEP = float(np.cbrt(np.finfo(float).eps))  # ~6.06e-6, central-difference step scale


# ---------------------------------------------------------------------------
# likelihood

def gamma_loglik_terms(output: FilterOutput, theta: float, panel: PanelSeries) -> np.ndarray:
    """Per-observation contributions for t >= 2; requires a valid filter."""
    if not output.valid:
        raise EstimationError("filter output is invalid; no likelihood contributions")
    rv = panel.rv[1:]
    mu = output.mu[1:]
    return (theta * np.log(theta) - gammaln(theta)
            + (theta - 1.0) * np.log(rv) - theta * np.log(mu) - theta * rv / mu)


def gamma_loglik(output: FilterOutput, theta: float, panel: PanelSeries) -> float:
    """Total Gamma log-likelihood over t >= 2; -inf for invalid filters."""
    if theta <= 0:
        raise EstimationError("theta must be positive")
    if not output.valid:
        return float("-inf")
    return float(np.sum(gamma_loglik_terms(output, theta, panel)))


def aic_bic(loglik: float, T: int, k: int) -> tuple[float, float]:
    """Per-observation information criteria.

    T is the window length including the observation that seeds the
    recursion; this normalization is what makes the criteria comparable
    across kinds at the reported log-likelihoods.
    """
    aic = (-2.0 * loglik + 2.0 * k) / T
    bic = (-2.0 * loglik + k * np.log(T)) / T
    return float(aic), float(bic)


# ---------------------------------------------------------------------------
# reparameterization

def to_unconstrained(kind: ModelKind, params: ParamSet) -> np.ndarray:
    """Map an interior parameter point to the unconstrained space."""
    m = params.persistence
    r = 1.0 - m
    if not (params.omega > 0 and params.alpha > 0 and params.beta > 0
            and params.gamma > 0 and r > 0 and params.theta > 0):
        raise EstimationError("transform requires a strictly interior parameter point")
    u = [np.log(params.omega),
         np.log(params.alpha / r),
         np.log(params.beta / r),
         np.log((params.gamma / 2.0) / r)]
    if kind.uses_policy:
        u += [params.delta, params.phi]
    if kind.has_policy_state:
        if not 0 < params.psi < params.beta:
            raise EstimationError("transform requires 0 < psi < beta")
        u.append(logit(params.psi / params.beta))
    u.append(np.log(params.theta))
    return np.array(u, dtype=float)


def to_natural(kind: ModelKind, u: np.ndarray) -> ParamSet:
    """Inverse of to_unconstrained; exact round trip on the interior."""
    with np.errstate(over="ignore"):
        omega = np.exp(u[0])
        za, zb, zg = np.exp(u[1]), np.exp(u[2]), np.exp(u[3])
        s = 1.0 + za + zb + zg
        alpha, beta, gamma = za / s, zb / s, 2.0 * zg / s
        pos = 4
        delta = phi = psi = 0.0
        if kind.uses_policy:
            delta, phi = u[pos], u[pos + 1]
            pos += 2
        if kind.has_policy_state:
            psi = beta * expit(u[pos])
            pos += 1
        theta = np.exp(u[pos])
    return ParamSet(omega=float(omega), alpha=float(alpha), beta=float(beta),
                    gamma=float(gamma), delta=float(delta), phi=float(phi),
                    psi=float(psi), theta=float(theta))


def _to_natural_diag(kind: ModelKind, u: np.ndarray) -> ParamSet:
    """Variant for the diagnostic refit: psi = expit(u_psi) in (0, 1)."""
    ps = to_natural(kind, u)
    if kind.has_policy_state:
        pos = 6
        return replace(ps, psi=float(expit(u[pos])))
    return ps


# ---------------------------------------------------------------------------
# numerical derivatives

def central_gradient(f, x: np.ndarray, step_scale: float = _STEP) -> np.ndarray:
    """Central finite-difference gradient with steps scaled by max(|x_i|, 1)."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    h = step_scale * np.maximum(np.abs(x), 1.0)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return g


def central_hessian(f, x: np.ndarray, step_scale: float = _STEP) -> np.ndarray:
    """Central second differences, step = step_scale * max(|x_i|, 1)."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = step_scale * np.maximum(np.abs(x), 1.0)
    H = np.empty((k, k))
    f0 = f(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej)
                                 - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
    return H


def sandwich_covariance(loglik_terms, theta_hat: np.ndarray,
                        names: tuple | None = None) -> np.ndarray:
    """QML sandwich covariance H^-1 S H^-1 / n from numerical derivatives.

    Parameters
    ----------
    loglik_terms : callable
        Maps a parameter vector to the per-observation log-likelihood
        contributions (length n).
    theta_hat : array
        Interior optimum in the natural parameter space.
    names : tuple of str, optional
        Parameter names used when reporting a flat direction.

    H is the Hessian of the mean log-likelihood, S the average outer
    product of per-observation scores; no degrees-of-freedom adjustment is
    applied beyond dividing by n.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    k = theta_hat.size
    names = names if names is not None else tuple(f"p{i}" for i in range(k))
    terms0 = np.asarray(loglik_terms(theta_hat), dtype=float)
    n = terms0.size

    def f_mean(v):
        return float(np.mean(loglik_terms(v)))

    H = central_hessian(f_mean, theta_hat)
    evals, evecs = np.linalg.eigh(H)
    scale = float(np.max(np.abs(evals)))
    if scale == 0.0 or np.min(np.abs(evals)) < 1e-10 * scale:
        flat = evecs[:, int(np.argmin(np.abs(evals)))]
        worst = names[int(np.argmax(np.abs(flat)))]
        raise EstimationError(
            f"singular Hessian: the likelihood is flat along '{worst}'")

    h = _STEP * np.maximum(np.abs(theta_hat), 1.0)
    scores = np.empty((n, k))
    for i in range(k):
        e = np.zeros(k)
        e[i] = h[i]
        scores[:, i] = (np.asarray(loglik_terms(theta_hat + e))
                        - np.asarray(loglik_terms(theta_hat - e))) / (2.0 * h[i])
    S = scores.T @ scores / n

    Hinv = np.linalg.inv(H)
    cov = Hinv @ S @ Hinv / n
    return cov


# ---------------------------------------------------------------------------
# diagnostics

@dataclass(frozen=True)
class LjungBoxResult:
    stats: dict
    pvalues: dict


def ljung_box(eps: np.ndarray, lags) -> LjungBoxResult:
    """Portmanteau test Q(m) = T(T+2) * sum_j rho_j^2 / (T-j), chi2(m) p-values."""
    eps = np.asarray(eps, dtype=float)
    lags = [int(m) for m in lags]
    T = eps.size
    if T <= max(lags):
        raise EstimationError("residual series shorter than the largest lag")
    centered = eps - eps.mean()
    denom = float(np.sum(centered ** 2))
    if denom == 0.0:
        raise EstimationError("constant residual series: autocorrelation undefined")
    max_lag = max(lags)
    rho = np.array([np.sum(centered[:-j] * centered[j:]) / denom for j in range(1, max_lag + 1)])
    stats, pvalues = {}, {}
    for m in lags:
        q = T * (T + 2.0) * float(np.sum(rho[:m] ** 2 / (T - np.arange(1, m + 1))))
        stats[m] = q
        pvalues[m] = float(chi2.sf(q, df=m))
    return LjungBoxResult(stats=stats, pvalues=pvalues)


# ---------------------------------------------------------------------------
# fitting

@dataclass(frozen=True)
class FitOptions:
    """Knobs for the QML optimizer; defaults match routine use."""

    starts: int = 5               # optimization starts incl. moment + warm start
    seed: int = 0                 # jitter stream for the extra starts
    max_iter: int = 400
    gtol: float = 1e-7            # BFGS gradient tolerance on the mean loglik
    grad_tol: float = 1e-3        # interior-optimum check for standard errors
    min_window: int = 50
    lb_lags: tuple = (1, 5, 10)
    constrain_psi: bool = True    # False: diagnostic refit with psi in (0, 1)
    warm_start: bool = True       # seed policy kinds from the fitted AMEM
    compute_se: bool = True


@dataclass(frozen=True)
class ConvergenceReport:
    n_starts: int
    best_start: int
    method: str
    iterations: int
    grad_norm: float
    success: bool
    message: str
    near_boundary: tuple


@dataclass(frozen=True)
class EstimationResult:
    """Point estimates with robust standard errors and diagnostics."""

    kind: ModelKind
    params: ParamSet
    se: dict
    loglik: float
    T: int
    k: int
    aic: float
    bic: float
    lb_stats: dict
    lb_pvalues: dict
    in_sample_mse: float
    in_sample_qlike: float
    convergence: ConvergenceReport
    window: tuple
    init_level: float
    x_bar: float
    delta_bar: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "estimates": self.params.as_dict(self.kind),
            "robust_se": {k: float(v) for k, v in self.se.items()},
            "loglik": self.loglik,
            "T": self.T,
            "k": self.k,
            "aic": self.aic,
            "bic": self.bic,
            "ljung_box": {
                "stats": {str(m): v for m, v in self.lb_stats.items()},
                "pvalues": {str(m): v for m, v in self.lb_pvalues.items()},
            },
            "in_sample": {"mse": self.in_sample_mse, "qlike": self.in_sample_qlike},
            "convergence": {
                "n_starts": self.convergence.n_starts,
                "best_start": self.convergence.best_start,
                "method": self.convergence.method,
                "iterations": self.convergence.iterations,
                "grad_norm": self.convergence.grad_norm,
                "success": self.convergence.success,
                "message": self.convergence.message,
                "near_boundary": list(self.convergence.near_boundary),
            },
            "window": list(self.window),
            "init_level": self.init_level,
            "x_bar": self.x_bar,
            "delta_bar": self.delta_bar,
        }


def moment_start(kind: ModelKind, panel: PanelSeries,
                 centered: CenteredCovariates) -> ParamSet:
    """Method-of-moments style initial values.

    The base part targets Table-like magnitudes (alpha .15, beta .7, gamma
    .05, omega from the sample mean at persistence .9); theta comes from
    the mean/variance ratio of the implied standardized residuals.
    """
    m = float(np.mean(panel.rv))
    base = ParamSet(omega=m * 0.1, alpha=0.15, beta=0.70, gamma=0.05,
                    psi=0.07 if kind.has_policy_state else 0.0, theta=1.0)
    fo = filter_panel(kind, base, panel, centered, init_level=m)
    eps = fo.eps[1:]
    var = float(np.var(eps))
    theta0 = float(np.mean(eps)) ** 2 / var if var > 0 else 4.0
    theta0 = min(max(theta0, 0.5), 500.0)
    return replace(base, theta=theta0)


def objective_and_gradient(kind: ModelKind, panel: PanelSeries,
                           centered: CenteredCovariates, init_level: float,
                           constrain_psi: bool = True):
    """Negative mean log-likelihood on the unconstrained space, and its gradient.

    The gradient is the same central finite-difference rule the optimizer
    consumes, exposed so it can be checked against an independent
    differencing of the objective.
    """
    n = panel.T - 1
    decode = to_natural if constrain_psi else _to_natural_diag

    def fun(u):
        params = decode(kind, u)
        vec = params.to_vector(kind)
        if not np.all(np.isfinite(vec)):
            return float("inf")
        fo = filter_panel(kind, params, panel, centered, init_level=init_level)
        ll = gamma_loglik(fo, params.theta, panel)
        if not np.isfinite(ll):
            return float("inf")
        return -ll / n

    def grad(u):
        return central_gradient(fun, np.asarray(u, dtype=float))

    return fun, grad


def _jitter(u: np.ndarray, rng: np.random.Generator, scale: float = 0.25) -> np.ndarray:
    return u + rng.normal(0.0, scale, size=u.size)


def _near_boundary_flags(kind: ModelKind, params: ParamSet) -> tuple:
    flags = []
    if params.persistence > 0.995:
        flags.append("persistence near 1")
    if kind.has_policy_state:
        ratio = params.psi / params.beta
        if ratio > 0.99:
            flags.append("psi near beta")
        if ratio < 1e-4:
            flags.append("psi near 0")
    if params.alpha < 1e-6:
        flags.append("alpha near 0")
    if params.gamma < 1e-6:
        flags.append("gamma near 0")
    return tuple(flags)


def _loglik_terms_fn(kind: ModelKind, panel: PanelSeries, centered: CenteredCovariates,
                     init_level: float):
    names = FREE_PARAMS[kind]

    def terms(vec):
        params = ParamSet.from_vector(kind, vec)
        fo = filter_panel(kind, params, panel, centered, init_level=init_level)
        if not fo.valid:
            raise EstimationError("invalid filter at a perturbed point; optimum too close to the boundary")
        return gamma_loglik_terms(fo, params.theta, panel)

    return terms, names


def robust_se(kind: ModelKind, params: ParamSet, panel: PanelSeries,
              window: tuple[int, int] | None = None,
              grad_tol: float = 1e-3) -> dict:
    """Sandwich standard errors at an interior optimum.

    Raises when the supplied point is not an optimum (gradient of the mean
    log-likelihood above grad_tol) or when the Hessian is singular.
    """
    start, stop = window if window is not None else (0, panel.T)
    est = panel.slice(start, stop)
    centered = center_covariates(est)
    init = float(np.mean(est.rv))
    terms, names = _loglik_terms_fn(kind, est, centered, init)
    vec = params.to_vector(kind)

    def f_mean(v):
        return float(np.mean(terms(v)))

    g = central_gradient(f_mean, vec)
    gnorm = float(np.max(np.abs(g)))
    if gnorm > grad_tol:
        raise EstimationError(
            f"not an interior optimum: max |gradient| {gnorm:.3g} > {grad_tol:g}")
    cov = sandwich_covariance(terms, vec, names)
    diag = np.diag(cov)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise EstimationError("sandwich covariance has a non-positive diagonal")
    return dict(zip(names, np.sqrt(diag)))


def fit(kind: ModelKind, panel: PanelSeries, window: tuple[int, int] | None = None,
        options: FitOptions | None = None) -> EstimationResult:
    """Estimate a model kind by Gamma QML over an estimation window.

    Runs a quasi-Newton search from several starting points on the
    transformed space (a derivative-free fallback catches the rare start
    where line searches fail), keeps the best likelihood, and reports
    untransformed estimates, sandwich standard errors, Ljung-Box
    diagnostics and per-observation information criteria. Policy kinds add
    a start at the fitted AMEM with zero policy coefficients, so their
    reported likelihood can never fall below the nested one.
    """
    kind = ModelKind(kind)
    options = options or FitOptions()
    start, stop = window if window is not None else (0, panel.T)
    if stop - start < options.min_window:
        raise DataError(f"estimation window has {stop - start} rows; "
                        f"minimum is {options.min_window}")
    est = panel.slice(start, stop)
    centered = center_covariates(est)
    init_level = float(np.mean(est.rv))
    Tw = est.T
    n = Tw - 1

    fun, grad = objective_and_gradient(kind, est, centered, init_level,
                                       constrain_psi=options.constrain_psi)
    encode = to_unconstrained if options.constrain_psi else _encode_diag
    rng = np.random.default_rng(options.seed)

    starts = [encode(kind, moment_start(kind, est, centered))]
    if kind.uses_policy and options.warm_start:
        warm_opts = replace(options, warm_start=False, compute_se=False)
        amem = fit(ModelKind.AMEM, panel, window=(start, stop), options=warm_opts)
        a = amem.params
        warm = ParamSet(omega=max(a.omega, 1e-8), alpha=max(a.alpha, 1e-8),
                        beta=max(a.beta, 1e-8), gamma=max(a.gamma, 1e-8),
                        psi=0.1 * max(a.beta, 1e-8) if kind.has_policy_state else 0.0,
                        theta=a.theta)
        starts.append(encode(kind, warm))
    while len(starts) < max(options.starts, 1):
        starts.append(_jitter(starts[0], rng))

    candidates = []
    for i, u0 in enumerate(starts):
        res = optimize.minimize(fun, u0, jac=grad, method="BFGS",
                                options={"gtol": options.gtol, "maxiter": options.max_iter})
        method = "BFGS"
        if not np.isfinite(res.fun) or res.fun > fun(u0):
            res = optimize.minimize(fun, u0, method="Nelder-Mead",
                                    options={"maxiter": 4000, "xatol": 1e-8, "fatol": 1e-10})
            method = "Nelder-Mead"
        if np.isfinite(res.fun):
            candidates.append((float(res.fun), i, res, method))
    if not candidates:
        raise EstimationError(f"all {len(starts)} starting points failed for {kind.value}")

    best_fun, best_i, best, best_method = min(candidates, key=lambda c: (c[0], c[1]))
    u_hat = np.asarray(best.x, dtype=float)
    decode = to_natural if options.constrain_psi else _to_natural_diag
    params = decode(kind, u_hat)
    loglik = -best_fun * n
    gnorm = float(np.max(np.abs(grad(u_hat))))
    report = ConvergenceReport(
        n_starts=len(starts), best_start=best_i, method=best_method,
        iterations=int(getattr(best, "nit", -1)), grad_norm=gnorm,
        success=bool(best.success) and gnorm < options.grad_tol,
        message=str(best.message),
        near_boundary=_near_boundary_flags(kind, params),
    )
    if not report.success:
        logger.warning("%s fit: %s (grad norm %.3g)", kind.value, report.message, gnorm)

    fo = filter_panel(kind, params, est, centered, init_level=init_level)
    if not fo.valid:
        raise EstimationError(f"{kind.value} optimum produced an invalid filter")
    lb = ljung_box(fo.eps[1:], options.lb_lags)
    k = n_free_params(kind)
    aic, bic = aic_bic(loglik, Tw, k)
    err = est.rv[1:] - fo.mu[1:]
    ratio = est.rv[1:] / fo.mu[1:]
    in_mse = float(np.mean(err ** 2))
    in_qlike = float(np.mean(ratio - np.log(ratio) - 1.0))

    se = {}
    if options.compute_se:
        se = robust_se(kind, params, panel, window=(start, stop),
                       grad_tol=options.grad_tol)

    return EstimationResult(
        kind=kind, params=params, se=se, loglik=loglik, T=Tw, k=k,
        aic=aic, bic=bic, lb_stats=lb.stats, lb_pvalues=lb.pvalues,
        in_sample_mse=in_mse, in_sample_qlike=in_qlike,
        convergence=report, window=(start, stop), init_level=init_level,
        x_bar=centered.x_bar, delta_bar=centered.delta_bar,
    )


def _encode_diag(kind: ModelKind, params: ParamSet) -> np.ndarray:
    """Encoder matching _to_natural_diag (psi free in (0, 1))."""
    u = to_unconstrained(kind, replace(params, psi=0.5 * params.beta)
                         if kind.has_policy_state else params)
    if kind.has_policy_state:
        u[6] = logit(min(max(params.psi, 1e-8), 1 - 1e-8))
    return u
