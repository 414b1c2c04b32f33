"""Out-of-sample evaluation: losses and the model confidence set.

The out-of-sample design is a fixed split: each model is estimated once on
the pre-split window, then one-step-ahead forecasts over the evaluation
window use realized data through t-1 (the filter keeps running on known
covariates; announcements are scheduled in advance, the proxy enters
lagged). Per-day losses are MSE and QLike, both consistent for ranking
conditional-mean forecasts of a positive variable.

The model confidence set eliminates models iteratively: the range
statistic over studentized pairwise mean loss differentials is compared
with its stationary-bootstrap distribution; while equivalence is rejected
the worst model leaves the set. Reported p-values are the running maximum
of elimination p-values, so the surviving set at any level is nested.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, EvaluationError
from .estimation import EstimationResult, FitOptions, fit
from .models import ModelKind, filter_panel
from .panel import PanelSeries, center_covariates

logger = logging.getLogger("mapvol.evaluation")

LOSS_NAMES = ("MSE", "QLike")


def losses(forecasts: np.ndarray, realized: np.ndarray, kind: str = "MSE") -> np.ndarray:
    """Per-day forecast losses.

    MSE_t = (rv_t - mu_t)^2; QLike_t = rv_t/mu_t - ln(rv_t/mu_t) - 1,
    which is nonnegative and minimized at a perfect forecast.
    """
    f = np.asarray(forecasts, dtype=float)
    r = np.asarray(realized, dtype=float)
    if f.shape != r.shape:
        raise EvaluationError(f"length mismatch: {f.shape} vs {r.shape}")
    if np.any(r <= 0):
        raise EvaluationError("realized values must be positive")
    if kind == "MSE":
        return (r - f) ** 2
    if kind == "QLike":
        if np.any(f <= 0):
            raise EvaluationError("QLike requires positive forecasts")
        ratio = r / f
        return ratio - np.log(ratio) - 1.0
    raise EvaluationError(f"unknown loss {kind!r}")


@dataclass(frozen=True)
class LossMatrix:
    """Per-day losses, rows = evaluation days, columns = models."""

    values: np.ndarray
    model_names: tuple
    dates: tuple
    loss_name: str
    split_index: int

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(self.model_names):
            raise EvaluationError("loss matrix shape does not match model names")
        if not np.all(np.isfinite(v)):
            raise EvaluationError("loss matrix contains non-finite entries")
        if self.loss_name == "QLike" and np.any(v < 0):
            raise EvaluationError("QLike losses must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "model_names", tuple(self.model_names))
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.model_names.index(name)]

    def mean_losses(self) -> dict:
        return {name: float(m) for name, m in zip(self.model_names, self.values.mean(axis=0))}


@dataclass(frozen=True)
class OosRun:
    """One fixed-split evaluation: forecasts, realized values and losses."""

    split_index: int
    eval_stop: int
    model_names: tuple
    forecasts: np.ndarray           # (days, models)
    realized: np.ndarray
    dates: tuple
    loss_matrices: dict             # loss name -> LossMatrix
    results: dict                   # kind name -> EstimationResult
    failures: dict                  # kind name -> error message


def oos_forecast_run(kinds, panel: PanelSeries, split: int,
                     eval_stop: int | None = None,
                     fit_options: FitOptions | None = None,
                     min_eval_days: int = 250) -> OosRun:
    """Fixed-scheme out-of-sample run for several model kinds.

    Estimates each kind once on rows [0, split), then collects one-step
    forecasts for rows [split, eval_stop) from the filter run over the
    full panel with estimation-window centering and initialization. A kind
    whose estimation fails is flagged and skipped; the run continues.
    """
    kinds = [ModelKind(k) for k in kinds]
    eval_stop = panel.T if eval_stop is None else int(eval_stop)
    if not (0 < split < eval_stop <= panel.T):
        raise DataError(f"invalid split {split} / eval stop {eval_stop} for T={panel.T}")
    n_eval = eval_stop - split
    if n_eval < min_eval_days:
        raise DataError(f"evaluation window has {n_eval} days; minimum is {min_eval_days}")
    fit_options = fit_options or FitOptions()

    centered = center_covariates(panel, (0, split))
    init = float(np.mean(panel.rv[:split]))
    realized = panel.rv[split:eval_stop]
    dates = panel.dates[split:eval_stop]

    columns = {}
    results = {}
    failures = {}
    for kind in kinds:
        try:
            res = fit(kind, panel, window=(0, split), options=fit_options)
            fo = filter_panel(kind, res.params, panel, centered, init_level=init)
            if not fo.valid:
                raise EvaluationError(
                    f"filter invalid at index {fo.first_invalid} in the evaluation window")
            columns[kind.value] = fo.mu[split:eval_stop]
            results[kind.value] = res
        except Exception as exc:  # keep the run alive, flag the column
            logger.warning("out-of-sample run: %s failed: %s", kind.value, exc)
            failures[kind.value] = str(exc)
    if not columns:
        raise EvaluationError("every model kind failed to estimate")

    names = tuple(columns)
    forecasts = np.column_stack([columns[n] for n in names])
    matrices = {
        loss: LossMatrix(
            values=np.column_stack([losses(columns[n], realized, loss) for n in names]),
            model_names=names, dates=dates, loss_name=loss, split_index=split)
        for loss in LOSS_NAMES
    }
    return OosRun(split_index=split, eval_stop=eval_stop, model_names=names,
                  forecasts=forecasts, realized=realized, dates=dates,
                  loss_matrices=matrices, results=results, failures=failures)


# ---------------------------------------------------------------------------
# stationary bootstrap and the model confidence set

def stationary_bootstrap_indices(T: int, replications: int, mean_block: float,
                                 rng: np.random.Generator) -> np.ndarray:
    """(replications, T) index matrix from the stationary block bootstrap.

    Blocks have geometric length with the given mean and wrap circularly.
    """
    if T < 2:
        raise EvaluationError("need at least two observations to bootstrap")
    p = 1.0 / float(mean_block)
    starts = rng.integers(0, T, size=(replications, T))
    restart = rng.random(size=(replications, T)) < p
    idx = np.empty((replications, T), dtype=np.int64)
    idx[:, 0] = starts[:, 0]
    for t in range(1, T):
        cont = (idx[:, t - 1] + 1) % T
        idx[:, t] = np.where(restart[:, t], starts[:, t], cont)
    return idx


@dataclass(frozen=True)
class McsResult:
    """Surviving set, p-values and elimination order of one MCS run."""

    model_names: tuple
    pvalues: dict                 # model -> MCS p-value (running maximum)
    survivors: tuple              # models with p-value > level
    best: str                     # last model standing
    eliminated: tuple             # elimination order (first out first)
    level: float
    loss_name: str
    settings: dict

    def is_member(self, name: str) -> bool:
        return name in self.survivors


def model_confidence_set(L: LossMatrix, level: float = 0.10,
                         replications: int = 5000, block: float = 22.0,
                         seed: int = 0, min_days: int = 100) -> McsResult:
    """Iterative elimination over a loss matrix at the given level.

    Uses the range statistic: the largest studentized absolute pairwise
    mean loss differential, studentized with bootstrap variances. The full
    elimination sequence is always computed so every model receives a
    p-value; ties are broken by column order.
    """
    M = len(L.model_names)
    if M < 2:
        raise EvaluationError("the model confidence set needs at least two models")
    if L.n_days < min_days:
        raise EvaluationError(f"need at least {min_days} evaluation days, got {L.n_days}")
    if not 0 < level < 1:
        raise EvaluationError("level must be inside (0, 1)")

    rng = np.random.default_rng(seed)
    idx = stationary_bootstrap_indices(L.n_days, replications, block, rng)
    col_means = L.values.mean(axis=0)
    boot_means = np.empty((replications, M))            # (B, M)
    chunk = max(1, int(2e6 / max(L.n_days * M, 1)))
    for lo in range(0, replications, chunk):
        hi = min(lo + chunk, replications)
        boot_means[lo:hi] = L.values[idx[lo:hi], :].mean(axis=1)

    alive = list(range(M))
    elimination = []       # (name, elimination p-value)
    while len(alive) > 1:
        sub = np.array(alive)
        d = col_means[sub][:, None] - col_means[sub][None, :]
        bstar = boot_means[:, sub][:, :, None] - boot_means[:, sub][:, None, :]
        se = np.sqrt(np.mean((bstar - d[None, :, :]) ** 2, axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            tstat = np.where(se > 0, d / se, np.where(d == 0, 0.0, np.inf * np.sign(d)))
            tboot = np.where(se[None, :, :] > 0, np.abs(bstar - d[None, :, :]) / se[None, :, :], 0.0)
        stat = float(np.max(np.abs(tstat)))
        boot_stat = tboot.reshape(replications, -1).max(axis=1)
        pval = float(np.mean(boot_stat >= stat))
        worst_local = int(np.argmax(np.max(tstat, axis=1)))
        worst = alive[worst_local]
        elimination.append((L.model_names[worst], pval))
        alive.remove(worst)
    elimination.append((L.model_names[alive[0]], 1.0))

    pvalues = {}
    running = 0.0
    for name, p in elimination:
        running = max(running, p)
        pvalues[name] = running
    survivors = tuple(n for n in L.model_names if pvalues[n] > level)
    return McsResult(
        model_names=L.model_names, pvalues=pvalues, survivors=survivors,
        best=elimination[-1][0], eliminated=tuple(n for n, _ in elimination[:-1]),
        level=level, loss_name=L.loss_name,
        settings={"replications": replications, "block": block, "seed": seed,
                  "statistic": "range"},
    )
