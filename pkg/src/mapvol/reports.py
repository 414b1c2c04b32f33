"""Report rendering: aligned text tables, JSON/CSV artifacts and figures.

JSON artifacts are written deterministically (sorted keys, shortest
round-trip float repr, no timestamps) so identical runs produce identical
bytes. Figures are matplotlib line charts saved as SVG with a fixed hash
salt and no creation date, keeping them reproducible too.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "mapvol"
import matplotlib.pyplot as plt

import numpy as np

from .estimation import EstimationResult
from .evaluation import McsResult
from .forecasting import ForecastPath, IrfPath
from .models import FREE_PARAMS, ModelKind

PARAM_ROWS = ("omega", "alpha", "beta", "gamma", "delta", "phi", "psi", "theta")


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path, header, rows, delimiter: str = ",") -> None:
    def fmt(v):
        if isinstance(v, float):
            return format(v, ".15g")
        return str(v)

    with open(path, "w", newline="") as f:
        f.write(delimiter.join(header) + "\n")
        for row in rows:
            f.write(delimiter.join(fmt(v) for v in row) + "\n")


def _grid(rows) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(r, widths))).rstrip())
    return "\n".join(lines)


def estimation_table(results: list[EstimationResult]) -> str:
    """Coefficient table across kinds, robust standard errors in parentheses."""
    kinds = [r.kind for r in results]
    by_kind = {r.kind: r for r in results}
    rows = [["", *[k.value for k in kinds]]]
    for name in PARAM_ROWS:
        if not any(name in FREE_PARAMS[k] for k in kinds):
            continue
        est_row = [name]
        se_row = [""]
        for k in kinds:
            r = by_kind[k]
            if name in FREE_PARAMS[k]:
                est_row.append(f"{getattr(r.params, name):.3f}")
                se_row.append(f"({r.se[name]:.3f})" if name in r.se else "")
            else:
                est_row.append("")
                se_row.append("")
        rows.append(est_row)
        if any(c for c in se_row[1:]):
            rows.append(se_row)
    rows.append(["loglik", *[f"{by_kind[k].loglik:.1f}" for k in kinds]])
    lags = sorted(results[0].lb_pvalues)
    rows.append(["", *["" for _ in kinds]])
    rows.append(["Ljung-Box p-values", *["" for _ in kinds]])
    for m in lags:
        rows.append([f"  lag {m}", *[f"{by_kind[k].lb_pvalues[m]:.3f}" for k in kinds]])
    return _grid(rows)


def comparison_table(results: list[EstimationResult]) -> str:
    """Information criteria and in-sample losses across kinds."""
    kinds = [r.kind for r in results]
    by_kind = {r.kind: r for r in results}
    rows = [["", *[k.value for k in kinds]]]
    for label, attr, digits in (("AIC", "aic", 3), ("BIC", "bic", 3),
                                ("MSE", "in_sample_mse", 3), ("QLike", "in_sample_qlike", 3)):
        rows.append([label, *[f"{getattr(by_kind[k], attr):.{digits}f}" for k in kinds]])
    return _grid(rows)


def marginal_table(effects: dict) -> str:
    """Average marginal effects on expected volatility (tau = 0).

    effects maps (kind value, variable) -> MarginalEffect.
    """
    kinds = sorted({k for k, _ in effects}, key=lambda v: list(ModelKind).index(ModelKind(v)))
    rows = [["", "x (implementation)", "delta (announcement)"]]
    for k in kinds:
        row = [k]
        for var in ("x", "delta"):
            eff = effects.get((k, var))
            row.append(f"{eff.value:.3f}" if eff is not None else "")
        rows.append(row)
    return _grid(rows)


def mcs_grid(results: dict, model_names, level: float) -> str:
    """Membership grid: one row per model, one column per split.

    results maps (split label, loss name) -> McsResult. Cell markers:
    'm'/'q' for set membership under MSE/QLike, uppercase for the best
    model under that loss.
    """
    splits = sorted({s for s, _ in results})
    rows = [["", *[str(s) for s in splits]]]
    for name in model_names:
        row = [name]
        for s in splits:
            cell = []
            for loss, letter in (("MSE", "m"), ("QLike", "q")):
                r = results.get((s, loss))
                if r is None or name not in r.model_names:
                    continue
                if r.best == name:
                    cell.append(letter.upper())
                elif r.is_member(name):
                    cell.append(letter)
                else:
                    cell.append("-")
            row.append(" ".join(cell) if cell else "")
        rows.append(row)
    legend = (f"members of the {int(round(level * 100))}% confidence set: "
              "m = MSE, q = QLike; uppercase = best model; '-' = excluded")
    return _grid(rows) + "\n\n" + legend


def stylized_table(stats) -> str:
    rows = [["", "vs announcement-day rv"]]
    rows.append(["average before", f"{stats.avg_before_pct:+.2f}%"])
    rows.append(["average after", f"{stats.avg_after_pct:+.2f}%"])
    rows.append(["announcements", str(len(stats.events))])
    rows.append(["window (days)", str(stats.window)])
    return _grid(rows)


# ---------------------------------------------------------------------------
# figures

def _save(fig, path) -> None:
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)


def components_figure(dates, sigma, xi, mu, kind: str, path) -> None:
    """Base component (left axis) and policy component (right axis)."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(dates, sigma, color="tab:blue", lw=0.8, label="base")
    ax.set_ylabel("base component")
    ax2 = ax.twinx()
    ax2.plot(dates, xi, color="tab:red", lw=0.8, ls=":", label="policy")
    ax2.set_ylabel("policy component")
    ax.set_title(f"{kind}: volatility components")
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, path)


def paths_figure(series: dict, title: str, path, ylabel: str = "expected volatility",
                 reference: float | None = None) -> None:
    """One line per model over forecast steps."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for name, values in series.items():
        ax.plot(np.arange(1, len(values) + 1), values, lw=1.2, label=name)
    if reference is not None:
        ax.axhline(reference, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("steps ahead")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def forecast_path_dict(path: ForecastPath) -> dict:
    return {
        "kind": path.kind.value,
        "horizon": path.horizon,
        "mu": [float(v) for v in path.mu],
        "assumptions": path.assumptions,
        "tolerance": path.tolerance,
        "convergence_horizon": path.convergence_horizon,
        "converged": path.converged,
        "mc_mu": [float(v) for v in path.mc_mu] if path.mc_mu is not None else None,
    }


def irf_dict(irf: IrfPath) -> dict:
    return {
        "kind": irf.baseline.kind.value,
        "shock": irf.shock,
        "diff": [float(v) for v in irf.diff],
        "baseline": forecast_path_dict(irf.baseline),
        "shocked": forecast_path_dict(irf.shocked),
    }


def mcs_dict(result: McsResult) -> dict:
    return {
        "loss": result.loss_name,
        "level": result.level,
        "models": list(result.model_names),
        "pvalues": {k: float(v) for k, v in result.pvalues.items()},
        "survivors": list(result.survivors),
        "best": result.best,
        "eliminated_order": list(result.eliminated),
        "settings": result.settings,
    }
