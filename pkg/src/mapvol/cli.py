"""Command-line front end.

Subcommands wire ingestion, estimation, forecasting, impulse responses,
out-of-sample evaluation, the model confidence set, simulation and the
stylized announcement statistics into reproducible runs driven by one JSON
config (flags win over file values). Artifacts are JSON (machine), aligned
text tables (human), CSV series and SVG charts.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure. MAPVOL_THREADS sets the default worker count for fitting several
model kinds in parallel.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import reports
from .config import (ALL_KINDS, RunConfig, default_config_dict, load_config,
                     parse_date)
from .errors import ConfigError, DataError, MapvolError, NumericalError
from .estimation import EstimationResult, FitOptions, fit
from .evaluation import model_confidence_set, oos_forecast_run
from .forecasting import (ForecastRules, ForecastState, impulse_response,
                          marginal_effects, multi_step_forecast)
from .models import ModelKind, ParamSet, filter_panel, unconditional_mean
from .panel import announcement_window_stats, center_covariates, load_panel
from .simulation import SimScenario, simulate_panel

logger = logging.getLogger("mapvol.cli")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with code 1
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapvol", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="JSON config file")
        p.add_argument("--input", help="input CSV path (overrides config)")
        p.add_argument("--delimiter", help="input field delimiter")
        p.add_argument("--output-dir", help="artifact directory")
        p.add_argument("--models", help="comma-separated model kinds")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int, help="parallel workers for fitting")

    p = sub.add_parser("estimate", help="fit the configured model kinds")
    common(p)

    p = sub.add_parser("forecast", help="multi-step forecasts per kind")
    common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--origin", help="forecast origin date (ISO)")
    p.add_argument("--mc-draws", type=int, dest="mc_draws")

    p = sub.add_parser("irf", help="impulse responses to a proxy shock")
    common(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--shock", type=float)

    p = sub.add_parser("evaluate", help="fixed-split out-of-sample losses")
    common(p)
    p.add_argument("--splits", help="comma-separated split dates (ISO)")

    p = sub.add_parser("mcs", help="model confidence set per split and loss")
    common(p)
    p.add_argument("--splits", help="comma-separated split dates (ISO)")
    p.add_argument("--replications", type=int)
    p.add_argument("--level", type=float)

    p = sub.add_parser("simulate", help="generate a synthetic panel")
    common(p)
    p.add_argument("--kind")
    p.add_argument("--length", type=int, dest="sim_T", help="panel length")

    p = sub.add_parser("stylized", help="volatility around announcement days")
    common(p)
    p.add_argument("--window-days", type=int, dest="window_days")

    p = sub.add_parser("report", help="full artifact set from one config")
    common(p)

    p = sub.add_parser("print-config", help="dump the default configuration")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "input", None):
        cfg.input.path = args.input
    if getattr(args, "delimiter", None):
        cfg.input.delimiter = args.delimiter
    if getattr(args, "output_dir", None):
        cfg.output.dir = args.output_dir
    if getattr(args, "models", None):
        cfg.models = [m.strip() for m in args.models.split(",") if m.strip()]
        for m in cfg.models:
            if m not in ALL_KINDS:
                raise ConfigError(f"unknown model kind {m!r}")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    if getattr(args, "horizon", None) is not None:
        cfg.forecast.horizon = args.horizon
        cfg.irf.horizon = args.horizon
    if getattr(args, "origin", None):
        cfg.forecast.origin = args.origin
    if getattr(args, "mc_draws", None) is not None:
        cfg.forecast.mc_draws = args.mc_draws
    if getattr(args, "shock", None) is not None:
        cfg.irf.shock = args.shock
    if getattr(args, "splits", None):
        cfg.splits = [s.strip() for s in args.splits.split(",") if s.strip()]
    if getattr(args, "replications", None) is not None:
        cfg.mcs.replications = args.replications
    if getattr(args, "level", None) is not None:
        cfg.mcs.level = args.level
    if getattr(args, "kind", None):
        cfg.simulate.kind = args.kind
    if getattr(args, "sim_T", None) is not None:
        cfg.simulate.T = args.sim_T
    if getattr(args, "window_days", None) is not None:
        cfg.stylized.window = args.window_days
    from .config import validate_config
    validate_config(cfg)
    return cfg


# ---------------------------------------------------------------------------
# shared plumbing

def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _wants(cfg: RunConfig, fmt: str) -> bool:
    return fmt in cfg.output.formats


def _load(cfg: RunConfig):
    if not cfg.input.path:
        raise ConfigError("no input file configured (input.path or --input)")
    panel, report = load_panel(cfg.input.path, cfg.input.columns, cfg.input.delimiter)
    if report.n_dropped:
        logger.warning("dropped %d of %d rows during ingestion",
                       report.n_dropped, report.n_read)
    return panel, report


def _window_indices(cfg: RunConfig, panel) -> tuple[int, int]:
    start = parse_date(cfg.window.start, "window.start")
    stop = parse_date(cfg.window.stop, "window.stop")
    lo = panel.index_of_date(start, "left") if start else 0
    hi = panel.index_of_date(stop, "right") if stop else panel.T
    if hi - lo < 2:
        raise DataError("estimation window selects fewer than 2 rows")
    return lo, hi


def _fit_options(cfg: RunConfig) -> FitOptions:
    e = cfg.estimation
    return FitOptions(starts=e.starts, seed=cfg.seed, max_iter=e.max_iter,
                      lb_lags=tuple(e.lb_lags), min_window=e.min_window,
                      constrain_psi=e.constrain_psi)


def _fit_one(task):
    kind_value, panel, window, options = task
    return kind_value, fit(ModelKind(kind_value), panel, window, options)


def _fit_all(cfg: RunConfig, panel, window) -> dict:
    options = _fit_options(cfg)
    tasks = [(kind, panel, window, options) for kind in cfg.models]
    threads = cfg.resolved_threads()
    results = {}
    if threads > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            for kind_value, res in pool.map(_fit_one, tasks):
                results[kind_value] = res
    else:
        for task in tasks:
            kind_value, res = _fit_one(task)
            results[kind_value] = res
    return {kind: results[kind] for kind in cfg.models}


def _filter_for(result: EstimationResult, panel):
    est = panel.slice(*result.window)
    centered = center_covariates(est)
    fo = filter_panel(result.kind, result.params, est, centered, result.init_level)
    return est, centered, fo


def _add_year(d: datetime.date) -> datetime.date:
    try:
        return d.replace(year=d.year + 1)
    except ValueError:  # Feb 29
        return datetime.date(d.year + 1, 3, 1)


# ---------------------------------------------------------------------------
# commands

def cmd_estimate(cfg: RunConfig) -> int:
    panel, _ = _load(cfg)
    window = _window_indices(cfg, panel)
    out = _outdir(cfg)
    results = _fit_all(cfg, panel, window)

    for kind, res in results.items():
        if _wants(cfg, "json"):
            reports.write_json(res.to_dict(), out / f"estimate_{kind}.json")
        est, _, fo = _filter_for(res, panel)
        if _wants(cfg, "csv"):
            rows = zip((d.isoformat() for d in est.dates), fo.sigma, fo.xi, fo.mu, fo.eps)
            reports.write_csv(out / f"components_{kind}.csv",
                              ("date", "sigma", "xi", "mu", "eps"), rows)
        if _wants(cfg, "svg"):
            reports.components_figure(est.dates, fo.sigma, fo.xi, fo.mu, kind,
                                      out / f"components_{kind}.svg")
    ordered = [results[k] for k in cfg.models]
    if _wants(cfg, "txt"):
        (out / "estimates.txt").write_text(reports.estimation_table(ordered) + "\n")
        (out / "comparison.txt").write_text(reports.comparison_table(ordered) + "\n")
    print(reports.estimation_table(ordered))
    return 0


def _marginal_report(cfg: RunConfig, panel, results, out: Path) -> None:
    effects = {}
    for kind, res in results.items():
        mk = ModelKind(kind)
        if not mk.uses_policy:
            continue
        est, _, fo = _filter_for(res, panel)
        for var in ("x", "delta"):
            try:
                effects[(kind, var)] = marginal_effects(mk, res.params, fo, var, 0, est)
            except MapvolError as exc:
                logger.warning("marginal effect %s/%s skipped: %s", kind, var, exc)
    if not effects:
        return
    if _wants(cfg, "txt"):
        (out / "marginal_effects.txt").write_text(reports.marginal_table(effects) + "\n")
    if _wants(cfg, "json"):
        payload = {f"{k}:{v}": {"average": e.value, "kappa": e.kappa, "tau": e.tau}
                   for (k, v), e in effects.items()}
        reports.write_json(payload, out / "marginal_effects.json")


def cmd_forecast(cfg: RunConfig) -> int:
    panel, _ = _load(cfg)
    window = _window_indices(cfg, panel)
    out = _outdir(cfg)
    results = _fit_all(cfg, panel, window)

    origin_date = parse_date(cfg.forecast.origin, "forecast.origin")
    rules = ForecastRules(x_mode=cfg.forecast.x_rule, delta_mode=cfg.forecast.delta_rule,
                          max_horizon=max(cfg.forecast.max_horizon, cfg.forecast.horizon),
                          tolerance=cfg.forecast.tolerance,
                          mc_draws=cfg.forecast.mc_draws, seed=cfg.seed)
    payload = {}
    lines = {}
    for kind, res in results.items():
        est, centered, fo = _filter_for(res, panel)
        t = est.T - 1
        if origin_date is not None:
            t = est.index_of_date(origin_date, "right") - 1
            if t < 0:
                raise DataError(f"forecast origin {origin_date} precedes the window")
        state = ForecastState.from_filter(fo, est, centered, t)
        path = multi_step_forecast(ModelKind(kind), res.params, state,
                                   cfg.forecast.horizon, rules)
        payload[kind] = reports.forecast_path_dict(path)
        payload[kind]["unconditional_mean"] = unconditional_mean(ModelKind(kind), res.params)
        lines[kind] = path.mu
        if _wants(cfg, "csv"):
            if path.mc_mu is not None:
                rows = [(h + 1, path.mu[h], path.mc_mu[h]) for h in range(path.horizon)]
                reports.write_csv(out / f"forecast_{kind}.csv", ("step", "mu", "mu_mc"), rows)
            else:
                rows = [(h + 1, path.mu[h]) for h in range(path.horizon)]
                reports.write_csv(out / f"forecast_{kind}.csv", ("step", "mu"), rows)
        conv = path.convergence_horizon if path.converged else "unconverged"
        print(f"{kind}: convergence horizon {conv} (tolerance {path.tolerance:g})")
    if _wants(cfg, "json"):
        reports.write_json(payload, out / "forecast.json")
    if _wants(cfg, "svg"):
        reports.paths_figure(lines, "multi-step forecasts", out / "forecast_paths.svg")
    return 0


def cmd_irf(cfg: RunConfig) -> int:
    panel, _ = _load(cfg)
    window = _window_indices(cfg, panel)
    out = _outdir(cfg)
    results = _fit_all(cfg, panel, window)

    shock = cfg.irf.shock
    if shock is None:
        shock = float(np.std(panel.x[window[0]:window[1]]))
    rules = ForecastRules(max_horizon=max(cfg.forecast.max_horizon, cfg.irf.horizon),
                          tolerance=cfg.forecast.tolerance, seed=cfg.seed)
    payload = {"shock": shock, "models": {}}
    lines = {}
    for kind, res in results.items():
        est, centered, fo = _filter_for(res, panel)
        state = ForecastState.from_filter(fo, est, centered, est.T - 1)
        irf = impulse_response(ModelKind(kind), res.params, state,
                               cfg.irf.horizon, shock, rules)
        payload["models"][kind] = reports.irf_dict(irf)
        lines[kind] = irf.diff
        if _wants(cfg, "csv"):
            rows = [(h + 1, irf.baseline.mu[h], irf.shocked.mu[h], irf.diff[h])
                    for h in range(cfg.irf.horizon)]
            reports.write_csv(out / f"irf_{kind}.csv",
                              ("step", "baseline", "shocked", "diff"), rows)
        print(f"{kind}: IRF trough {float(np.min(irf.diff)):+.4f} at step "
              f"{int(np.argmin(irf.diff)) + 1}")
    if _wants(cfg, "json"):
        reports.write_json(payload, out / "irf.json")
    if _wants(cfg, "svg"):
        reports.paths_figure(lines, f"impulse response to a {shock:g} proxy shock",
                             out / "irf.svg", ylabel="shocked - baseline", reference=0.0)
    return 0


def _split_runs(cfg: RunConfig, panel):
    if not cfg.splits:
        raise ConfigError("no splits configured (splits or --splits)")
    runs = {}
    for split_str in cfg.splits:
        split_date = parse_date(split_str, "splits")
        split = panel.index_of_date(split_date, "right")
        stop = panel.index_of_date(_add_year(split_date), "right")
        label = str(split_date.year + 1)
        runs[label] = oos_forecast_run(cfg.models, panel, split, stop,
                                       fit_options=_fit_options(cfg),
                                       min_eval_days=cfg.mcs.min_eval_days)
    return runs


def cmd_evaluate(cfg: RunConfig) -> int:
    panel, _ = _load(cfg)
    out = _outdir(cfg)
    runs = _split_runs(cfg, panel)
    payload = {}
    for label, run in runs.items():
        payload[label] = {
            "split_index": run.split_index,
            "eval_days": len(run.dates),
            "mean_losses": {loss: lm.mean_losses()
                            for loss, lm in run.loss_matrices.items()},
            "failures": run.failures,
        }
        if _wants(cfg, "csv"):
            header = ("date", *run.model_names)
            rows = [(d.isoformat(), *row) for d, row in zip(run.dates, run.forecasts)]
            reports.write_csv(out / f"oos_forecasts_{label}.csv", header, rows)
            for loss, lm in run.loss_matrices.items():
                rows = [(d.isoformat(), *row) for d, row in zip(lm.dates, lm.values)]
                reports.write_csv(out / f"losses_{label}_{loss}.csv", header, rows)
        for loss, lm in run.loss_matrices.items():
            means = ", ".join(f"{k}={v:.4g}" for k, v in lm.mean_losses().items())
            print(f"{label} {loss}: {means}")
    if _wants(cfg, "json"):
        reports.write_json(payload, out / "evaluate.json")
    return 0


def cmd_mcs(cfg: RunConfig) -> int:
    if len(cfg.models) < 2:
        raise ConfigError("the model confidence set needs at least two model kinds")
    panel, _ = _load(cfg)
    out = _outdir(cfg)
    runs = _split_runs(cfg, panel)
    grid = {}
    payload = {}
    for label, run in runs.items():
        payload[label] = {}
        for loss in cfg.mcs.losses:
            result = model_confidence_set(
                run.loss_matrices[loss], level=cfg.mcs.level,
                replications=cfg.mcs.replications, block=cfg.mcs.block_length,
                seed=cfg.seed, min_days=min(cfg.mcs.min_eval_days, 100))
            grid[(label, loss)] = result
            payload[label][loss] = reports.mcs_dict(result)
    text = reports.mcs_grid(grid, cfg.models, cfg.mcs.level)
    if _wants(cfg, "json"):
        reports.write_json(payload, out / "mcs.json")
    if _wants(cfg, "txt"):
        (out / "mcs_grid.txt").write_text(text + "\n")
    print(text)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    sim_cfg = cfg.simulate
    params = ParamSet(**sim_cfg.params) if sim_cfg.params else None
    scenario = SimScenario(kind=ModelKind(sim_cfg.kind), params=params, T=sim_cfg.T,
                           x_mode=sim_cfg.x_mode, x0=sim_cfg.x0,
                           x_drift=sim_cfg.x_drift, x_sigma=sim_cfg.x_sigma,
                           announce_mode="every" if sim_cfg.announce_every else "none",
                           announce_every=sim_cfg.announce_every or 1,
                           seed=cfg.seed)
    sim = simulate_panel(scenario)
    sim.panel.to_csv(out / "simulated_panel.csv")
    if _wants(cfg, "csv"):
        rows = zip((d.isoformat() for d in sim.panel.dates),
                   sim.truth.sigma, sim.truth.xi, sim.truth.mu)
        reports.write_csv(out / "true_components.csv", ("date", "sigma", "xi", "mu"), rows)
    if _wants(cfg, "json"):
        reports.write_json({
            "kind": scenario.kind.value,
            "T": scenario.T,
            "seed": scenario.seed,
            "params": sim.scenario.params.as_dict(scenario.kind) if sim.scenario.params
            else ParamSet(omega=0, alpha=0, beta=0, gamma=0).as_dict(),
            "init_level": sim.init_level,
            "x_bar": sim.centered.x_bar,
            "delta_bar": sim.centered.delta_bar,
        }, out / "scenario.json")
    print(f"wrote simulated {scenario.kind.value} panel of length {scenario.T} "
          f"to {out / 'simulated_panel.csv'}")
    return 0


def cmd_stylized(cfg: RunConfig) -> int:
    panel, _ = _load(cfg)
    out = _outdir(cfg)
    stats = announcement_window_stats(panel, cfg.stylized.window)
    if _wants(cfg, "csv"):
        rows = [(e.date.isoformat(), e.rv, e.before_mean, e.after_mean,
                 e.before_pct, e.after_pct) for e in stats.events]
        reports.write_csv(out / "stylized.csv",
                          ("date", "rv", "before_mean", "after_mean",
                           "before_pct", "after_pct"), rows)
    if _wants(cfg, "json"):
        reports.write_json({
            "window": stats.window,
            "n_announcements": len(stats.events),
            "avg_before_pct": stats.avg_before_pct,
            "avg_after_pct": stats.avg_after_pct,
        }, out / "stylized.json")
    text = reports.stylized_table(stats)
    if _wants(cfg, "txt"):
        (out / "stylized.txt").write_text(text + "\n")
    print(text)
    return 0


def cmd_report(cfg: RunConfig) -> int:
    """Emit the full artifact set: estimates, components, marginal effects,
    forecasts, impulse responses, stylized statistics and, when splits are
    configured, out-of-sample losses with the model confidence set."""
    panel, _ = _load(cfg)
    window = _window_indices(cfg, panel)
    out = _outdir(cfg)

    results = _fit_all(cfg, panel, window)
    for kind, res in results.items():
        if _wants(cfg, "json"):
            reports.write_json(res.to_dict(), out / f"estimate_{kind}.json")
        est, _, fo = _filter_for(res, panel)
        if _wants(cfg, "csv"):
            rows = zip((d.isoformat() for d in est.dates), fo.sigma, fo.xi, fo.mu, fo.eps)
            reports.write_csv(out / f"components_{kind}.csv",
                              ("date", "sigma", "xi", "mu", "eps"), rows)
        if _wants(cfg, "svg"):
            reports.components_figure(est.dates, fo.sigma, fo.xi, fo.mu, kind,
                                      out / f"components_{kind}.svg")
    ordered = [results[k] for k in cfg.models]
    if _wants(cfg, "txt"):
        (out / "estimates.txt").write_text(reports.estimation_table(ordered) + "\n")
        (out / "comparison.txt").write_text(reports.comparison_table(ordered) + "\n")
    _marginal_report(cfg, panel, results, out)

    cmd_forecast(cfg)
    cmd_irf(cfg)
    if np.any(panel.delta == 1.0):
        cmd_stylized(cfg)
    if cfg.splits:
        cmd_evaluate(cfg)
        cmd_mcs(cfg)
    print(f"report artifacts written to {out}")
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "forecast": cmd_forecast,
    "irf": cmd_irf,
    "evaluate": cmd_evaluate,
    "mcs": cmd_mcs,
    "simulate": cmd_simulate,
    "stylized": cmd_stylized,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "print-config":
        import json as _json
        print(_json.dumps(default_config_dict(), sort_keys=True, indent=2))
        return 0
    try:
        cfg = load_config(getattr(args, "config", None))
        cfg = _apply_overrides(cfg, args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
