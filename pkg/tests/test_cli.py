import json
from pathlib import Path

import numpy as np
import pytest

from mapvol.cli import main
from mapvol.models import ModelKind
from mapvol.simulation import SimScenario, simulate_panel


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Simulated input CSV plus a small config tuned for fast runs."""
    root = tmp_path_factory.mktemp("cli")
    sim = simulate_panel(SimScenario(kind=ModelKind.MAP, T=900, seed=31))
    csv_path = root / "panel.csv"
    sim.panel.to_csv(str(csv_path))
    cfg = {
        "input": {"path": str(csv_path)},
        "models": ["AMEM", "XMAP", "MAP"],
        "estimation": {"starts": 2},
        "forecast": {"horizon": 40},
        "irf": {"horizon": 40},
        "mcs": {"replications": 300, "min_eval_days": 150},
        "splits": ["2011-12-30"],
        "stylized": {"window": 5},
        "seed": 7,
        "output": {"dir": str(root / "out")},
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    return root, cfg_path


def test_estimate_command(workdir):
    root, cfg = workdir
    assert main(["estimate", "-c", str(cfg)]) == 0
    out = root / "out"
    for kind in ("AMEM", "XMAP", "MAP"):
        payload = json.loads((out / f"estimate_{kind}.json").read_text())
        assert payload["kind"] == kind
        assert set(payload["estimates"]) >= {"omega", "alpha", "beta", "gamma", "theta"}
        assert all(v > 0 for v in payload["robust_se"].values())
        assert (out / f"components_{kind}.csv").exists()
        assert (out / f"components_{kind}.svg").exists()
    assert payload["k"] == 8  # MAP
    table = (out / "estimates.txt").read_text()
    assert "Ljung-Box" in table and "MAP" in table


def test_forecast_command(workdir):
    root, cfg = workdir
    assert main(["forecast", "-c", str(cfg)]) == 0
    out = root / "out"
    payload = json.loads((out / "forecast.json").read_text())
    for kind in ("AMEM", "XMAP", "MAP"):
        path = payload[kind]
        assert len(path["mu"]) == 40
        assert all(v > 0 for v in path["mu"])
    assert (out / "forecast_paths.svg").exists()
    assert (out / "forecast_MAP.csv").read_text().startswith("step,mu")


def test_forecast_single_step_horizon(workdir):
    root, cfg = workdir
    assert main(["forecast", "-c", str(cfg), "--horizon", "1",
                 "--output-dir", str(root / "h1")]) == 0
    payload = json.loads((root / "h1" / "forecast.json").read_text())
    assert len(payload["MAP"]["mu"]) == 1
    assert payload["MAP"]["convergence_horizon"] is None


def test_irf_command(workdir):
    root, cfg = workdir
    assert main(["irf", "-c", str(cfg)]) == 0
    out = root / "out"
    payload = json.loads((out / "irf.json").read_text())
    assert payload["shock"] > 0
    amem = np.asarray(payload["models"]["AMEM"]["diff"])
    mapd = np.asarray(payload["models"]["MAP"]["diff"])
    np.testing.assert_allclose(amem, 0.0, atol=1e-12)  # no policy terms
    assert mapd.min() < 0  # negative delta pulls volatility down
    assert (out / "irf_MAP.csv").read_text().splitlines()[0] == "step,baseline,shocked,diff"


def test_evaluate_and_mcs_commands(workdir):
    root, cfg = workdir
    assert main(["evaluate", "-c", str(cfg)]) == 0
    assert main(["mcs", "-c", str(cfg)]) == 0
    out = root / "out"
    ev = json.loads((out / "evaluate.json").read_text())
    assert "2012" in ev
    assert set(ev["2012"]["mean_losses"]) == {"MSE", "QLike"}
    mcs = json.loads((out / "mcs.json").read_text())
    entry = mcs["2012"]["QLike"]
    assert entry["level"] == 0.10
    assert entry["survivors"]  # at least one survivor
    assert set(entry["pvalues"]) == {"AMEM", "XMAP", "MAP"}
    grid = (out / "mcs_grid.txt").read_text()
    assert "2012" in grid


def test_stylized_command(workdir):
    root, cfg = workdir
    assert main(["stylized", "-c", str(cfg)]) == 0
    payload = json.loads((root / "out" / "stylized.json").read_text())
    assert payload["n_announcements"] > 0
    assert payload["window"] == 5


def test_simulate_command(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--kind", "LMAP", "--length", "300",
                 "--seed", "11", "--output-dir", str(out)]) == 0
    from mapvol.panel import load_panel
    panel, report = load_panel(str(out / "simulated_panel.csv"))
    assert panel.T == 300
    assert report.n_dropped == 0
    scenario = json.loads((out / "scenario.json").read_text())
    assert scenario["kind"] == "LMAP"


def test_report_full_pipeline_and_determinism(workdir, tmp_path):
    root, cfg = workdir
    base = json.loads(Path(cfg).read_text())
    artifacts = None
    digests = []
    for run in ("r1", "r2"):
        out = tmp_path / run
        cfg_run = dict(base, output={"dir": str(out)})
        cfg_path = tmp_path / f"{run}.json"
        cfg_path.write_text(json.dumps(cfg_run))
        assert main(["report", "-c", str(cfg_path)]) == 0
        names = sorted(p.name for p in out.glob("*.json"))
        assert names, "report wrote no JSON artifacts"
        if artifacts is None:
            artifacts = names
        else:
            assert names == artifacts
        digests.append({n: (out / n).read_bytes() for n in names})
    assert digests[0] == digests[1]
    expected = {"forecast.json", "irf.json", "mcs.json", "evaluate.json",
                "stylized.json", "marginal_effects.json"}
    assert expected <= set(artifacts)


def test_exit_code_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 1


def test_exit_code_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"inputs": {"path": "x.csv"}}))
    assert main(["estimate", "-c", str(cfg)]) == 1


def test_exit_code_missing_column(tmp_path):
    data = tmp_path / "bad.csv"
    data.write_text("date,vol,ret,x,delta\n2015-01-01,1.0,0.1,0.2,0\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": {"path": str(data)}}))
    assert main(["estimate", "-c", str(cfg)]) == 2


def test_exit_code_numerical_failure(tmp_path):
    # constant rv: no curvature in the dynamics, estimation fails cleanly
    rows = ["date,rv,ret,x,delta"]
    import datetime
    d = datetime.date(2015, 1, 1)
    for i in range(80):
        rows.append(f"{d + datetime.timedelta(days=i)},5.0,0.1,0.2,0")
    data = tmp_path / "const.csv"
    data.write_text("\n".join(rows) + "\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "input": {"path": str(data)},
        "models": ["AMEM"],
        "estimation": {"starts": 1},
        "output": {"dir": str(tmp_path / "out")},
    }))
    assert main(["estimate", "-c", str(cfg)]) == 3


def test_print_config_lists_defaults(capsys):
    assert main(["print-config"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mcs"]["level"] == 0.10
    assert payload["forecast"]["tolerance"] == 0.01
