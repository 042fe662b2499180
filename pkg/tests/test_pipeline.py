"""Config handling, pipeline stages, CLI behavior, report artifacts."""

import csv
import itertools
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from agrivol.cli import main as cli_main
from agrivol.config import PipelineConfig, PricingConfig, config_from_dict, load_config
from agrivol.errors import ConfigError, DataError, StageError
from agrivol.pipeline import cmd_stage, run_pipeline
from agrivol.series import MonthStamp

ROOT = Path(__file__).resolve().parent.parent
DATASET = ROOT / "data" / "synthetic"


def quick_config(out_dir, **overrides) -> PipelineConfig:
    base = dict(
        dataset_dir=str(DATASET),
        out_dir=str(out_dir),
        scenarios=("SSP2-4.5", "SSP5-8.5"),
        forecast_end="2032-12",  # short horizon keeps the tests fast
    )
    base.update(overrides)
    return PipelineConfig(**base)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline_run")
    cfg = quick_config(out)
    run_pipeline(cfg)
    return out


class TestConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            config_from_dict({"dataset_dir": "x", "typo_key": 1})

    def test_missing_dataset_dir(self):
        with pytest.raises(ConfigError, match="dataset_dir"):
            config_from_dict({})

    def test_bad_version(self, tmp_path):
        cfg = quick_config(tmp_path, config_version=99)
        with pytest.raises(ConfigError, match="config_version"):
            cfg.validate()

    def test_missing_dataset_file_preflight(self, tmp_path):
        cfg = quick_config(tmp_path, dataset_dir=str(tmp_path / "nope"))
        with pytest.raises(ConfigError, match="prices.csv"):
            cfg.validate()

    def test_bad_validation_fraction(self, tmp_path):
        cfg = quick_config(tmp_path, validation_fraction=0.7)
        with pytest.raises(ConfigError, match="validation_fraction"):
            cfg.validate()

    def test_unknown_scenario(self, tmp_path):
        cfg = quick_config(tmp_path, scenarios=("SSP9-9.9",))
        with pytest.raises(ConfigError, match="SSP9-9.9"):
            cfg.validate()

    def test_load_from_file_resolves_paths(self, tmp_path):
        doc = {
            "config_version": 1,
            "dataset_dir": str(DATASET),
            "out_dir": "results",
        }
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(doc))
        cfg = load_config(p)
        assert cfg.out_dir == str(tmp_path / "results")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(p)


class TestStages:
    def test_report_requires_upstream(self, tmp_path):
        cfg = quick_config(tmp_path / "empty")
        with pytest.raises(StageError) as exc:
            cmd_stage(cfg, "report")
        assert exc.value.stage == "report"
        assert isinstance(exc.value.cause, DataError)
        assert "ingest" in str(exc.value.cause)

    def test_forecast_requires_sarimax(self, tmp_path):
        out = tmp_path / "partial"
        cfg = quick_config(out)
        cmd_stage(cfg, "ingest")
        cmd_stage(cfg, "fit-egarch")
        with pytest.raises(StageError) as exc:
            cmd_stage(cfg, "forecast", scenario="SSP2-4.5")
        assert "fit-sarimax" in str(exc.value.cause)

    def test_unknown_stage(self, tmp_path):
        cfg = quick_config(tmp_path)
        with pytest.raises(StageError):
            cmd_stage(cfg, "brew-coffee")

    def test_scenario_not_configured(self, tmp_path):
        cfg = quick_config(tmp_path, scenarios=("SSP2-4.5",))
        with pytest.raises(ConfigError, match="SSP5-8.5"):
            cmd_stage(cfg, "fit-sarimax", scenario="SSP5-8.5")

    def test_single_scenario_stage_restriction(self, tmp_path):
        out = tmp_path / "restricted"
        cfg = quick_config(out)
        cmd_stage(cfg, "ingest")
        cmd_stage(cfg, "fit-egarch")
        files = cmd_stage(cfg, "fit-sarimax", scenario="SSP5-8.5")
        assert any("SSP5-8.5" in f for f in files)
        assert not (out / "sarimax_model__SSP2-4.5.json").exists()

    def test_stage_by_stage_matches_run(self, tmp_path, run_dir):
        out = tmp_path / "stepwise"
        cfg = quick_config(out)
        for name in ("ingest", "trend", "fit-egarch", "fit-sarimax", "forecast", "price", "report"):
            cmd_stage(cfg, name)
        ref = json.loads((run_dir / "run_report.json").read_text())["manifest"]
        got = json.loads((out / "run_report.json").read_text())["manifest"]
        assert got == ref

    def test_egarch_stage_artifact(self, run_dir):
        doc = json.loads((run_dir / "egarch_model.json").read_text())
        n_prices = 279
        assert len(doc["sigma"]["values"]) == n_prices - 1
        assert doc["orders"] == {"p": 1, "o": 1, "q": 1}
        assert all(v > 0 for v in doc["sigma"]["values"])

    def test_trend_stage_matches_direct_calls(self, run_dir):
        from agrivol.ingest import read_dataset
        from agrivol.series import mann_kendall, ols_trend

        rows = {
            (r["variable"], r["scenario"]): r
            for r in csv.DictReader(open(run_dir / "trends.csv"))
        }
        ds = read_dataset(DATASET)
        key = ("tasmax", "historical")
        trend = mann_kendall(ds.panel.means[key])
        slope, intercept = ols_trend(ds.panel.means[key])
        row = rows[key]
        assert int(row["s_statistic"]) == trend.s_statistic
        assert float(row["z_score"]) == pytest.approx(trend.z_score, rel=1e-12)
        assert float(row["ols_slope_per_month"]) == pytest.approx(slope, rel=1e-12)
        assert row["direction"] == trend.direction == "increasing"


class TestReportArtifacts:
    def test_manifest_covers_emitted_files(self, run_dir):
        report = json.loads((run_dir / "run_report.json").read_text())
        emitted = {
            p.name
            for p in run_dir.iterdir()
            if p.suffix in (".csv", ".json") and p.name != "run_report.json"
        }
        assert set(report["manifest"]) == emitted

    def test_fig1_schema(self, run_dir):
        rows = list(csv.DictReader(open(run_dir / "fig1_price_bands.csv")))
        assert rows[0].keys() == {"month", "price", "msp", "center", "lower", "upper"}
        assert len(rows) == 279
        assert rows[0]["center"] == ""  # before the window fills
        banded = [r for r in rows if r["center"] != ""]
        assert len(banded) == 279 - 19
        for r in banded[:24]:
            assert float(r["lower"]) <= float(r["center"]) <= float(r["upper"])

    def test_fig2_rules_per_variable(self, run_dir):
        rows = list(csv.DictReader(open(run_dir / "fig2_climate_bands.csv")))
        combos = {(r["variable"], r["scenario"]) for r in rows}
        assert ("tasmax", "historical") in combos
        assert ("pr", "SSP5-8.5") in combos
        for r in rows:
            lo, c, up = float(r["lower"]), float(r["center"]), float(r["upper"])
            assert lo <= c <= up

    def test_fig3_squared_returns(self, run_dir):
        rows = list(csv.DictReader(open(run_dir / "fig3_returns_volatility.csv")))
        for r in rows[:50]:
            assert float(r["squared_return"]) == pytest.approx(
                float(r["log_return"]) ** 2, rel=1e-9, abs=1e-18
            )
            assert float(r["egarch_sigma"]) > 0

    def test_fig4_phase_partition(self, run_dir):
        for scenario in ("SSP2-4.5", "SSP5-8.5"):
            rows = list(csv.DictReader(open(run_dir / f"fig4_sarimax_forecast__{scenario}.csv")))
            phases = [r["phase"] for r in rows]
            blocks = [k for k, _ in itertools.groupby(phases)]
            assert blocks == ["historical", "validation", "forecast"]
            months = [MonthStamp.parse(r["month"]) for r in rows]
            assert all(b == a.plus(1) for a, b in zip(months, months[1:]))
            # bands contain the prediction
            for r in rows:
                if r["predicted"] != "":
                    assert float(r["lower68"]) <= float(r["predicted"]) <= float(r["upper68"])

    def test_fig4_forecast_has_no_observed_sigma(self, run_dir):
        rows = list(csv.DictReader(open(run_dir / "fig4_sarimax_forecast__SSP2-4.5.csv")))
        for r in rows:
            if r["phase"] == "forecast":
                assert r["egarch_sigma"] == ""
            else:
                assert r["egarch_sigma"] != ""

    def test_fig4_hist_validation_identical_across_scenarios(self, run_dir):
        # scenarios share all observed data; their fig4 files may differ
        # only in the forecast phase. The smoothed overlay is exempt: its
        # centered window crosses the phase boundary by construction.
        a = list(csv.DictReader(open(run_dir / "fig4_sarimax_forecast__SSP2-4.5.csv")))
        b = list(csv.DictReader(open(run_dir / "fig4_sarimax_forecast__SSP5-8.5.csv")))
        assert len(a) == len(b)
        raw_cols = ("month", "phase", "egarch_sigma", "predicted", "lower68", "upper68")
        for ra, rb in zip(a, b):
            assert ra["month"] == rb["month"] and ra["phase"] == rb["phase"]
            if ra["phase"] != "forecast":
                for col in raw_cols:
                    assert ra[col] == rb[col]

    def test_fig5_keyed_by_month_scenario(self, run_dir):
        rows = list(csv.DictReader(open(run_dir / "fig5_premiums.csv")))
        keys = {(r["month"], r["scenario"]) for r in rows}
        assert len(keys) == len(rows)
        scenarios = {r["scenario"] for r in rows}
        assert scenarios == {"SSP2-4.5", "SSP5-8.5"}

    def test_every_emitted_number_is_finite(self, run_dir):
        for name in run_dir.iterdir():
            if name.suffix != ".csv":
                continue
            for row in csv.DictReader(open(name)):
                for key, value in row.items():
                    if value == "":
                        continue
                    try:
                        x = float(value)
                    except ValueError:
                        continue  # labels
                    assert np.isfinite(x), f"{name.name}:{key}={value}"

    def test_premium_csv_schema(self, run_dir):
        rows = list(csv.DictReader(open(run_dir / "premiums__SSP2-4.5.csv")))
        assert rows[0].keys() == {
            "month", "scenario", "phase", "spot", "msp", "vol_monthly",
            "vol_annual", "rate", "maturity", "premium", "d1", "d2", "vol_clamped",
        }
        for r in rows[:20]:
            assert float(r["vol_annual"]) == pytest.approx(
                float(r["vol_monthly"]) * np.sqrt(12), rel=1e-10
            )
            assert r["vol_clamped"] == "0"

    def test_single_scenario_config(self, tmp_path):
        out = tmp_path / "single"
        cfg = quick_config(out, scenarios=("SSP5-8.5",))
        run_pipeline(cfg)
        rows = list(csv.DictReader(open(out / "fig5_premiums.csv")))
        assert {r["scenario"] for r in rows} == {"SSP5-8.5"}


class TestDeterminismAndPolicies:
    def test_rerun_identical_manifest(self, tmp_path, run_dir):
        out = tmp_path / "again"
        run_pipeline(quick_config(out))
        m1 = json.loads((run_dir / "run_report.json").read_text())["manifest"]
        m2 = json.loads((out / "run_report.json").read_text())["manifest"]
        assert json.dumps(m1, sort_keys=True) == json.dumps(m2, sort_keys=True)

    def test_msp_growth_policy(self, tmp_path):
        out = tmp_path / "growth"
        cfg = quick_config(
            out, pricing=PricingConfig(msp_policy="growth", msp_growth=0.05)
        )
        run_pipeline(cfg)
        rows = list(csv.DictReader(open(out / "premiums__SSP2-4.5.csv")))
        forecast = [r for r in rows if r["phase"] == "forecast"]
        msps = [float(r["msp"]) for r in forecast]
        assert msps[-1] > msps[0]

    def test_spot_linear_trend_policy(self, tmp_path):
        out = tmp_path / "trendspot"
        cfg = quick_config(out, pricing=PricingConfig(spot_policy="linear-trend"))
        run_pipeline(cfg)
        rows = list(csv.DictReader(open(out / "premiums__SSP2-4.5.csv")))
        forecast = [r for r in rows if r["phase"] == "forecast"]
        spots = [float(r["spot"]) for r in forecast]
        assert spots[-1] != spots[0]

    def test_log_volatility_mode(self, tmp_path):
        out = tmp_path / "logvol"
        cfg = quick_config(out, log_volatility=True)
        run_pipeline(cfg)
        rows = list(csv.DictReader(open(out / "forecast__SSP2-4.5.csv")))
        vols = [float(r["mean"]) for r in rows if r["mean"] != ""]
        assert all(v > 0 for v in vols)  # exponentiated back to sigma scale

    def test_anomaly_exog_mode(self, tmp_path):
        out = tmp_path / "anom"
        cfg = quick_config(out, exog_anomalies=True)
        run_pipeline(cfg)
        ingest = json.loads((out / "ingest.json").read_text())
        path = ingest["exog_paths"]["SSP2-4.5"]["tasmax"]
        vals = np.asarray(path["values"])
        # anomalies over the 1970-2014 baseline average out near zero there
        n_baseline = 45 * 12
        assert abs(vals[:n_baseline].mean()) < 1e-9
        assert (out / "fig5_premiums.csv").exists()

    @pytest.mark.slow
    def test_auto_order_selection_paths(self, tmp_path):
        out = tmp_path / "auto"
        cfg = quick_config(
            out,
            egarch_orders="auto",
            egarch_max_order=1,
            sarimax_orders="auto",
            sarimax_grid={"p": (0, 1), "q": (0,), "P": (0, 1), "Q": (0,)},
            scenarios=("SSP2-4.5",),
        )
        run_pipeline(cfg)
        eg = json.loads((out / "egarch_model.json").read_text())
        assert eg["orders"] == {"p": 1, "o": 1, "q": 1}  # singleton grid
        sx = json.loads((out / "sarimax_model__SSP2-4.5.json").read_text())
        assert sx["orders"]["p"] in (0, 1) and sx["orders"]["q"] == 0


class TestCli:
    def test_run_and_exit_codes(self, tmp_path):
        out = tmp_path / "cliout"
        rc = cli_main(["run", "--config", str(ROOT / "configs" / "synthetic.json"), "--out", str(out)])
        assert rc == 0
        assert (out / "run_report.json").exists()

    def test_config_error_exit_code(self):
        assert cli_main(["run", "--config", "/definitely/not/there.json"]) == 2

    def test_data_error_exit_code(self, tmp_path):
        # report without upstream artifacts is a data error: exit 3
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "config_version": 1,
            "dataset_dir": str(DATASET),
            "out_dir": str(tmp_path / "void"),
        }))
        assert cli_main(["report", "--config", str(cfg_path)]) == 3

    def test_exit_code_mapping(self):
        from agrivol.cli import _exit_code
        from agrivol.errors import FitError, NumericError

        assert _exit_code(ConfigError("x")) == 2
        assert _exit_code(DataError("x")) == 3
        assert _exit_code(NumericError("x")) == 4
        assert _exit_code(FitError("x")) == 4
        assert _exit_code(RuntimeError("x")) == 1

    def test_spot_file_policy_preflight(self, tmp_path):
        cfg = quick_config(
            tmp_path,
            pricing=PricingConfig(spot_policy="file", spot_path_file=str(tmp_path / "no.csv")),
        )
        with pytest.raises(ConfigError, match="spot_path_file"):
            cfg.validate()

    def test_installed_entry_point(self, tmp_path):
        r = subprocess.run(
            [sys.executable, "-m", "agrivol.cli", "ingest",
             "--config", str(ROOT / "configs" / "synthetic.json"),
             "--out", str(tmp_path / "entry")],
            capture_output=True, text=True,
        )
        assert r.returncode == 0, r.stderr
        assert "ingest.json" in r.stdout
