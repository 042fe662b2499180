"""End-to-end orchestration: ingest -> trend -> EGARCH -> per-scenario
SARIMAX -> forecast -> pricing -> report.

Each stage is independently invokable and communicates only through
serialized artifacts in the output directory, so the CLI subcommands and
`run_pipeline` share one code path. Everything is deterministic for a
fixed config and seed; the run report carries a manifest of content hashes
to make that checkable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import egarch as eg
from . import sarimax as sx
from .config import PipelineConfig
from .errors import ConfigError, DataError, StageError
from .ingest import anomalies as climate_anomalies
from .ingest import read_dataset, read_price_csv
from .pricing import premium_series
from .series import MonthlySeries, MonthStamp, band, log_returns, mann_kendall, ols_trend, smooth

STAGES = ("ingest", "trend", "fit-egarch", "fit-sarimax", "forecast", "price", "report")

PHASES = ("historical", "validation", "forecast")

HISTORICAL_CUT = MonthStamp(2014, 12)  # exog switches to scenario data after this


# --- small IO helpers -------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return str(v)
    if isinstance(v, (np.floating,)):
        return str(float(v))
    return str(v)


@dataclass
class StageSink:
    """Records every file a stage writes so failures can be cleaned up."""

    out_dir: Path
    files: list[Path] = field(default_factory=list)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_text(self, name: str, text: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        self.files.append(p)
        return p

    def write_json(self, name: str, doc) -> Path:
        return self.write_text(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.path(name)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(p)
        return p

    def discard(self) -> None:
        for p in self.files:
            try:
                p.unlink()
            except OSError:
                pass


def _series_doc(s: MonthlySeries) -> dict:
    return {"start": str(s.start), "unit": s.unit, "values": s.values.tolist()}


def _series_from_doc(doc: dict) -> MonthlySeries:
    return MonthlySeries(
        MonthStamp.parse(doc["start"]), np.asarray(doc["values"], dtype=float), unit=doc["unit"]
    )


def _load_artifact(cfg: PipelineConfig, name: str, producer: str) -> Path:
    p = Path(cfg.out_dir) / name
    if not p.exists():
        raise DataError(f"missing artifact {name}; run the '{producer}' stage first")
    return p


def _load_json(cfg: PipelineConfig, name: str, producer: str) -> dict:
    return json.loads(_load_artifact(cfg, name, producer).read_text(encoding="utf-8"))


def _read_csv_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- exogenous path construction --------------------------------------------

def _exog_path(means: dict, variable: str, scenario: str, use_anomalies: bool) -> MonthlySeries:
    """Historical ensemble mean up to the cut month joined to a scenario mean."""
    hist = means.get((variable, "historical"))
    scen = means.get((variable, scenario))
    if hist is None:
        raise DataError(f"dataset has no historical ensemble for {variable}")
    if scen is None:
        raise DataError(f"dataset has no {scenario} ensemble for {variable}")
    cut = HISTORICAL_CUT if hist.end > HISTORICAL_CUT else hist.end
    hist_part = hist.slice_range(hist.start, cut)
    if scen.start != hist_part.end.plus(1):
        raise DataError(
            f"{variable}: {scenario} starts at {scen.start}, expected "
            f"{hist_part.end.plus(1)} right after the historical cut"
        )
    joined = MonthlySeries(
        hist_part.start, np.concatenate([hist_part.values, scen.values]), hist.unit
    )
    if use_anomalies:
        joined = climate_anomalies(joined, hist_part.start, hist_part.end)
    return joined


# --- stages ------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig, sink: StageSink) -> None:
    ds = read_dataset(cfg.dataset_dir, cfg.average_duplicate_prices)
    for variable in cfg.exog_variables:
        for scenario in cfg.scenarios:
            if (variable, scenario) not in ds.panel.means:
                raise DataError(f"dataset lacks ensemble data for {variable}/{scenario}")

    exog_paths = {}
    for scenario in cfg.scenarios:
        exog_paths[scenario] = {
            variable: _series_doc(
                _exog_path(ds.panel.means, variable, scenario, cfg.exog_anomalies)
            )
            for variable in cfg.exog_variables
        }

    doc = {
        "manifest": ds.manifest,
        "crop": cfg.crop or ds.manifest.get("crop", ""),
        "state": cfg.state or ds.manifest.get("state", ""),
        "prices": _series_doc(ds.prices),
        "msp": _series_doc(ds.msp),
        "ensemble_means": {
            f"{variable}|{scenario}": _series_doc(series)
            for (variable, scenario), series in sorted(ds.panel.means.items())
        },
        "member_counts": {
            f"{variable}|{scenario}": counts
            for (variable, scenario), counts in sorted(ds.panel.counts.items())
        },
        "exog_variables": list(cfg.exog_variables),
        "exog_anomalies": cfg.exog_anomalies,
        "exog_paths": exog_paths,
    }
    sink.write_json("ingest.json", doc)


def stage_trend(cfg: PipelineConfig, sink: StageSink) -> None:
    ingest = _load_json(cfg, "ingest.json", "ingest")
    rows = []
    for key in sorted(ingest["ensemble_means"]):
        variable, scenario = key.split("|")
        series = _series_from_doc(ingest["ensemble_means"][key])
        trend = mann_kendall(series)
        slope, intercept = ols_trend(series)
        rows.append(
            [
                variable,
                scenario,
                str(series.start),
                str(series.end),
                len(series),
                trend.s_statistic,
                trend.variance_s,
                trend.z_score,
                trend.p_value,
                trend.direction,
                slope,
                intercept,
            ]
        )
    sink.write_csv(
        "trends.csv",
        [
            "variable", "scenario", "start", "end", "n",
            "s_statistic", "variance_s", "z_score", "p_value", "direction",
            "ols_slope_per_month", "ols_intercept",
        ],
        rows,
    )


def stage_fit_egarch(cfg: PipelineConfig, sink: StageSink) -> None:
    ingest = _load_json(cfg, "ingest.json", "ingest")
    prices = _series_from_doc(ingest["prices"])
    returns = log_returns(prices)
    if cfg.egarch_orders == "auto":
        orders = eg.select_orders(returns, cfg.egarch_max_order)
    else:
        orders = eg.EgarchOrders(*cfg.egarch_orders)
    fit = eg.egarch_fit(returns, orders)
    sink.write_text("egarch_model.json", eg.fit_to_json(fit) + "\n")


def _volatility_series(cfg: PipelineConfig, egarch_doc: dict) -> MonthlySeries:
    sigma = _series_from_doc(egarch_doc["sigma"])
    if cfg.log_volatility:
        return MonthlySeries(sigma.start, np.log(sigma.values), unit="log-volatility")
    return sigma


def _split_counts(n: int, fraction: float) -> tuple[int, int]:
    n_val = min(n - 1, max(1, round(fraction * n)))
    return n - n_val, n_val


def stage_fit_sarimax(cfg: PipelineConfig, sink: StageSink, scenario: str) -> None:
    ingest = _load_json(cfg, "ingest.json", "ingest")
    egarch_doc = json.loads(
        _load_artifact(cfg, "egarch_model.json", "fit-egarch").read_text(encoding="utf-8")
    )
    y_full = _volatility_series(cfg, egarch_doc)
    n_train, n_val = _split_counts(len(y_full), cfg.validation_fraction)
    train = y_full.slice_range(y_full.start, y_full.start.plus(n_train - 1))

    exog_train = [
        _series_from_doc(ingest["exog_paths"][scenario][variable]).slice_range(
            train.start, train.end
        )
        for variable in cfg.exog_variables
    ]
    if cfg.sarimax_orders == "auto":
        orders = sx.select_sarimax_orders(train, exog_train, cfg.sarimax_grid, s=12)
    else:
        p, m, q, P, M, Q, s = cfg.sarimax_orders
        orders = sx.SarimaxOrders(p=p, m=m, q=q, P=P, M=M, Q=Q, s=s)
    model = sx.sarimax_fit(train, exog_train, orders, exog_names=list(cfg.exog_variables))
    model.validation_split = {
        "fraction": cfg.validation_fraction,
        "train_start": str(train.start),
        "train_end": str(train.end),
        "validation_start": str(train.end.plus(1)),
        "validation_end": str(y_full.end),
        "n_train": n_train,
        "n_validation": n_val,
    }
    sink.write_text(f"sarimax_model__{scenario}.json", sx.model_to_json(model) + "\n")


def stage_forecast(cfg: PipelineConfig, sink: StageSink, scenario: str) -> None:
    ingest = _load_json(cfg, "ingest.json", "ingest")
    egarch_doc = json.loads(
        _load_artifact(cfg, "egarch_model.json", "fit-egarch").read_text(encoding="utf-8")
    )
    model_text = _load_artifact(
        cfg, f"sarimax_model__{scenario}.json", "fit-sarimax"
    ).read_text(encoding="utf-8")
    model = sx.model_from_json(model_text)

    y_full = _volatility_series(cfg, egarch_doc)
    exog_docs = ingest["exog_paths"][scenario]
    exog_full = [
        _series_from_doc(exog_docs[variable]).slice_range(y_full.start, y_full.end)
        for variable in cfg.exog_variables
    ]
    extended = model.with_observations(y_full, exog_full)
    onestep = extended.insample

    forecast_end = MonthStamp.parse(cfg.forecast_end)
    forecast_start = y_full.end.plus(1)
    horizon = forecast_end.months_since(y_full.end)
    if horizon <= 0:
        raise ConfigError(f"forecast_end {forecast_end} is not after the sample end {y_full.end}")
    exog_future = []
    for variable in cfg.exog_variables:
        path = _series_from_doc(exog_docs[variable])
        if path.end < forecast_end:
            raise DataError(
                f"exog path for {variable}/{scenario} ends {path.end}, before {forecast_end}"
            )
        exog_future.append(path.slice_range(forecast_start, forecast_end))
    fc = sx.sarimax_forecast(extended, exog_future, horizon)

    val_split = model.validation_split or {}
    val_start = MonthStamp.parse(val_split["validation_start"])

    def to_sigma_scale(mean: float, side: float) -> float:
        return float(np.exp(mean + side)) if cfg.log_volatility else float(mean + side)

    rows = []
    for i, stamp in enumerate(y_full.months()):
        phase = "historical" if stamp < val_start else "validation"
        try:
            j = onestep.mean.index_of(stamp)
        except KeyError:  # differencing burn-in months have no prediction
            rows.append([str(stamp), phase, None, None, None, None])
            continue
        m, s = float(onestep.mean.values[j]), float(onestep.se.values[j])
        rows.append(
            [str(stamp), phase, to_sigma_scale(m, 0.0), s, to_sigma_scale(m, -s), to_sigma_scale(m, s)]
        )
    for j, stamp in enumerate(fc.mean.months()):
        m, s = float(fc.mean.values[j]), float(fc.se.values[j])
        rows.append(
            [str(stamp), "forecast", to_sigma_scale(m, 0.0), s, to_sigma_scale(m, -s), to_sigma_scale(m, s)]
        )
    sink.write_csv(
        f"forecast__{scenario}.csv",
        ["month", "phase", "mean", "se", "lower68", "upper68"],
        rows,
    )

    # Validation score: mean absolute error against the observed volatility.
    sigma_obs = _series_from_doc(egarch_doc["sigma"])
    abs_errors = []
    for i in range(len(y_full)):
        stamp = y_full.start.plus(i)
        if stamp < val_start:
            continue
        try:
            j = onestep.mean.index_of(stamp)
        except KeyError:
            continue
        pred = to_sigma_scale(float(onestep.mean.values[j]), 0.0)
        abs_errors.append(abs(pred - float(sigma_obs.values[i])))
    summary = {
        "scenario": scenario,
        "validation_mae": float(np.mean(abs_errors)) if abs_errors else None,
        "n_validation_scored": len(abs_errors),
        "forecast_start": str(forecast_start),
        "forecast_end": str(forecast_end),
        "horizon_months": horizon,
    }
    sink.write_json(f"forecast_summary__{scenario}.json", summary)


def _future_spot(cfg: PipelineConfig, prices: MonthlySeries, months: int) -> np.ndarray:
    policy = cfg.pricing.spot_policy
    if policy == "hold-last":
        return np.full(months, prices.values[-1])
    if policy == "linear-trend":
        slope, intercept = ols_trend(prices)
        n = len(prices)
        return intercept + slope * np.arange(n, n + months, dtype=float)
    spot = read_price_csv(cfg.pricing.spot_path_file)
    start, end = prices.end.plus(1), prices.end.plus(months)
    try:
        return spot.slice_range(start, end).values
    except KeyError:
        raise DataError(
            f"spot path file {cfg.pricing.spot_path_file} does not cover {start}..{end}"
        ) from None


def _future_msp(cfg: PipelineConfig, msp: MonthlySeries, months: int) -> np.ndarray:
    last = msp.values[-1]
    if cfg.pricing.msp_policy == "hold-last":
        return np.full(months, last)
    g = cfg.pricing.msp_growth
    k = np.arange(1, months + 1, dtype=float)
    return last * (1.0 + g) ** (k / 12.0)


def stage_price(cfg: PipelineConfig, sink: StageSink, scenario: str) -> None:
    ingest = _load_json(cfg, "ingest.json", "ingest")
    fc_path = _load_artifact(cfg, f"forecast__{scenario}.csv", "forecast")
    rows = _read_csv_rows(fc_path)
    rows = [r for r in rows if r["mean"] != ""]  # differencing burn-in has no vol
    if not rows:
        raise DataError(f"forecast__{scenario}.csv holds no usable predictions")

    prices = _series_from_doc(ingest["prices"])
    msp = _series_from_doc(ingest["msp"])
    months = [MonthStamp.parse(r["month"]) for r in rows]
    for a, b in zip(months, months[1:]):
        if b != a.plus(1):
            raise DataError(f"forecast months are not contiguous around {b}")
    start = months[0]

    floor = cfg.pricing.vol_floor
    vol = np.array([float(r["mean"]) for r in rows])
    clamped = vol < floor
    vol = np.maximum(vol, floor)
    phases = [r["phase"] for r in rows]

    n_future = max(0, months[-1].months_since(prices.end))
    spot_vals = np.concatenate(
        [
            prices.slice_range(start, min(prices.end, months[-1])).values,
            _future_spot(cfg, prices, n_future),
        ]
    )
    msp_vals = np.concatenate(
        [
            msp.slice_range(start, min(msp.end, months[-1])).values,
            _future_msp(cfg, msp, n_future),
        ]
    )
    spot_series = MonthlySeries(start, spot_vals, prices.unit)
    msp_series = MonthlySeries(start, msp_vals, msp.unit)
    vol_series = MonthlySeries(start, vol, "dimensionless")

    prem = premium_series(
        spot_series,
        msp_series,
        vol_series,
        rate=cfg.pricing.rate,
        maturity_years=cfg.pricing.maturity_years,
        scenario=scenario,
        phases=phases,
    )
    out_rows = []
    for i, q in enumerate(prem.quotes):
        out_rows.append(
            [
                str(months[i]),
                scenario,
                phases[i],
                q.inputs.spot,
                q.inputs.strike,
                vol[i],
                q.inputs.vol,
                q.inputs.rate,
                q.inputs.maturity,
                q.price,
                q.d1,
                q.d2,
                int(clamped[i]),
            ]
        )
    sink.write_csv(
        f"premiums__{scenario}.csv",
        [
            "month", "scenario", "phase", "spot", "msp", "vol_monthly", "vol_annual",
            "rate", "maturity", "premium", "d1", "d2", "vol_clamped",
        ],
        out_rows,
    )


def stage_report(cfg: PipelineConfig, sink: StageSink, stage_log: list | None = None) -> None:
    ingest = _load_json(cfg, "ingest.json", "ingest")
    egarch_doc = json.loads(
        _load_artifact(cfg, "egarch_model.json", "fit-egarch").read_text(encoding="utf-8")
    )
    for scenario in cfg.scenarios:
        _load_artifact(cfg, f"forecast__{scenario}.csv", "forecast")
        _load_artifact(cfg, f"premiums__{scenario}.csv", "price")

    prices = _series_from_doc(ingest["prices"])
    msp = _series_from_doc(ingest["msp"])

    # fig1: price with trailing envelope plus the MSP step.
    price_band = band(prices, cfg.price_band_window, "k-sigma", cfg.price_band_k, "trailing")
    rows = []
    for i, stamp in enumerate(prices.months()):
        try:
            j = price_band.center.index_of(stamp)
            c, lo, up = (
                float(price_band.center.values[j]),
                float(price_band.lower.values[j]),
                float(price_band.upper.values[j]),
            )
        except KeyError:
            c = lo = up = None
        rows.append([str(stamp), float(prices.values[i]), float(msp.values[i]), c, lo, up])
    sink.write_csv(
        "fig1_price_bands.csv",
        ["month", "price", "msp", "center", "lower", "upper"],
        rows,
    )

    # fig2: centered climate envelopes per variable and scenario.
    rows = []
    for key in sorted(ingest["ensemble_means"]):
        variable, scenario = key.split("|")
        series = _series_from_doc(ingest["ensemble_means"][key])
        rule = "log-sigma-factor" if variable == "pr" else "k-sigma"
        b = band(series, cfg.climate_band_window, rule, cfg.climate_band_k, "centered")
        for i, stamp in enumerate(b.center.months()):
            rows.append(
                [
                    str(stamp),
                    variable,
                    scenario,
                    float(b.center.values[i]),
                    float(b.lower.values[i]),
                    float(b.upper.values[i]),
                ]
            )
    sink.write_csv(
        "fig2_climate_bands.csv",
        ["month", "variable", "scenario", "center", "lower", "upper"],
        rows,
    )

    # fig3: returns, squared returns, fitted volatility.
    returns = log_returns(prices)
    sigma = _series_from_doc(egarch_doc["sigma"])
    rows = [
        [
            str(stamp),
            float(returns.values[i]),
            float(returns.values[i] ** 2),
            float(sigma.values[i]),
        ]
        for i, stamp in enumerate(returns.months())
    ]
    sink.write_csv(
        "fig3_returns_volatility.csv",
        ["month", "log_return", "squared_return", "egarch_sigma"],
        rows,
    )

    # fig4, one file per scenario (its schema has no scenario column).
    for scenario in cfg.scenarios:
        fc_rows = _read_csv_rows(Path(cfg.out_dir) / f"forecast__{scenario}.csv")
        predicted = [float(r["mean"]) for r in fc_rows if r["mean"] != ""]
        pred_start = next(
            MonthStamp.parse(r["month"]) for r in fc_rows if r["mean"] != ""
        )
        smoothed = smooth(
            MonthlySeries(pred_start, np.asarray(predicted), "dimensionless"),
            cfg.smoothing_window,
        )
        rows = []
        for r in fc_rows:
            stamp = MonthStamp.parse(r["month"])
            try:
                sig = float(sigma.values[sigma.index_of(stamp)])
            except KeyError:
                sig = None
            if r["mean"] == "":
                rows.append([r["month"], r["phase"], sig, None, None, None, None])
            else:
                rows.append(
                    [
                        r["month"],
                        r["phase"],
                        sig,
                        float(r["mean"]),
                        float(r["lower68"]),
                        float(r["upper68"]),
                        float(smoothed.values[smoothed.index_of(stamp)]),
                    ]
                )
        sink.write_csv(
            f"fig4_sarimax_forecast__{scenario}.csv",
            ["month", "phase", "egarch_sigma", "predicted", "lower68", "upper68", "smoothed"],
            rows,
        )

    # fig5: premiums keyed by (month, scenario), raw and smoothed.
    rows = []
    for scenario in cfg.scenarios:
        prem_rows = _read_csv_rows(Path(cfg.out_dir) / f"premiums__{scenario}.csv")
        premiums = np.array([float(r["premium"]) for r in prem_rows])
        start = MonthStamp.parse(prem_rows[0]["month"])
        smoothed = smooth(MonthlySeries(start, premiums, "INR-per-quintal"), cfg.smoothing_window)
        for i, r in enumerate(prem_rows):
            rows.append(
                [r["month"], scenario, r["phase"], premiums[i], float(smoothed.values[i])]
            )
    sink.write_csv(
        "fig5_premiums.csv",
        ["month", "scenario", "phase", "premium", "premium_smoothed"],
        rows,
    )

    _write_run_report(cfg, sink, stage_log or [], egarch_doc)


def _write_run_report(cfg, sink: StageSink, stage_log: list, egarch_doc: dict) -> None:
    out = Path(cfg.out_dir)
    manifest = {}
    names = sorted(
        p.name
        for p in out.iterdir()
        if p.is_file() and p.name != "run_report.json" and (p.suffix in (".csv", ".json"))
    )
    for name in names:
        digest = hashlib.sha256((out / name).read_bytes()).hexdigest()
        manifest[name] = digest

    models = {
        "egarch": {
            "orders": egarch_doc["orders"],
            "params": egarch_doc["params"],
            "loglik": egarch_doc["loglik"],
            "aic": egarch_doc["aic"],
            "converged": egarch_doc["converged"],
        },
        "sarimax": {},
    }
    validation = {}
    for scenario in cfg.scenarios:
        model_path = out / f"sarimax_model__{scenario}.json"
        if model_path.exists():
            doc = json.loads(model_path.read_text(encoding="utf-8"))
            models["sarimax"][scenario] = {
                "orders": doc["orders"],
                "params": doc["params"],
                "loglik": doc["loglik"],
                "aic": doc["aic"],
                "converged": doc["converged"],
            }
        summary_path = out / f"forecast_summary__{scenario}.json"
        if summary_path.exists():
            validation[scenario] = json.loads(summary_path.read_text(encoding="utf-8"))

    report = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "stages": stage_log,
        "models": models,
        "validation": validation,
        "manifest": manifest,
    }
    sink.write_json("run_report.json", report)


# --- drivers -----------------------------------------------------------------

def _run_stage(cfg: PipelineConfig, name: str, scenario: str | None = None) -> StageSink:
    sink = StageSink(Path(cfg.out_dir))
    try:
        if name == "ingest":
            stage_ingest(cfg, sink)
        elif name == "trend":
            stage_trend(cfg, sink)
        elif name == "fit-egarch":
            stage_fit_egarch(cfg, sink)
        elif name == "fit-sarimax":
            for scen in [scenario] if scenario else cfg.scenarios:
                stage_fit_sarimax(cfg, sink, scen)
        elif name == "forecast":
            for scen in [scenario] if scenario else cfg.scenarios:
                stage_forecast(cfg, sink, scen)
        elif name == "price":
            for scen in [scenario] if scenario else cfg.scenarios:
                stage_price(cfg, sink, scen)
        elif name == "report":
            stage_report(cfg, sink)
        else:
            raise ConfigError(f"unknown stage {name!r}; stages: {', '.join(STAGES)}")
    except Exception as e:
        sink.discard()
        raise StageError(name, e) from e
    return sink


def cmd_stage(cfg: PipelineConfig, name: str, scenario: str | None = None) -> list[str]:
    """Run one stage; returns the artifact files it wrote."""
    cfg.validate()
    if scenario is not None and scenario not in cfg.scenarios:
        raise ConfigError(f"scenario {scenario!r} not in configured scenarios {list(cfg.scenarios)}")
    sink = _run_stage(cfg, name, scenario)
    return [str(p) for p in sink.files]


@dataclass
class RunReport:
    stages: list[dict]
    manifest: dict[str, str]
    report_path: str
    files: list[str]


def run_pipeline(cfg: PipelineConfig) -> RunReport:
    """Execute every stage in order; deterministic for a fixed config+seed."""
    cfg.validate()
    stage_log: list[dict] = []
    files: list[str] = []
    order = ["ingest", "trend", "fit-egarch", "fit-sarimax", "forecast", "price"]
    for name in order:
        t0 = time.perf_counter()
        sink = _run_stage(cfg, name)
        stage_log.append(
            {"name": name, "status": "ok", "seconds": round(time.perf_counter() - t0, 3)}
        )
        files.extend(str(p) for p in sink.files)

    t0 = time.perf_counter()
    sink = StageSink(Path(cfg.out_dir))
    try:
        stage_report(cfg, sink, stage_log + [{"name": "report", "status": "ok", "seconds": None}])
    except Exception as e:
        sink.discard()
        raise StageError("report", e) from e
    stage_log.append(
        {"name": "report", "status": "ok", "seconds": round(time.perf_counter() - t0, 3)}
    )
    files.extend(str(p) for p in sink.files)

    report = json.loads((Path(cfg.out_dir) / "run_report.json").read_text(encoding="utf-8"))
    return RunReport(
        stages=stage_log,
        manifest=report["manifest"],
        report_path=str(Path(cfg.out_dir) / "run_report.json"),
        files=files,
    )
