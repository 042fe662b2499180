"""Generate the bundled synthetic dataset (data/synthetic).

Seeded and fully deterministic. The design mirrors the real-data layout:

  - climate.csv: four GCM members, tasmax and pr, historical 1970-01..2014-12
    and two emissions scenarios 2015-01..2100-12. The two scenario paths are
    byte-identical through 2024-12 and diverge from 2025-01, when SSP5-8.5
    tasmax ramps up by ~3.2 degC toward 2100. Precipitation is identical
    across scenarios by construction.
  - prices.csv: monthly prices Oct-2001..Dec-2024 whose true return
    volatility is driven by the ensemble-mean tasmax path, so warmer months
    are genuinely more volatile and the two-step pipeline has a real signal
    to recover.
  - msp.csv: annual October floor-price revisions.

Run from the repo root:  python scripts/make_synthetic_dataset.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "synthetic"

SEED = 20240901
MODELS = ("ACCESS-CM2", "AWI-CM-1-1-MR", "CMCC-ESM2", "KACE-1-0-G")
MODEL_OFFSETS = {"ACCESS-CM2": -0.4, "AWI-CM-1-1-MR": -0.15, "CMCC-ESM2": 0.1, "KACE-1-0-G": 0.45}

HIST_START, HIST_END = (1970, 1), (2014, 12)
SCEN_START, SCEN_END = (2015, 1), (2100, 12)
PRICE_START, PRICE_END = (2001, 10), (2024, 12)
DIVERGENCE = (2025, 1)


def month_range(start, end):
    y, m = start
    out = []
    while (y, m) <= end:
        out.append((y, m))
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return out


def months_since(a, b):
    return (a[0] - b[0]) * 12 + (a[1] - b[1])


def tasmax_deterministic(ym, scenario):
    years_1970 = months_since(ym, HIST_START) / 12.0
    seasonal = 6.5 * math.sin(2.0 * math.pi * (ym[1] - 4) / 12.0)
    if ym <= HIST_END:
        warming = 0.012 * years_1970
    else:
        warming = 0.012 * 45.0 + 0.02 * (months_since(ym, SCEN_START) / 12.0)
    ramp = 0.0
    if scenario == "SSP5-8.5" and ym >= DIVERGENCE:
        frac = (months_since(ym, DIVERGENCE) + 1) / (months_since(SCEN_END, DIVERGENCE) + 1)
        ramp = 3.2 * frac**1.5
    return 30.0 + seasonal + warming + ramp


def pr_deterministic(ym):
    seasonal = 0.9 * math.sin(2.0 * math.pi * (ym[1] - 7) / 12.0)
    return math.log(120.0) + seasonal


def build_climate(rng):
    rows = []
    means = {}  # ensemble-mean tasmax per month, needed for the price model
    hist_months = month_range(HIST_START, HIST_END)
    scen_months = month_range(SCEN_START, SCEN_END)

    for model in MODELS:
        off = MODEL_OFFSETS[model]
        noise_t_hist = rng.normal(0.0, 0.35, len(hist_months))
        noise_p_hist = rng.normal(0.0, 0.22, len(hist_months))
        # one shared draw per model for both scenarios: paths are identical
        # until the deterministic ramp separates them
        noise_t_scen = rng.normal(0.0, 0.35, len(scen_months))
        noise_p_scen = rng.normal(0.0, 0.22, len(scen_months))

        for i, ym in enumerate(hist_months):
            t = tasmax_deterministic(ym, "historical") + off + noise_t_hist[i]
            p = math.exp(pr_deterministic(ym) + 0.08 * off + noise_p_hist[i])
            rows.append((ym, "tasmax", "historical", model, t))
            rows.append((ym, "pr", "historical", model, p))
            means.setdefault(("historical", ym), []).append(t)
        for i, ym in enumerate(scen_months):
            p = math.exp(pr_deterministic(ym) + 0.08 * off + noise_p_scen[i])
            for scenario in ("SSP2-4.5", "SSP5-8.5"):
                t = tasmax_deterministic(ym, scenario) + off + noise_t_scen[i]
                rows.append((ym, "tasmax", scenario, model, t))
                rows.append((ym, "pr", scenario, model, p))
                means.setdefault((scenario, ym), []).append(t)
    return rows, means


def build_prices(rng, tasmax_means, msp_end):
    """Prices whose log-return volatility rises with the tasmax path.

    The drift is calibrated so the final price lands a few percent above
    the final floor price: the put ends near the money, where premiums
    actually respond to the volatility forecasts.
    """
    months = month_range(PRICE_START, PRICE_END)
    path = []
    for ym in months:
        key = ("historical", ym) if ym <= HIST_END else (("SSP2-4.5", ym))
        path.append(float(np.mean(tasmax_means[key])))
    path = np.asarray(path)
    z = (path - path.mean()) / path.std()
    sigma = np.exp(-3.1 + 0.55 * z)
    shocks = rng.standard_normal(len(months))
    p0 = 950.0
    shock_sum = float(np.sum(sigma[1:] * shocks[1:]))
    drift = (math.log(1.05 * msp_end / p0) - shock_sum) / (len(months) - 1)
    prices = [p0]
    for i in range(1, len(months)):
        r = drift + sigma[i] * shocks[i]
        prices.append(prices[-1] * math.exp(r))
    return months, [round(p, 2) for p in prices]


def build_msp():
    rows = []
    msp = 800.0
    for year in range(2001, 2025):
        rows.append(((year, 10), round(msp)))
        msp *= 1.045
    return rows


def fmt(ym):
    return f"{ym[0]:04d}-{ym[1]:02d}"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    climate_rows, tasmax_means = build_climate(rng)
    climate_rows.sort(key=lambda r: (r[1], r[2], r[3], r[0]))
    with open(OUT / "climate.csv", "w", encoding="utf-8") as fh:
        fh.write("month,variable,scenario,model,value\n")
        for ym, variable, scenario, model, value in climate_rows:
            fh.write(f"{fmt(ym)},{variable},{scenario},{model},{value:.4f}\n")

    msp_rows = build_msp()
    months, prices = build_prices(rng, tasmax_means, msp_rows[-1][1])
    with open(OUT / "prices.csv", "w", encoding="utf-8") as fh:
        fh.write("month,price\n")
        for ym, p in zip(months, prices):
            fh.write(f"{fmt(ym)},{p}\n")

    with open(OUT / "msp.csv", "w", encoding="utf-8") as fh:
        fh.write("effective_month,msp\n")
        for ym, v in msp_rows:
            fh.write(f"{fmt(ym)},{v}\n")

    manifest = {
        "crop": "testgrain",
        "state": "Synthstate",
        "units": {
            "price": "INR-per-quintal",
            "msp": "INR-per-quintal",
            "tasmax": "degC",
            "pr": "mm-per-month",
        },
        "provenance": "synthetic seeded generator (scripts/make_synthetic_dataset.py)",
        "seed": SEED,
        "gcm_members": list(MODELS),
        "historical_range": [fmt(HIST_START), fmt(HIST_END)],
        "scenario_range": [fmt(SCEN_START), fmt(SCEN_END)],
        "historical_scenario_boundary": "scenario",
        "scenario_divergence_month": fmt(DIVERGENCE),
        "notes": (
            "Scenario exog paths are identical until the divergence month; "
            "only tasmax diverges (SSP5-8.5 ramps up), pr is shared. Price "
            "return volatility is a deterministic function of the tasmax path."
        ),
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    n_climate = len(climate_rows)
    print(f"wrote {OUT} (climate rows: {n_climate}, price months: {len(months)})")


if __name__ == "__main__":
    main()
