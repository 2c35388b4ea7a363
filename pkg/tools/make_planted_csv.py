"""Regenerate tests/data/planted_timeseries.csv.

A 500-row time series at 600 s cadence: five sensor-like features, each
a smooth curve in time plus independent noise, and a target that depends
on exactly two of them, rowwise: target = 2*s2 + sin(3*s4). Aggregating
over 3600 s windows, dropping the time column, and ranking features with
a diagonal shape matrix must put s2 and s4 on top.
"""
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from kernelfuse.data import Dataset, write_csv

N = 500
CADENCE_S = 600.0
NOISE = 0.05
SEED = 42


def build() -> Dataset:
    rng = np.random.default_rng(SEED)
    t = CADENCE_S * np.arange(N)
    u = t / t[-1]
    smooth = {
        "s1": 0.5 + 0.45 * np.cos(2 * np.pi * 1.7 * u),
        "s2": 0.5 + 0.30 * np.sin(2 * np.pi * 1.3 * u),
        "s3": u.copy(),
        "s4": 0.5 + 0.50 * np.sin(2 * np.pi * 3.1 * u + 1.0),
        "s5": 0.5 + 0.50 * np.cos(2 * np.pi * 0.7 * u + 2.0),
    }
    cols = {k: v + NOISE * rng.standard_normal(N) for k, v in smooth.items()}
    f = 2.0 * cols["s2"] + np.sin(3.0 * cols["s4"])
    X = np.column_stack([t] + [cols[f"s{j}"] for j in range(1, 6)])
    return Dataset(X=X, f=f, feature_names=("time", "s1", "s2", "s3", "s4", "s5"),
                   scaling=None, seed=SEED)


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data" / "planted_timeseries.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(build(), out)
    print(f"wrote {out}")
