from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from micloc.geom import filter_by_shell

SHELL_COLUMNS = ["index", "gamma", "x", "y", "z", "radial_distance", "average_cer"]


def analyze_radial(result) -> pd.DataFrame:
    """One row per candidate, sorted by radial distance from the nominal microphone."""
    table = pd.DataFrame(
        {
            "index": [c.index for c in result.candidates],
            "radial_distance": [c.radial_distance for c in result.candidates],
            "average_cer": [np.nan if c.average_cer is None else c.average_cer for c in result.candidates],
        }
    )
    return table.sort_values("radial_distance", kind="mergesort").reset_index(drop=True)


def radial_rank_correlation(table: pd.DataFrame) -> tuple[float, float]:
    """Spearman rho and p-value between radial distance and average CER."""
    valid = table.dropna(subset=["average_cer"])
    if len(valid) < 3 or valid["average_cer"].nunique() < 2 or valid["radial_distance"].nunique() < 2:
        return math.nan, math.nan
    rho, pvalue = stats.spearmanr(valid["radial_distance"], valid["average_cer"])
    return float(rho), float(pvalue)


@dataclass
class ShellSummary:
    radius: float
    tolerance: float
    table: pd.DataFrame

    @property
    def count(self) -> int:
        return len(self.table)

    @property
    def min_cer(self) -> float:
        return float(self.table["average_cer"].min()) if self.count else math.nan

    @property
    def max_cer(self) -> float:
        return float(self.table["average_cer"].max()) if self.count else math.nan

    @property
    def mean_cer(self) -> float:
        return float(self.table["average_cer"].mean()) if self.count else math.nan

    @property
    def cer_range(self) -> float:
        return self.max_cer - self.min_cer if self.count else 0.0


def shell_summary(candidates, radius: float, tolerance: float) -> ShellSummary:
    shell = [c for c in filter_by_shell(candidates, radius, tolerance) if not c.excluded]
    table = pd.DataFrame(
        [[c.index, c.gamma, c.position.x, c.position.y, c.position.z, c.radial_distance, c.average_cer] for c in shell],
        columns=SHELL_COLUMNS,
    )
    return ShellSummary(radius=radius, tolerance=tolerance, table=table)


def noise_sweep_tables(sweep: dict) -> tuple[pd.DataFrame, pd.DataFrame, pd.Series]:
    """Optimum per SNR, average CER per candidate (run) and SNR, and mean average CER per SNR."""
    optima = pd.DataFrame(
        [
            {
                "snr_db": snr_db,
                "index": result.optimal.index,
                "x": result.optimal.position.x,
                "y": result.optimal.position.y,
                "z": result.optimal.position.z,
                "radial_distance": result.optimal.radial_distance,
                "average_cer": result.optimal.average_cer,
            }
            for snr_db, result in sweep.items()
        ]
    )

    runs = pd.DataFrame(
        {
            snr_db: pd.Series({c.index: c.average_cer for c in result.candidates}, dtype=float)
            for snr_db, result in sweep.items()
        }
    )
    runs.index.name = "index"

    return optima, runs, runs.mean(axis=0, skipna=True)
