"""Results JSON/CSV serialization and run reports."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from micloc.analysis import noise_sweep_tables
from micloc.errors import ResultsFileError
from micloc.search import SearchResult

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ["index", "gamma", "x", "y", "z", "radial_distance", "average_cer", "excluded"]


def result_document(result: SearchResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": result.kind,
        "config": result.config_echo.model_dump(mode="json"),
        "room_redraws": result.room_redraws,
        "nominal": result.nominal.model_dump(mode="json") if result.nominal else None,
        "optimal": result.optimal.model_dump(mode="json"),
        "candidates": [c.model_dump(mode="json") for c in sorted(result.candidates, key=lambda c: c.index)],
        "provenance": result.provenance.model_dump(mode="json"),
    }


def candidates_frame(result: SearchResult) -> pd.DataFrame:
    utterance_ids = [u.id for u in result.config_echo.utterances]
    rows = []
    for c in sorted(result.candidates, key=lambda c: c.index):
        row = [c.index, c.gamma, c.position.x, c.position.y, c.position.z, c.radial_distance, c.average_cer, c.excluded]
        rows.append(row + list(c.per_utterance_cer))
    return pd.DataFrame(rows, columns=CSV_COLUMNS + [f"cer_{uid}" for uid in utterance_ids])


def write_results(result: SearchResult, output_directory: Path, stem: str = "results") -> tuple[Path, Path]:
    output_directory = Path(output_directory)
    output_directory.mkdir(parents=True, exist_ok=True)

    json_path = output_directory / f"{stem}.json"
    csv_path = output_directory / f"{stem}.csv"

    with open(json_path, "w", encoding="utf-8") as fp:
        json.dump(result_document(result), fp, indent=2, ensure_ascii=False)
    candidates_frame(result).to_csv(csv_path, index=False)

    logger.info(f"✅ Wrote {json_path} and {csv_path}")
    return json_path, csv_path


def load_results(path) -> SearchResult:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fp:
            document = json.load(fp)
    except FileNotFoundError as e:
        raise ResultsFileError(f"Results file not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ResultsFileError(f"Could not read results file {path}: {e}") from e

    if not isinstance(document, dict) or document.get("schema_version") != SCHEMA_VERSION:
        raise ResultsFileError(f"{path} is not a version {SCHEMA_VERSION} results document")

    try:
        return SearchResult(
            kind=document["kind"],
            candidates=document["candidates"],
            optimal=document["optimal"],
            nominal=document.get("nominal"),
            config_echo=document["config"],
            room_redraws=document.get("room_redraws", 0),
            provenance=document["provenance"],
        )
    except (KeyError, ValidationError) as e:
        raise ResultsFileError(f"Invalid results document {path}: {e}") from e


def _cer_statistics(result: SearchResult) -> dict:
    values = [c.average_cer for c in result.candidates if not c.excluded]
    series = pd.Series(values, dtype=float)
    return {
        "min": float(series.min()),
        "max": float(series.max()),
        "mean": float(series.mean()),
        "median": float(series.median()),
    }


def _position_row(candidate) -> dict:
    return {
        "index": candidate.index,
        "x": candidate.position.x,
        "y": candidate.position.y,
        "z": candidate.position.z,
        "radial_distance": candidate.radial_distance,
        "average_cer": candidate.average_cer,
    }


def write_search_report(result: SearchResult, output_directory: Path, stem: str = "results") -> tuple[Path, Path]:
    output_directory = Path(output_directory)
    output_directory.mkdir(parents=True, exist_ok=True)

    markdown_report_path = output_directory / f"{stem}_report.md"
    json_report_path = output_directory / f"{stem}_report.json"

    statistics = _cer_statistics(result)
    optimal = result.optimal
    nominal = result.nominal

    report_string = f"""
# Search result
| Result | Count |
|--|--|
| Evaluated candidates: | {len(result.candidates)} |
| Excluded candidates: | {len(result.excluded)} |
| Failed transcriptions: | {result.failed_cells} |
| Out-of-room redraws: | {result.room_redraws} |
| Noise: | {result.config_echo.noise.label} |

# Average CER over candidates
| Statistic | Value |
|--|--|
| Min | {statistics['min']:.4f} |
| Max | {statistics['max']:.4f} |
| Mean | {statistics['mean']:.4f} |
| Median | {statistics['median']:.4f} |

# Optimal position
| Index | x | y | z | Radial distance | Average CER |
|--|--|--|--|--|--|
| {optimal.index} | {optimal.position.x:.5f} | {optimal.position.y:.5f} | {optimal.position.z:.5f} | {optimal.radial_distance:.5f} | {optimal.average_cer:.4f} |
"""
    if nominal is not None:
        nominal_cer = "excluded" if nominal.excluded else f"{nominal.average_cer:.4f}"
        report_string += f"""
# Nominal position
| x | y | z | Average CER |
|--|--|--|--|
| {nominal.position.x:.5f} | {nominal.position.y:.5f} | {nominal.position.z:.5f} | {nominal_cer} |
"""

    with open(markdown_report_path, "w", encoding="utf-8") as fp:
        fp.write(report_string)

    report_json = {
        "evaluated_candidates": len(result.candidates),
        "excluded_candidates": len(result.excluded),
        "failed_transcriptions": result.failed_cells,
        "room_redraws": result.room_redraws,
        "noise": result.config_echo.noise.label,
        "average_cer": statistics,
        "optimal": _position_row(optimal),
        "nominal": _position_row(nominal) if nominal is not None else None,
    }
    with open(json_report_path, "w", encoding="utf-8") as fp:
        json.dump(report_json, fp, indent=2, ensure_ascii=False)

    return markdown_report_path, json_report_path


def write_noise_sweep(sweep: dict, output_directory: Path) -> dict[str, Path]:
    """Per-SNR results plus the optima and runs tables of the sweep."""
    output_directory = Path(output_directory)
    paths = {}

    for snr_db, result in sweep.items():
        stem = f"results_snr{snr_db:g}"
        paths[stem], _ = write_results(result, output_directory, stem)
        write_search_report(result, output_directory, stem)

    optima, runs, mean_cer = noise_sweep_tables(sweep)
    paths["optima"] = output_directory / "noise_sweep_optima.csv"
    paths["runs"] = output_directory / "noise_sweep_runs.csv"
    paths["mean"] = output_directory / "noise_sweep_mean_cer.csv"
    optima.to_csv(paths["optima"], index=False)
    runs.to_csv(paths["runs"])
    mean_cer.rename_axis("snr_db").rename("mean_average_cer").to_csv(paths["mean"])

    return paths
