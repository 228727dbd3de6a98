import json

import pandas as pd
import pytest

from micloc.errors import ResultsFileError
from micloc.results import (
    CSV_COLUMNS,
    SCHEMA_VERSION,
    load_results,
    result_document,
    write_noise_sweep,
    write_results,
    write_search_report,
)
from micloc.search import run_noise_sweep, run_search


@pytest.fixture
def search_result(make_search_config):
    return run_search(make_search_config(evaluate_nominal=True))


def test_result_document_layout(search_result):
    document = result_document(search_result)
    assert list(document) == ["schema_version", "kind", "config", "room_redraws", "nominal", "optimal", "candidates", "provenance"]
    assert document["schema_version"] == SCHEMA_VERSION
    assert [c["index"] for c in document["candidates"]] == list(range(5))
    assert set(document["provenance"]) == {"master_seed", "started_at", "finished_at", "adapter", "jobs", "version"}
    assert document["provenance"]["adapter"] == "mock:seed=0"


def test_results_round_trip(search_result, tmp_path):
    json_path, csv_path = write_results(search_result, tmp_path)
    assert json_path.name == "results.json"

    loaded = load_results(json_path)
    assert loaded == search_result

    table = pd.read_csv(csv_path)
    assert list(table.columns) == CSV_COLUMNS + ["cer_utt_00", "cer_utt_01"]
    assert len(table) == 5
    assert table["index"].tolist() == list(range(5))


def test_load_results_errors(tmp_path):
    with pytest.raises(ResultsFileError):
        load_results(tmp_path / "missing.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ResultsFileError):
        load_results(broken)

    wrong_version = tmp_path / "old.json"
    wrong_version.write_text(json.dumps({"schema_version": 0}))
    with pytest.raises(ResultsFileError):
        load_results(wrong_version)

    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "kind": "ball"}))
    with pytest.raises(ResultsFileError):
        load_results(incomplete)


def test_search_report(search_result, tmp_path):
    markdown_path, json_path = write_search_report(search_result, tmp_path)

    markdown = markdown_path.read_text(encoding="utf-8")
    assert "# Optimal position" in markdown
    assert "# Nominal position" in markdown

    report = json.loads(json_path.read_text(encoding="utf-8"))
    assert report["evaluated_candidates"] == 5
    assert report["excluded_candidates"] == 0
    assert report["optimal"]["index"] == search_result.optimal.index
    assert report["average_cer"]["min"] == search_result.optimal.average_cer


def test_noise_sweep_files(make_search_config, tmp_path):
    config = make_search_config(noise={"kind": "white", "snr_db": 0.0}, candidates_per_gamma=2)
    sweep = run_noise_sweep(config, [0.0, 10.0])
    paths = write_noise_sweep(sweep, tmp_path)

    assert (tmp_path / "results_snr0.json").exists()
    assert (tmp_path / "results_snr10.csv").exists()
    assert (tmp_path / "results_snr10_report.md").exists()

    optima = pd.read_csv(paths["optima"])
    assert optima["snr_db"].tolist() == [0.0, 10.0]
    runs = pd.read_csv(paths["runs"])
    assert list(runs.columns) == ["index", "0.0", "10.0"]
    assert len(runs) == 2
