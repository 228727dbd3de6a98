import math
from types import SimpleNamespace

import pytest

from micloc.analysis import analyze_radial, noise_sweep_tables, radial_rank_correlation, shell_summary
from micloc.geom import Position3D


def _candidate(index, distance, average, excluded=False):
    return SimpleNamespace(
        index=index,
        gamma=0.5,
        position=Position3D(x=1.0 + distance, y=2.0, z=3.0),
        radial_distance=distance,
        average_cer=None if excluded else average,
        excluded=excluded,
    )


def _result(candidates):
    optimal = min((c for c in candidates if not c.excluded), key=lambda c: (c.average_cer, c.index))
    return SimpleNamespace(candidates=candidates, optimal=optimal)


def test_analyze_radial_sorts_by_distance_and_keeps_every_row():
    result = _result([_candidate(0, 0.4, 9.0), _candidate(1, 0.1, 3.0), _candidate(2, 0.1, 5.0), _candidate(3, 0.2, 4.0, excluded=True)])
    table = analyze_radial(result)

    assert list(table.columns) == ["index", "radial_distance", "average_cer"]
    assert table["index"].tolist() == [1, 2, 3, 0]
    assert math.isnan(table.loc[2, "average_cer"])


def test_radial_rank_correlation():
    monotone = analyze_radial(_result([_candidate(i, 0.1 * (i + 1), 2.0 * i + 1) for i in range(6)]))
    rho, pvalue = radial_rank_correlation(monotone)
    assert rho == pytest.approx(1.0)
    assert 0.0 <= pvalue < 0.05

    too_small = analyze_radial(_result([_candidate(0, 0.1, 1.0), _candidate(1, 0.2, 2.0)]))
    assert all(math.isnan(v) for v in radial_rank_correlation(too_small))

    constant = analyze_radial(_result([_candidate(i, 0.1 * (i + 1), 4.0) for i in range(5)]))
    assert all(math.isnan(v) for v in radial_rank_correlation(constant))


def test_shell_summary_statistics():
    candidates = [
        _candidate(0, 0.30105, 2.0),
        _candidate(1, 0.30095, 8.0),
        _candidate(2, 0.2, 1.0),
        _candidate(3, 0.301, 5.0),
        _candidate(4, 0.301, 0.0, excluded=True),
    ]
    shell = shell_summary(candidates, 0.301, 0.0001)

    assert shell.count == 3
    assert shell.table["index"].tolist() == [0, 1, 3]
    assert (shell.min_cer, shell.max_cer, shell.mean_cer) == (2.0, 8.0, 5.0)
    assert shell.cer_range == 6.0


def test_empty_shell_is_not_an_error():
    shell = shell_summary([_candidate(0, 0.5, 1.0)], 0.25, 0.0)
    assert shell.count == 0
    assert shell.cer_range == 0.0
    assert math.isnan(shell.mean_cer)
    assert list(shell.table.columns) == ["index", "gamma", "x", "y", "z", "radial_distance", "average_cer"]


def test_noise_sweep_tables():
    sweep = {
        0.0: _result([_candidate(0, 0.1, 90.0), _candidate(1, 0.2, 80.0)]),
        15.0: _result([_candidate(0, 0.1, 20.0), _candidate(1, 0.2, 30.0, excluded=True)]),
    }
    optima, runs, mean_cer = noise_sweep_tables(sweep)

    assert optima["snr_db"].tolist() == [0.0, 15.0]
    assert optima["index"].tolist() == [1, 0]
    assert runs.index.tolist() == [0, 1]
    assert runs.loc[1, 0.0] == 80.0
    assert math.isnan(runs.loc[1, 15.0])
    assert mean_cer[0.0] == 85.0
    assert mean_cer[15.0] == 20.0
