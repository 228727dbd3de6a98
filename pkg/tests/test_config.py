import json

import pytest

from micloc.config import SEED_ENVIRONMENT_VARIABLE, apply_overrides, load_experiment_config
from micloc.errors import ConfigurationError

from .conftest import RESOURCES


@pytest.fixture
def blueprint(tmp_path):
    """Copy of the bundled blueprint config inside tmp_path."""
    data = json.loads((RESOURCES / "config.json").read_text(encoding="utf-8"))

    def _write(**changes):
        for dotted, value in changes.items():
            target = data
            *parents, key = dotted.split("__")
            for parent in parents:
                target = target[parent]
            target[key] = value
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write


def test_blueprint_config_loads():
    config = load_experiment_config(RESOURCES / "config.json")
    assert config.search.room.length == 7.5
    assert config.search.gammas == [0.02, 0.1]
    assert len(config.search.gammas) * config.search.candidates_per_gamma == 10
    assert len(config.search.utterances) == 3
    assert config.search.adapter.mode == "mock"
    assert config.sphere_probe.radius == 0.301
    assert config.noise_sweep_snrs == [0.0, 5.0, 10.0, 15.0]


def test_paths_resolve_against_config_directory(blueprint, tmp_path):
    config = load_experiment_config(blueprint())
    assert config.search.utterances[0].audio_path == (tmp_path / "utterances" / "utt_01.wav").resolve()
    assert config.output_directory == (tmp_path / "results").resolve()


def test_unknown_key_is_named(blueprint):
    with pytest.raises(ConfigurationError, match="search.room.colour"):
        load_experiment_config(blueprint(search__room__colour="beige"))


@pytest.mark.parametrize(
    "change, key",
    [
        ({"search__nominal_mic__w": 9.0}, "search.nominal_mic.w"),
        ({"search__source__elevation": 1.0}, "search.source.elevation"),
        ({"search__adapter__params__target": {"x": 1.0, "y": 2.0, "z": 3.0, "w": 0.0}}, "params.target.w"),
    ],
)
def test_unknown_key_inside_a_position_is_named(blueprint, change, key):
    with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
        load_experiment_config(blueprint(**change))


def test_invalid_values_are_configuration_errors(blueprint):
    with pytest.raises(ConfigurationError, match="gammas"):
        load_experiment_config(blueprint(search__gammas=[-0.1]))


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigurationError):
        load_experiment_config(tmp_path / "nope.json")
    broken = tmp_path / "broken.json"
    broken.write_text("[1, 2")
    with pytest.raises(ConfigurationError):
        load_experiment_config(broken)


def test_seed_precedence(blueprint, monkeypatch):
    monkeypatch.delenv(SEED_ENVIRONMENT_VARIABLE, raising=False)
    unseeded = load_experiment_config(blueprint())
    assert apply_overrides(unseeded).search.master_seed == 0

    monkeypatch.setenv(SEED_ENVIRONMENT_VARIABLE, "11")
    assert apply_overrides(unseeded).search.master_seed == 11
    assert apply_overrides(unseeded, seed=7).search.master_seed == 7

    seeded = load_experiment_config(blueprint(search__master_seed=3))
    assert apply_overrides(seeded).search.master_seed == 3
    assert apply_overrides(seeded, seed=7).search.master_seed == 7


def test_invalid_seed_in_environment(blueprint, monkeypatch):
    monkeypatch.setenv(SEED_ENVIRONMENT_VARIABLE, "many")
    with pytest.raises(ConfigurationError):
        apply_overrides(load_experiment_config(blueprint()))


def test_search_overrides(blueprint, tmp_path):
    config = apply_overrides(
        load_experiment_config(blueprint()),
        jobs=4,
        gammas=[0.5],
        candidates=3,
        noise="white",
        snrs=[5.0],
        output_directory=tmp_path / "elsewhere",
        debug_audio=True,
    )
    assert config.jobs == 4
    assert config.search.gammas == [0.5]
    assert config.search.candidates_per_gamma == 3
    assert config.search.noise.kind == "white"
    assert config.search.noise.snr_db == 5.0
    assert config.search.debug_audio
    assert config.output_directory == (tmp_path / "elsewhere").resolve()


def test_several_snrs_replace_the_sweep(blueprint):
    config = apply_overrides(load_experiment_config(blueprint()), noise="white", snrs=[20.0, 30.0])
    assert config.noise_sweep_snrs == [20.0, 30.0]
    assert config.search.noise.snr_db == 20.0


def test_snr_without_noise_kind_is_rejected(blueprint):
    with pytest.raises(ConfigurationError):
        apply_overrides(load_experiment_config(blueprint()), snrs=[5.0])


def test_snr_applies_to_configured_noise(blueprint):
    config = load_experiment_config(blueprint(search__noise={"kind": "file", "path": "noise/home.wav", "snr_db": 0}))
    overridden = apply_overrides(config, snrs=[10.0])
    assert overridden.search.noise.kind == "file"
    assert overridden.search.noise.snr_db == 10.0
    assert overridden.search.noise.path.is_absolute()
