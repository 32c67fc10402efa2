import numpy as np
import pytest

from blgi.config import (
    ConfigError,
    RunManifest,
    config_from_dict,
    config_to_dict,
    load_experiment_config,
    load_strategy,
    resolve_seed,
)
from blgi.measurement import AncillaMeterSpec, GaussianMeterSpec, ProjectiveMeterSpec
from blgi.protocol import DEFAULT_ANGLES, ExperimentConfig

GOOD_CONFIG = """
[meter1]
type = gaussian
sigma = 2.5
eta = 0.5

[meter2]
type = ancilla
v_total = 0.6
u = 0.9

[b]
v = 0.8

[angles]
b2 = 2.0

[run]
shots = 5000
seed = 7
"""

GOOD_STRATEGY = """
[strategy]
hidden_states = 2
prep_dist = 0.5, 0.5
a1 = 1, -1
a2 = 1, -1
b1 = 1, -1
b2 = -1, 1
noise_sigma1 = 0.5
noise_sigma2 = 0.5
"""


class TestExperimentConfigFile:
    def test_full_round_trip(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(GOOD_CONFIG)
        config = load_experiment_config(path)
        assert config.meter1 == GaussianMeterSpec(sigma=2.5, eta=0.5)
        assert config.meter2 == AncillaMeterSpec(v_total=0.6, u=0.9)
        assert config.b_spec == ProjectiveMeterSpec(v=0.8)
        assert config.angles[:3] == DEFAULT_ANGLES[:3]
        assert config.angles[3] == 2.0
        assert config.shots == 5000
        assert config.seed == 7

    def test_missing_file(self, tmp_path):
        missing = tmp_path / "nope.ini"
        with pytest.raises(ConfigError, match="nope.ini"):
            load_experiment_config(missing)

    def test_defaults_when_sections_absent(self, tmp_path):
        path = tmp_path / "empty.ini"
        path.write_text("[run]\nshots = 10\n")
        config = load_experiment_config(path)
        assert config.meter1 == GaussianMeterSpec(sigma=1.0, eta=1.0)
        assert config.shots == 10
        assert config.seed == 42

    def test_bad_number_names_the_field(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[meter1]\ntype = gaussian\nsigma = fast\n")
        with pytest.raises(ConfigError, match="meter1.sigma"):
            load_experiment_config(path)

    def test_out_of_range_value_is_a_config_error(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[meter1]\ntype = ancilla\nv_total = 0.9\nu = 0.5\n")
        with pytest.raises(ConfigError, match="v_total"):
            load_experiment_config(path)

    def test_unparseable_file_reports_location(self, tmp_path):
        path = tmp_path / "broken.ini"
        path.write_text("meter1]\nsigma = 1\n")
        with pytest.raises(ConfigError, match="broken.ini"):
            load_experiment_config(path)

    def test_dict_round_trip_is_exact(self):
        config = ExperimentConfig(
            meter1=GaussianMeterSpec(sigma=1.1423498329, eta=0.73),
            meter2=AncillaMeterSpec(v_total=0.37, u=0.81),
            b_spec=ProjectiveMeterSpec(v=0.999),
            angles=(0.1, 0.2, 0.3, 0.4),
            shots=123,
            seed=99,
        )
        assert config_from_dict(config_to_dict(config)) == config


class TestSeedResolution:
    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv("BLGI_SEED", "100")
        assert resolve_seed(5, file_seed=9) == 5

    def test_env_beats_file(self, monkeypatch):
        monkeypatch.setenv("BLGI_SEED", "100")
        assert resolve_seed(None, file_seed=9) == 100

    def test_file_beats_default(self, monkeypatch):
        monkeypatch.delenv("BLGI_SEED", raising=False)
        assert resolve_seed(None, file_seed=9) == 9

    def test_default(self, monkeypatch):
        monkeypatch.delenv("BLGI_SEED", raising=False)
        assert resolve_seed(None) == 42

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv("BLGI_SEED", "not-a-seed")
        with pytest.raises(ConfigError, match="BLGI_SEED"):
            resolve_seed(None)


class TestStrategyFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "strategy.ini"
        path.write_text(GOOD_STRATEGY)
        strategy = load_strategy(path)
        assert strategy.num_hidden_states == 2
        np.testing.assert_allclose(strategy.prep_dist, [0.5, 0.5])
        np.testing.assert_allclose(strategy.b2, [-1, 1])
        assert strategy.noise_sigma1 == 0.5

    def test_bad_prep_dist_names_the_invariant(self, tmp_path):
        path = tmp_path / "strategy.ini"
        path.write_text(GOOD_STRATEGY.replace("prep_dist = 0.5, 0.5", "prep_dist = 0.5, 0.4"))
        with pytest.raises(ConfigError, match="sum to 1"):
            load_strategy(path)

    def test_wrong_vector_length(self, tmp_path):
        path = tmp_path / "strategy.ini"
        path.write_text(GOOD_STRATEGY.replace("a1 = 1, -1", "a1 = 1"))
        with pytest.raises(ConfigError, match="a1"):
            load_strategy(path)

    def test_missing_section(self, tmp_path):
        path = tmp_path / "strategy.ini"
        path.write_text("[other]\nx = 1\n")
        with pytest.raises(ConfigError, match="strategy"):
            load_strategy(path)


class TestManifest:
    def test_write_load_round_trip(self, tmp_path):
        config = ExperimentConfig(
            meter1=GaussianMeterSpec(sigma=3.0), meter2=GaussianMeterSpec(sigma=3.0), shots=77, seed=5
        )
        manifest = RunManifest.create("simulate", config, out="a.csv", extra={"records": None})
        path = tmp_path / "m.json"
        manifest.write(path)
        loaded = RunManifest.load(path)
        assert loaded.command == "simulate"
        assert loaded.seed == 5
        assert config_from_dict(loaded.config) == config

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigError, match="manifest"):
            RunManifest.load(tmp_path / "missing.json")

    def test_corrupt_manifest(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            RunManifest.load(path)
