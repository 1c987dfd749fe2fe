import json
from dataclasses import replace

import numpy as np
import pytest

from paraqnn.dataio import (DataError, Dataset, build_dataset,
                            config_from_manifest, load, normalize_time,
                            regenerate, regime_config, save)
from paraqnn.noise import NoiseStack


@pytest.fixture(scope="module")
def rabi_small():
    return build_dataset(regime_config("rabi", scale=0.05))  # N=500


class TestPresets:
    @pytest.mark.parametrize("regime,n,span", [
        ("rabi", 10_000, 8.0),
        ("lindblad", 25_000, 5.0),
        ("mixed", 50_000, 10.0),
    ])
    def test_preset_sizes(self, regime, n, span):
        cfg = regime_config(regime)
        assert cfg.n_points == n
        assert cfg.time_span == span

    def test_preset_noise_stacks(self):
        assert regime_config("rabi").noise == NoiseStack(
            gaussian_sigma=0.08, telegraph_amplitude=0.1,
            telegraph_switch_prob=0.02)
        mixed = regime_config("mixed").noise
        assert mixed.pink_sigma == 0.06
        assert mixed.spam_epsilon == 0.02

    def test_scale_divides_points(self):
        assert regime_config("rabi", scale=0.02).n_points == 200

    def test_unknown_regime(self):
        with pytest.raises(ValueError, match="unknown regime"):
            regime_config("ramsey")


class TestBuild:
    def test_deterministic(self, rabi_small):
        again = build_dataset(regime_config("rabi", scale=0.05))
        assert np.array_equal(rabi_small.y_noisy, again.y_noisy)
        assert np.array_equal(rabi_small.y_clean, again.y_clean)
        assert np.array_equal(rabi_small.split, again.split)

    def test_split_fractions(self, rabi_small):
        n = len(rabi_small)
        n_test = int((rabi_small.split == "test").sum())
        assert abs(n_test - round(0.2 * n)) <= 1
        n_val = int((rabi_small.split == "val").sum())
        assert abs(n_val - round(0.1 * (n - n_test))) <= 1

    def test_split_exhaustive(self, rabi_small):
        labels = set(np.unique(rabi_small.split))
        assert labels == {"train", "val", "test"}

    def test_preset_test_count_is_exactly_20_percent(self):
        ds = build_dataset(regime_config("rabi", scale=0.1))  # N=1000
        assert int((ds.split == "test").sum()) == 200

    def test_full_rabi_preset_has_2000_test_points(self):
        ds = build_dataset(regime_config("rabi"))
        assert len(ds) == 10_000
        assert int((ds.split == "test").sum()) == 2000

    def test_zero_noise_passthrough(self):
        cfg = replace(regime_config("rabi", scale=0.02), noise=NoiseStack())
        ds = build_dataset(cfg)
        assert np.array_equal(ds.y_noisy, ds.y_clean)

    def test_data_seed_changes_noise_not_signal(self):
        a = build_dataset(regime_config("rabi", data_seed=42, scale=0.02))
        b = build_dataset(regime_config("rabi", data_seed=43, scale=0.02))
        assert np.array_equal(a.y_clean, b.y_clean)
        assert not np.array_equal(a.y_noisy, b.y_noisy)

    def test_temporal_holdout_is_the_tail(self):
        ds = build_dataset(regime_config("rabi", scale=0.05,
                                         split_mode="temporal"))
        cutoff = 0.85 * ds.time_span
        test_mask = ds.split == "test"
        assert np.all(ds.times[test_mask] >= cutoff)
        assert np.all(ds.times[~test_mask] < cutoff)

    def test_clean_signal_in_unit_interval(self, rabi_small):
        assert rabi_small.y_clean.min() >= -1e-6
        assert rabi_small.y_clean.max() <= 1.0 + 1e-6


class TestNormalize:
    def test_endpoints_and_midpoint(self, rabi_small):
        tau = normalize_time(rabi_small)
        assert tau[0] == 0.0
        assert tau[-1] == 1.0
        assert np.array_equal(tau, rabi_small.times / 8.0)

    def test_constant_recorded_in_manifest(self, rabi_small):
        assert rabi_small.manifest["time_normalization"] == 8.0


class TestPersistence:
    def test_round_trip_identity(self, rabi_small, tmp_path):
        save(rabi_small, tmp_path / "ds")
        loaded = load(tmp_path / "ds")
        assert loaded == rabi_small

    def test_truncated_data_rejected(self, rabi_small, tmp_path):
        p = save(rabi_small, tmp_path / "ds")
        data = (p / "data.csv").read_bytes()
        (p / "data.csv").write_bytes(data[: len(data) // 2])
        with pytest.raises(DataError, match="checksum"):
            load(p)

    def test_invalid_physics_in_manifest_rejected(self, rabi_small, tmp_path):
        p = save(rabi_small, tmp_path / "ds")
        man = json.loads((p / "manifest.json").read_text())
        man["schedule"]["segments"][0]["physics"]["t2"] = 100.0  # t2 > 2*t1
        (p / "manifest.json").write_text(json.dumps(man))
        # keep the checksum valid so validation is what trips
        with pytest.raises(DataError, match="manifest"):
            load(p)

    def test_wrong_schema_version_rejected(self, rabi_small, tmp_path):
        p = save(rabi_small, tmp_path / "ds")
        man = json.loads((p / "manifest.json").read_text())
        man["schema_version"] = 999
        (p / "manifest.json").write_text(json.dumps(man))
        with pytest.raises(DataError, match="schema_version"):
            load(p)

    def test_missing_stamp_rejected(self, rabi_small, tmp_path):
        p = save(rabi_small, tmp_path / "ds")
        man = json.loads((p / "manifest.json").read_text())
        del man["stamp"]
        (p / "manifest.json").write_text(json.dumps(man))
        with pytest.raises(DataError, match="stamp"):
            load(p)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError, match="no dataset"):
            load(tmp_path / "nope")

    def test_regenerate_from_manifest_bitexact(self, rabi_small, tmp_path):
        p = save(rabi_small, tmp_path / "a")
        manifest = json.loads((p / "manifest.json").read_text())
        rebuilt = regenerate(manifest)
        save(rebuilt, tmp_path / "b")
        assert (tmp_path / "a" / "data.csv").read_bytes() == \
               (tmp_path / "b" / "data.csv").read_bytes()

    def test_config_round_trip(self, rabi_small):
        cfg = config_from_manifest(rabi_small.manifest)
        assert cfg.regime == "rabi"
        assert cfg.n_points == len(rabi_small)
        assert cfg.noise == regime_config("rabi").noise
