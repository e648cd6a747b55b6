import json

import numpy as np
import pytest

from clswp.cli import main
from clswp.errors import ConfigError
from clswp.io import read_field
from clswp.pipeline import PipelineConfig, run_pipeline

ARTIFACTS = ["pgram.csv", "spgram.csv", "spec.csv", "acv.csv"]


def sim_config(**over):
    raw = {
        "wavelet": "haar",
        "scales": {"umin": 1, "umax": 8, "count": 8},
        "locations": 64,
        "estimate": {"schedule": "full:100,4:50"},
        "simulate": {"process": "white-noise", "n": 256, "span": 255.0, "seed": 5,
                     "replicates": 1},
    }
    raw.update(over)
    return raw


def write_config(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return p


class TestConfig:
    def test_empty_replicate_list(self):
        with pytest.raises(ConfigError, match="empty"):
            PipelineConfig.from_dict({"replicates": []})

    def test_no_input(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({})

    @pytest.mark.parametrize("over", [
        {"locations": 100},
        {"scales": {"umin": 5, "umax": 1, "count": 4}},
        {"wavelet": "mexican"},
        {"estimate": {"schedule": "full:abc"}},
        {"estimate": {"mu": -1}},
        {"estimate": {"speed": 3}},
        {"colour": "red"},
        {"acv": {"lags": [0, 1]}},
        {"simulate": {"process": "pink"}},
        {"simulate": {"process": "clswp"}},
        {"replicates": ["a.csv"]},
    ])
    def test_invalid(self, over):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict(sim_config(**over))

    def test_cli_exit_code(self, tmp_path):
        assert main(["pipeline", "--config", str(write_config(tmp_path, {"replicates": []}))]) == 2

    def test_digest_tracks_content(self):
        a = PipelineConfig.from_dict(sim_config())
        b = PipelineConfig.from_dict(sim_config(locations=128))
        assert a.digest() == PipelineConfig.from_dict(sim_config()).digest() != b.digest()


class TestRun:
    def test_single_white_noise_replicate(self, tmp_path):
        report = run_pipeline(PipelineConfig.from_dict(sim_config(), tmp_path), "out")
        out = tmp_path / "out"
        for name in ARTIFACTS + ["report.json"]:
            assert (out / name).exists()
        assert read_field(out / "spec.csv").data.min() >= 0
        assert report["replicates"] == 1 and report["seeds"]["simulate"] == 5
        assert set(report["stage_seconds"]) == {"load", "periodogram", "smooth", "estimate", "acv"}
        assert len(report["config_sha256"]) == 64

    def test_without_smoothing(self, tmp_path):
        raw = sim_config(smooth={"enabled": False}, locations=48, estimate={"mu": 0.0})
        run_pipeline(PipelineConfig.from_dict(raw, tmp_path), "out")
        assert not (tmp_path / "out" / "spgram.csv").exists()

    def test_mercer(self, tmp_path):
        raw = sim_config(estimate={"method": "mercer"})
        report = run_pipeline(PipelineConfig.from_dict(raw, tmp_path), "out")
        assert "ista" not in report

    def test_idempotent(self, tmp_path):
        cfg = write_config(tmp_path, sim_config())
        assert main(["pipeline", "--config", str(cfg), "--output", str(tmp_path / "a")]) == 0
        assert main(["pipeline", "--config", str(cfg), "--output", str(tmp_path / "b")]) == 0
        for name in ARTIFACTS:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_stage_isolation(self, tmp_path):
        reps = tmp_path / "reps"
        assert main(["simulate", "--process", "haar-ma", "--n", "300", "--span", "150",
                     "--sampling", "missing25", "--seed", "2", "--replicates", "3",
                     "--output", str(reps)]) == 0
        files = sorted(p.name for p in reps.glob("rep_*.csv"))
        raw = {"scales": {"umin": 1, "umax": 6, "count": 11}, "locations": 32,
               "replicates": [f"reps/{f}" for f in files], "estimate": {"schedule": "full:20"}}
        run_pipeline(PipelineConfig.from_dict(raw, tmp_path), "out")
        assert main(["periodogram", "--input", *[str(reps / f) for f in files],
                     "--scales", "1:6:11", "--locations", "32",
                     "--output", str(tmp_path / "p.csv")]) == 0
        assert (tmp_path / "p.csv").read_bytes() == (tmp_path / "out" / "pgram.csv").read_bytes()

    def test_irregular_replicates_grouped(self, tmp_path):
        # two sample-time patterns share one location grid
        for seed in (1, 2):
            main(["simulate", "--process", "white-noise", "--n", "200", "--span", "100",
                  "--sampling", "uniform-gaps", "--seed", str(seed), "--output",
                  str(tmp_path / f"r{seed}")])
        raw = {"scales": {"umin": 1, "umax": 4, "count": 4}, "locations": 16,
               "replicates": ["r1/rep_0000.csv", "r2/rep_0000.csv"],
               "estimate": {"schedule": "full:20"}}
        report = run_pipeline(PipelineConfig.from_dict(raw, tmp_path), "out")
        assert report["replicates"] == 2
        p = read_field(tmp_path / "out" / "pgram.csv")
        assert p.locations.locations[0] == 0 and p.locations.locations[-1] == pytest.approx(100)
        assert np.all(np.isfinite(p.data))

    def test_thread_count_does_not_change_bytes(self, tmp_path, monkeypatch):
        cfg = PipelineConfig.from_dict(sim_config(locations=256), tmp_path)
        monkeypatch.setenv("CLSWP_THREADS", "1")
        run_pipeline(cfg, "t1")
        monkeypatch.setenv("CLSWP_THREADS", "4")
        run_pipeline(cfg, "t4")
        for name in ARTIFACTS:
            assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t4" / name).read_bytes()
