import json
import os

import pytest

from edgefail.cli import main
from edgefail.config import DEFAULTS, ExperimentConfig, parse_config_file
from edgefail.errors import ConfigError
from edgefail.experiment import compare, run

FAST = {
    "horizon": 12,
    "attack.every": 6,
    "mobility.vehicles": 60,
    "mobility.p_request": 0.5,
    "seed": 9,
}


def fast_args(out, extra=()):
    return [
        "run",
        "--dataset", "synthetic",
        "--horizon", "12",
        "--attack-every", "6",
        "--seed", "9",
        "--out", str(out),
        *extra,
    ]


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


class TestConfig:
    def test_defaults_validate(self):
        cfg = ExperimentConfig.from_sources()
        assert cfg.horizon == 600
        assert cfg.policy_list() == ["lb-psvm", "psvm", "br"]

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_sources(overrides={"nope.key": 1})

    def test_horizon_zero_invalid(self):
        with pytest.raises(ConfigError, match="horizon"):
            ExperimentConfig.from_sources(overrides={"horizon": 0})

    def test_file_parsing_with_line_numbers(self, tmp_path):
        path = tmp_path / "exp.conf"
        path.write_text("horizon = 20\n# comment\nmobility.vehicles = 50\n")
        values = parse_config_file(path)
        assert values == {"horizon": 20, "mobility.vehicles": 50}
        bad = tmp_path / "bad.conf"
        bad.write_text("horizon = 20\nwat\n")
        with pytest.raises(ConfigError, match="bad.conf:2"):
            parse_config_file(bad)
        unknown = tmp_path / "unknown.conf"
        unknown.write_text("horizont = 20\n")
        with pytest.raises(ConfigError, match="unknown.conf:1"):
            parse_config_file(unknown)

    def test_precedence_cli_over_file_over_defaults(self, tmp_path):
        path = tmp_path / "exp.conf"
        path.write_text("horizon = 20\nseed = 3\n")
        cfg = ExperimentConfig.from_sources(file=path, overrides={"horizon": 7})
        assert cfg.horizon == 7  # CLI wins
        assert cfg.seed == 3  # file beats default
        assert cfg.attack_every == DEFAULTS["attack.every"]

    def test_hash_ignores_policies_and_output(self):
        a = ExperimentConfig.from_sources(overrides={"policies": "psvm"})
        b = ExperimentConfig.from_sources(overrides={"policies": "lb-psvm,br", "jobs": 4})
        c = ExperimentConfig.from_sources(overrides={"seed": 1})
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_trace_dataset_needs_bbox(self):
        with pytest.raises(ConfigError, match="bbox"):
            ExperimentConfig.from_sources(overrides={"dataset": "trace:/tmp/x.csv"})


class TestRun:
    def test_artifacts_and_row_counts(self, tmp_path):
        cfg = ExperimentConfig.from_sources(
            overrides={**FAST, "policies": "lb-psvm,psvm"}
        )
        art = run(cfg, out=str(tmp_path / "o"))
        lines = read(art.metrics_path).strip().split("\n")
        assert len(lines) == 1 + 12 * 2  # header + horizon rows per policy
        header = lines[0].split(",")
        assert header[:4] == ["t", "state", "policy", "avg_delay_ms"]
        assert header[-3:] == ["avg_elf_pct", "fairness", "q_value"]
        assert sum(1 for ln in lines[1:] if ",lb-psvm," in ln) == 12
        summary = read(art.summary_path).strip().split("\n")
        assert summary[0] == "policy,avg_delay_ms,avg_elf_attack_pct,mean_fairness"
        assert len(summary) == 3
        manifest = json.loads(read(art.manifest_path))
        assert manifest["config_hash"] == cfg.config_hash()
        assert manifest["policies"] == ["lb-psvm", "psvm"]
        assert os.path.exists(os.path.join(art.out_dir, "plots.gp"))

    def test_states_match_state_machine(self, tmp_path):
        cfg = ExperimentConfig.from_sources(overrides={**FAST, "policies": "psvm"})
        art = run(cfg, out=str(tmp_path / "o"))
        rows = [ln.split(",") for ln in read(art.metrics_path).strip().split("\n")[1:]]
        states = {int(r[0]): r[1] for r in rows}
        assert states[6] == "Attack" and states[12] == "Attack"
        assert states[7] == "Recovered"
        assert states[5] == "PreAttack"

    def test_byte_identical_reproduction(self, tmp_path):
        cfg = ExperimentConfig.from_sources(overrides=FAST)
        a = run(cfg, out=str(tmp_path / "a"))
        b = run(cfg, out=str(tmp_path / "b"))
        assert read(a.metrics_path) == read(b.metrics_path)
        assert read(a.summary_path) == read(b.summary_path)

    def test_parallel_jobs_same_bytes(self, tmp_path):
        cfg = ExperimentConfig.from_sources(overrides=FAST)
        a = run(cfg, out=str(tmp_path / "a"))
        cfg2 = ExperimentConfig.from_sources(overrides={**FAST, "jobs": 3})
        b = run(cfg2, out=str(tmp_path / "b"))
        assert read(a.metrics_path) == read(b.metrics_path)

    def test_trace_dataset_roundtrip(self, tmp_path):
        trace = tmp_path / "trace.csv"
        rows = ["vehicle_id,timestamp,lat,lon"]
        for v in range(30):
            for t in range(12):
                rows.append(f"cab{v},{t * 60},{37.0 + (v % 10) * 0.05},{-122.9 + (v % 7) * 0.1}")
        trace.write_text("\n".join(rows) + "\n")
        cfg = ExperimentConfig.from_sources(overrides={
            **FAST,
            "dataset": f"trace:{trace}",
            "trace.bbox": "37.0,38.0,-123.0,-122.0",
            "policies": "lb-psvm",
        })
        art = run(cfg, out=str(tmp_path / "o"))
        lines = read(art.metrics_path).strip().split("\n")
        assert len(lines) == 13


class TestCompare:
    def make_summaries(self, tmp_path, seeds=(9, 9)):
        paths = []
        for i, seed in enumerate(seeds):
            cfg = ExperimentConfig.from_sources(overrides={**FAST, "seed": seed})
            art = run(cfg, out=str(tmp_path / f"r{i}"))
            paths.append(art.summary_path)
        return paths

    def test_identical_runs_zero_deltas(self, tmp_path):
        paths = self.make_summaries(tmp_path)
        cmp = compare(paths)
        assert all(
            abs(d) == 0.0 for deltas in cmp.deltas.values() for d in deltas.values()
        )

    def test_winner_flags(self, tmp_path):
        paths = self.make_summaries(tmp_path)
        cmp = compare(paths)
        assert cmp.winners["mean_fairness"][1] in ("lb-psvm", "br")
        text = cmp.to_text()
        assert "avg_delay_ms" in text and "*" in text

    def test_mismatched_configs_refused_with_diff(self, tmp_path):
        paths = self.make_summaries(tmp_path, seeds=(9, 10))
        with pytest.raises(ConfigError, match="seed"):
            compare(paths)

    def test_needs_two_runs(self, tmp_path):
        (path,) = self.make_summaries(tmp_path, seeds=(9,))
        with pytest.raises(ConfigError):
            compare([path])

    def test_same_basename_dirs_disambiguated(self, tmp_path):
        cfg = ExperimentConfig.from_sources(overrides={**FAST, "policies": "psvm"})
        paths = []
        for sub in ("x", "y"):
            art = run(cfg, out=str(tmp_path / sub / "out"))
            paths.append(art.summary_path)
        cmp = compare(paths)
        assert len(cmp.values) == 2


class TestCliEntry:
    def test_run_exit_zero(self, tmp_path, capsys):
        assert main(fast_args(tmp_path / "o")) == 0
        out = capsys.readouterr().out
        assert "metrics.csv" in out and "lb-psvm" in out

    def test_invalid_horizon_exit_2(self, tmp_path, capsys):
        code = main(fast_args(tmp_path / "o", extra=["--horizon", "0"]))
        assert code == 2
        assert "horizon" in capsys.readouterr().err

    def test_bad_config_file_exit_2(self, tmp_path, capsys):
        cfgfile = tmp_path / "exp.conf"
        cfgfile.write_text("horizon = banana\n")
        code = main(fast_args(tmp_path / "o", extra=["--config", str(cfgfile)]))
        assert code == 2

    def test_missing_trace_exit_2(self, tmp_path):
        code = main([
            "run", "--dataset", "trace:/does/not/exist.csv",
            "--horizon", "5", "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_solver_failure_exit_3(self, tmp_path, capsys):
        # demand that cannot fit on the placed instances surfaces as a
        # runtime failure, not a config error
        cfgfile = tmp_path / "exp.conf"
        cfgfile.write_text(
            "service.capacity = 2\nmobility.vehicles = 400\n"
            "mobility.p_request = 1.0\nservices.count = 2\n"
        )
        code = main(fast_args(tmp_path / "o", extra=["--config", str(cfgfile)]))
        assert code == 3
        assert "demand" in capsys.readouterr().err

    def test_compare_subcommand(self, tmp_path, capsys):
        for name in ("a", "b"):
            assert main(fast_args(tmp_path / name)) == 0
        capsys.readouterr()
        code = main([
            "compare",
            str(tmp_path / "a" / "summary.csv"),
            str(tmp_path / "b" / "summary.csv"),
        ])
        assert code == 0
        assert "avg_delay_ms" in capsys.readouterr().out

    def test_env_var_out_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("EDGEFAIL_OUT_DIR", str(tmp_path / "envout"))
        args = fast_args(tmp_path)[:-2]  # drop --out
        assert main(args) == 0
        assert (tmp_path / "envout" / "metrics.csv").exists()
