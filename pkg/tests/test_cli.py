"""End-to-end checks of the command-line interface.

Every test drives ``main(argv)`` in process so the suite stays fast; the
contract under test is the exit code (0 success, 1 honest failure, 2 usage
or config error), the files written to the output directory, and the lines
printed for a human reader.
"""

import json
import math

import numpy as np
import pytest

from splaysim.cli import CONFIG_SCHEMA, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from splaysim.sim import read_trajectory_csv


@pytest.fixture(autouse=True)
def isolated_out(tmp_path, monkeypatch):
    """Keep any run that omits --out from writing into the repo."""
    monkeypatch.setenv("SPLAYSIM_OUT", str(tmp_path / "default_out"))


def write_config(path, **overrides):
    data = {
        "schema": CONFIG_SCHEMA,
        "n": 3,
        "omega": 1.0,
        "prc": "paper",
        "x0": [5.5977, 6.0274, 3.4383],
        "horizon": 30.0,
    }
    data.update(overrides)
    path.write_text(json.dumps(data))
    return path


class TestSimulate:
    def test_config_run_writes_trajectory_and_events(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "run.json")
        out = tmp_path / "out"
        code = main(["simulate", str(cfg), "--out", str(out)])
        assert code == EXIT_OK
        stdout = capsys.readouterr().out
        assert "stop reason:" in stdout
        assert "terminal V:" in stdout
        assert (out / "trajectory.csv").is_file()
        assert (out / "events.csv").is_file()
        arc = read_trajectory_csv(out / "trajectory.csv")
        assert arc.n == 3
        assert arc.js[-1] > 0

    def test_flags_alone_suffice_without_config(self, tmp_path):
        code = main([
            "simulate", "--x0", "0.5,2.5,4.5", "--prc", "paper",
            "--horizon", "5.0", "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_OK
        arc = read_trajectory_csv(tmp_path / "o" / "trajectory.csv")
        assert math.isclose(arc.final_time.t, 5.0)

    def test_flags_override_config_values(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "run.json", horizon=80.0)
        code = main([
            "simulate", str(cfg), "--horizon", "1.0",
            "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_OK
        arc = read_trajectory_csv(tmp_path / "o" / "trajectory.csv")
        assert arc.final_time.t <= 1.0 + 1e-12

    def test_table_prc_path_resolves_against_config_dir(self, tmp_path, capsys):
        # The response table is referenced by a relative path inside the
        # config file and must be found next to the config, not the cwd.
        zs = np.linspace(0.0, 2.0 * np.pi, 2001)
        from splaysim.prc import paper_prc
        q = paper_prc(3)(zs)
        table = tmp_path / "resp.csv"
        table.write_text(
            "\n".join(f"{float(z)!r},{float(v)!r}" for z, v in zip(zs, q)))
        cfg = write_config(tmp_path / "run.json", prc="table:resp.csv",
                           horizon=10.0)
        code = main(["simulate", str(cfg), "--out", str(tmp_path / "o")])
        assert code == EXIT_OK

    def test_missing_config_file_is_usage_error(self, tmp_path, capsys):
        code = main(["simulate", str(tmp_path / "absent.json")])
        assert code == EXIT_USAGE
        assert "config error:" in capsys.readouterr().err

    def test_unknown_config_key_is_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "run.json")
        data = json.loads(cfg.read_text())
        data["stop_v"] = 1e-6
        cfg.write_text(json.dumps(data))
        code = main(["simulate", str(cfg)])
        assert code == EXIT_USAGE
        assert "unknown key" in capsys.readouterr().err

    def test_wrong_schema_tag_is_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "run.json", schema="simconfig/2")
        code = main(["simulate", str(cfg)])
        assert code == EXIT_USAGE
        assert "schema" in capsys.readouterr().err

    def test_missing_x0_is_a_config_error(self, tmp_path, capsys):
        code = main(["simulate", "--prc", "paper", "--n", "3"])
        assert code == EXIT_USAGE
        assert "config error:" in capsys.readouterr().err

    def test_unparseable_x0_is_a_config_error(self, capsys):
        code = main(["simulate", "--prc", "paper", "--x0", "1.0,abc,2.0"])
        assert code == EXIT_USAGE

    def test_bad_prc_selector_is_a_config_error(self, capsys):
        code = main(["simulate", "--prc", "linear:abc", "--x0", "0,2,4"])
        assert code == EXIT_USAGE

    def test_n_flag_conflicting_with_x0_length(self, capsys):
        code = main(["simulate", "--prc", "paper", "--n", "4",
                     "--x0", "0,2,4"])
        assert code == EXIT_USAGE

    def test_out_of_box_phase_is_a_config_error(self, capsys):
        code = main(["simulate", "--prc", "paper", "--x0", "0,2,7.0"])
        assert code == EXIT_USAGE

    def test_zeno_violation_exits_one(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "zeno.json",
            prc="broken:zero",
            x0=[2.0 * np.pi, 2.0 * np.pi - 1e-6, 1.0],
            min_dwell=1e-3,
        )
        code = main(["simulate", str(cfg), "--out", str(tmp_path / "o")])
        assert code == EXIT_FAIL
        assert "zeno violation:" in capsys.readouterr().err

    def test_perturbation_block_round_trips(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "run.json",
            horizon=10.0,
            stop_v_threshold=None,
            perturbation={"kind": "sinusoidal", "amplitude": 0.03,
                          "frequency": 0.5, "offsets": [0.0, 2.0, 4.0]},
        )
        code = main(["simulate", str(cfg), "--out", str(tmp_path / "o")])
        assert code == EXIT_OK
        assert "horizon" in capsys.readouterr().out

    def test_perturbation_amplitude_flag_implies_sinusoid(self, tmp_path):
        code = main([
            "simulate", "--x0", "0,2,4", "--prc", "paper",
            "--horizon", "5.0", "--perturb-amplitude", "0.05",
            "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_OK

    def test_perturbation_wrong_offset_count_is_rejected(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "run.json",
            perturbation={"kind": "sinusoidal", "amplitude": 0.03,
                          "offsets": [0.0, 1.0]},
        )
        code = main(["simulate", str(cfg)])
        assert code == EXIT_USAGE
        assert "offsets" in capsys.readouterr().err

    def test_unknown_perturbation_kind_is_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "run.json",
                           perturbation={"kind": "square", "amplitude": 0.1})
        code = main(["simulate", str(cfg)])
        assert code == EXIT_USAGE

    def test_out_dir_falls_back_to_environment(self, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("SPLAYSIM_OUT", str(target))
        cfg = write_config(tmp_path / "run.json", horizon=5.0)
        code = main(["simulate", str(cfg)])
        assert code == EXIT_OK
        assert (target / "trajectory.csv").is_file()

    def test_out_flag_beats_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPLAYSIM_OUT", str(tmp_path / "env"))
        out = tmp_path / "flag"
        cfg = write_config(tmp_path / "run.json", horizon=5.0)
        code = main(["simulate", str(cfg), "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "trajectory.csv").is_file()
        assert not (tmp_path / "env").exists()


class TestValidatePrc:
    def test_valid_response_passes(self, capsys):
        code = main(["validate-prc", "--prc", "paper", "--n", "3"])
        assert code == EXIT_OK
        assert "pass" in capsys.readouterr().out.lower()

    def test_out_of_family_slope_fails(self, capsys):
        code = main(["validate-prc", "--prc", "linear:1.5", "--n", "3"])
        assert code == EXIT_FAIL
        stdout = capsys.readouterr().out
        assert "fail" in stdout.lower()

    def test_broken_catalog_entry_fails_with_named_checks(self, capsys):
        code = main(["validate-prc", "--prc", "broken:zero", "--n", "3"])
        assert code == EXIT_FAIL
        stdout = capsys.readouterr().out
        assert "reset-at-top" in stdout

    def test_unknown_selector_is_usage_error(self, capsys):
        code = main(["validate-prc", "--prc", "nonsense", "--n", "3"])
        assert code == EXIT_USAGE


class TestExperiment:
    def test_unknown_name_is_usage_error(self, capsys):
        code = main(["experiment", "nosuch"])
        assert code == EXIT_USAGE

    def test_fig2_study_passes_and_writes_summary(self, tmp_path, capsys):
        code = main(["experiment", "fig2", "--out", str(tmp_path)])
        assert code == EXIT_OK
        summary = tmp_path / "fig2" / "summary.json"
        assert summary.is_file()
        data = json.loads(summary.read_text())
        assert data["passed"] is True
        assert "summary:" in capsys.readouterr().out

    def test_corpus_accepts_reduced_budgets(self, tmp_path, capsys):
        code = main(["experiment", "corpus", "--samples", "2000",
                     "--runs", "6", "--seed", "7", "--out", str(tmp_path)])
        assert code == EXIT_OK
        data = json.loads((tmp_path / "corpus" / "summary.json").read_text())
        assert data["passed"] is True


class TestCloseness:
    def run_pair(self, tmp_path):
        for name, x0 in (("a", "0.5,2.5,4.5"), ("b", "0.6,2.5,4.5")):
            code = main(["simulate", "--x0", x0, "--prc", "paper",
                         "--horizon", "10.0",
                         "--out", str(tmp_path / name)])
            assert code == EXIT_OK
        return (tmp_path / "a" / "trajectory.csv",
                tmp_path / "b" / "trajectory.csv")

    def test_self_comparison_reports_zero(self, tmp_path, capsys):
        first, _ = self.run_pair(tmp_path)
        code = main(["closeness", str(first), str(first), "--tau", "5.0"])
        assert code == EXIT_OK
        stdout = capsys.readouterr().out
        assert "eps_star: 0" in stdout

    def test_distinct_starts_report_positive_bound(self, tmp_path, capsys):
        first, second = self.run_pair(tmp_path)
        code = main(["closeness", str(first), str(second), "--tau", "5.0"])
        assert code == EXIT_OK
        stdout = capsys.readouterr().out
        eps = float(stdout.split("eps_star:")[1].split()[0])
        assert 0.0 < eps < 1.0
        assert "witness: t=" in stdout

    def test_missing_file_is_usage_error(self, tmp_path, capsys):
        code = main(["closeness", str(tmp_path / "gone.csv"),
                     str(tmp_path / "gone.csv"), "--tau", "5.0"])
        assert code == EXIT_USAGE

    def test_malformed_header_is_usage_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("time,phase\n0.0,1.0\n")
        code = main(["closeness", str(bad), str(bad), "--tau", "5.0"])
        assert code == EXIT_USAGE
