from fractions import Fraction

import pytest

from unimix import cli
from unimix.cli import (
    EXIT_BOUND,
    EXIT_CAPACITY,
    EXIT_OK,
    EXIT_VALIDATION,
    RunArtifacts,
    ScenarioConfig,
    ValidationError,
    emit_report,
    main,
    parse_config,
    parse_horizon,
    run_scenario,
)
from unimix.core import FixedHorizon, GeometricDiscount, MovingHorizon, ProportionalHorizon
from unimix.evaluate import BoundReport, CapacityError
from unimix.vm import decode

HEAVEN = "scenario=heavenhell\nagent=informed\nlifetime=5\ni=1\n"


def trace_rows(trace_csv):
    return [ln.split(",") for ln in trace_csv.strip().splitlines()[1:]]


class TestParseConfig:
    def test_defaults_fill_in(self):
        cfg = parse_config(HEAVEN)
        assert cfg.scenario == "heavenhell"
        assert (cfg.l_max, cfg.steps, cfg.seed) == (6, 64, 0)
        assert cfg.horizon == FixedHorizon(5)
        assert cfg.extras == {"i": "1"}

    def test_comments_and_blanks_are_ignored(self):
        cfg = parse_config("# a comment\n\n" + HEAVEN)
        assert cfg.scenario == "heavenhell"

    def test_every_violation_is_reported_at_once(self):
        bad = "scenario=flying\nagent=psychic\nlifetime=0\nl=99\nt=zero\n"
        with pytest.raises(ValidationError) as e:
            parse_config(bad)
        text = "\n".join(e.value.violations)
        assert "scenario" in text
        assert "agent" in text
        assert "lifetime=0" in text
        assert "l=99" in text
        assert "t must be an integer" in text
        assert len(e.value.violations) == 5

    def test_missing_scenario_is_a_violation(self):
        with pytest.raises(ValidationError):
            parse_config("agent=informed\nlifetime=3\n")

    def test_hash_ignores_formatting_noise(self):
        a = parse_config(HEAVEN)
        b = parse_config("# noise\n" + HEAVEN + "\n")
        assert a.config_hash() == b.config_hash()

    def test_hash_sees_every_semantic_field(self):
        a = parse_config(HEAVEN)
        b = parse_config(HEAVEN.replace("lifetime=5", "lifetime=6"))
        assert a.config_hash() != b.config_hash()


class TestParseHorizon:
    def test_kinds(self):
        assert parse_horizon("fixed:7") == FixedHorizon(7)
        assert parse_horizon("moving:2") == MovingHorizon(2)
        assert parse_horizon("proportional:1/2") == ProportionalHorizon(Fraction(1, 2))
        assert parse_horizon("geometric:2/3:10") == GeometricDiscount(Fraction(2, 3), 10)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            parse_horizon("psychic:3")

    def test_bad_horizon_is_collected_as_a_violation(self):
        with pytest.raises(ValidationError) as e:
            parse_config(HEAVEN + "horizon=psychic:3\n")
        assert any("horizon" in v for v in e.value.violations)


class TestRunScenario:
    def test_heavenhell_informed_trace(self):
        art = run_scenario(parse_config(HEAVEN))
        rows = trace_rows(art.trace_csv)
        # only the first door choice matters; later ties break to action 0
        assert [r[1] for r in rows] == ["1", "0", "0", "0", "0"]
        assert [r[3] for r in rows] == ["1"] * 5
        # remaining achievable reward shrinks by one per cycle
        assert [r[4] for r in rows] == ["5", "4", "3", "2", "1"]
        assert "total_reward=5" in art.results

    def test_fm_greedy_sticks_with_a_good_first_query(self):
        cfg = parse_config(
            "scenario=fm\nagent=greedy\nlifetime=5\nclass=uniform16\nseed=0\n"
        )
        rows = trace_rows(run_scenario(cfg).trace_csv)
        assert [r[1] for r in rows] == ["0"] * 5

    def test_fm_greedy_explores_once_after_a_bad_first_query(self):
        cfg = parse_config(
            "scenario=fm\nagent=greedy\nlifetime=5\nclass=uniform16\nseed=1\n"
        )
        rows = trace_rows(run_scenario(cfg).trace_csv)
        assert [r[1] for r in rows] == ["0", "1", "0", "0", "0"]

    def test_program_agent_leaves_planner_values_blank(self):
        echo = decode((0, 1, 0, 0, 0, 1, 0, 0, 0))  # IN; OUT; END
        cfg = parse_config(HEAVEN.replace("agent=informed", "agent=program"))
        cfg.extras["program"] = echo.to_hex()
        rows = trace_rows(run_scenario(cfg).trace_csv)
        assert all(r[4] == "" for r in rows)

    def test_program_agent_without_a_program_is_a_validation_error(self):
        cfg = parse_config(HEAVEN.replace("agent=informed", "agent=program"))
        with pytest.raises(ValidationError):
            run_scenario(cfg)

    def test_mixture_agent_reports_a_posterior_leader(self):
        cfg = parse_config(
            "scenario=heavenhell\nagent=mixture\nlifetime=2\ni=1\nl=6\n"
        )
        rows = trace_rows(run_scenario(cfg).trace_csv)
        assert all(r[5] != "" for r in rows)

    def test_best_vote_agent_emits_a_selection_log(self):
        cfg = parse_config(
            "scenario=heavenhell\nagent=best-vote\nlifetime=2\ni=1\nl=6\n"
        )
        art = run_scenario(cfg)
        assert art.selection_csv is not None
        lines = art.selection_csv.strip().splitlines()
        assert lines[0].startswith("cycle,candidate,")
        rows = trace_rows(art.trace_csv)
        assert all(r[4] == "" for r in rows)  # no planner value for best-vote

    def test_reruns_are_byte_identical(self):
        cfg_text = "scenario=fm\nagent=informed\nlifetime=3\nclass=uniform16\nseed=7\n"
        a = run_scenario(parse_config(cfg_text))
        b = run_scenario(parse_config(cfg_text))
        assert a.trace_csv == b.trace_csv
        assert a.manifest == b.manifest
        assert a.results == b.results

    def test_manifest_pins_the_config(self):
        cfg = parse_config(HEAVEN)
        art = run_scenario(cfg)
        assert f"config_hash={cfg.config_hash()}" in art.manifest
        assert "config_begin" in art.manifest and "config_end" in art.manifest


class TestEmitReport:
    def test_totals_recomputed_from_the_trace(self):
        art = run_scenario(parse_config(HEAVEN))
        assert "trace_total_reward=5" in emit_report(art)

    def test_empty_trace_is_an_error(self):
        art = RunArtifacts(
            trace_csv="cycle,action,observation,reward,planner_value,posterior_top\n",
            manifest="",
            results="",
            reports=[],
        )
        with pytest.raises(ValueError):
            emit_report(art)


class TestMain:
    def test_run_writes_the_artifact_set(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(HEAVEN)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert (out / "trace.csv").exists()
        assert (out / "manifest.txt").exists()
        assert "total_reward=5" in (out / "results.txt").read_text()
        assert "trace_total_reward=5" in capsys.readouterr().out

    def test_run_twice_is_byte_identical_on_disk(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("scenario=fm\nagent=greedy\nlifetime=4\nclass=uniform16\nseed=3\n")
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
            outs.append(out)
        for fname in ("trace.csv", "manifest.txt", "results.txt"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_seed_flag_overrides_the_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(HEAVEN)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out), "--seed", "42"])
        assert "seed=42" in (out / "manifest.txt").read_text()

    def test_invalid_config_exits_1_and_lists_violations(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("scenario=flying\nagent=psychic\nlifetime=0\n")
        assert main(["run", "--config", str(cfg)]) == EXIT_VALIDATION
        err = capsys.readouterr().err
        assert err.count("validation error:") == 3

    def test_verify_passes_and_prints_verdicts(self, tmp_path, capsys):
        report = tmp_path / "verify.txt"
        assert main(["verify", "--l", "8", "--strict", "--out", str(report)]) == EXIT_OK
        text = report.read_text()
        assert "[holds] kraft sum at l=8" in text
        assert "FAILS" not in text

    def test_enumerate_lists_the_pool(self, capsys):
        assert main(["enumerate", "--l", "4"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1  # only the bare terminator fits in 4 bits
        assert lines[0].startswith("3:0")

    def test_disasm_round_trip(self, capsys):
        echo = decode((0, 1, 0, 0, 0, 1, 0, 0, 0))
        assert main(["disasm", echo.to_hex()]) == EXIT_OK
        out = capsys.readouterr().out
        for mnemonic in ("IN", "OUT", "END"):
            assert mnemonic in out

    def test_disasm_rejects_malformed_hex(self, capsys):
        assert main(["disasm", "4:f"]) == EXIT_VALIDATION
        assert "validation error" in capsys.readouterr().err

    def test_capacity_errors_exit_2(self, tmp_path, monkeypatch, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(HEAVEN)
        monkeypatch.setattr(
            cli, "run_scenario", lambda c: (_ for _ in ()).throw(CapacityError("too big"))
        )
        assert main(["run", "--config", str(cfg)]) == EXIT_CAPACITY
        assert "capacity error" in capsys.readouterr().err

    def test_strict_bound_failure_exits_3(self, monkeypatch, capsys):
        failing = [BoundReport(Fraction(2), Fraction(1), False, "synthetic")]
        monkeypatch.setattr(cli, "verify_invariants", lambda l: failing)
        assert main(["verify", "--strict"]) == EXIT_BOUND
        assert main(["verify"]) == EXIT_OK  # advisory without --strict
