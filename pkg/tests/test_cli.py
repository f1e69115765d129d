"""End-to-end CLI behavior: wiring, exit codes, idempotent outputs."""
import json
import stat
import textwrap

import pytest

from breakfinder.cli import main
from breakfinder.covering import CoveringArray, save_array
from breakfinder.model import Guide, load_solution, save_guide
from breakfinder.oracle import BreakingSetDNF, save_breaking_set


@pytest.fixture
def workdir(tmp_path):
    guide = Guide(guide_id="cli-g", rules=tuple(f"R{i}" for i in range(8)))
    save_guide(guide, tmp_path / "guide.json")
    dnf = BreakingSetDNF(name="d", clauses=(frozenset({"R1", "R4"}),))
    save_breaking_set(dnf, tmp_path / "dnf.json")
    return tmp_path


def write_script(path, body):
    path.write_text("#!/bin/sh\n" + textwrap.dedent(body), encoding="utf-8")
    path.chmod(path.stat().st_mode | stat.S_IXUSR)
    return str(path)


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestGenerateVerify:
    def test_generate_then_verify(self, workdir, capsys):
        out = workdir / "array.json"
        assert run_cli(
            "generate", "--guide", workdir / "guide.json",
            "--strength", 2, "--seed", 0, "-o", out,
        ) == 0
        assert run_cli("verify", "--array", out) == 0
        captured = capsys.readouterr().out
        assert "covered" in captured

    def test_generate_idempotent(self, workdir):
        a, b = workdir / "a.json", workdir / "b.json"
        for out in (a, b):
            run_cli("generate", "--guide", workdir / "guide.json",
                    "--strength", 2, "--seed", 0, "-o", out)
        assert a.read_bytes() == b.read_bytes()

    def test_verify_detects_gap(self, workdir):
        arr = CoveringArray(
            guide_id="cli-g", strength=2, algorithm_tag="test",
            columns=tuple(f"R{i}" for i in range(3)),
            rows=((False, False, False), (True, True, True)),
        )
        path = workdir / "bad.json"
        save_array(arr, path)
        assert run_cli("verify", "--array", path) == 1

    def test_sampled_verify(self, workdir):
        out = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", out)
        assert run_cli("verify", "--array", out, "--sample", 500) == 0

    def test_force_gate(self, tmp_path, capsys):
        guide = Guide(
            guide_id="big", rules=tuple(f"R{i}" for i in range(101))
        )
        save_guide(guide, tmp_path / "big.json")
        code = run_cli("generate", "--guide", tmp_path / "big.json",
                       "--strength", 5, "-o", tmp_path / "out.json")
        assert code == 64
        assert "--force" in capsys.readouterr().err


class TestActsCommands:
    def test_export_import_cycle(self, workdir):
        acts_in = workdir / "acts_input.txt"
        assert run_cli("export-acts-input", "--guide", workdir / "guide.json",
                       "-o", acts_in) == 0
        assert "[Parameter]" in acts_in.read_text()

        export = workdir / "acts_export.txt"
        export.write_text(
            "R0,R1,R2,R3,R4,R5,R6,R7\n"
            + "\n".join(
                ",".join("true" if (v >> j) & 1 else "false" for j in range(8))
                for v in range(4)
            )
            + "\n",
            encoding="utf-8",
        )
        out = workdir / "imported.json"
        assert run_cli("import-acts", "--guide", workdir / "guide.json",
                       "--acts", export, "--strength", 2, "-o", out) == 0
        assert json.loads(out.read_text())["algorithm_tag"] == "imported-acts"


class TestRunAnalyze:
    def _generate(self, workdir):
        out = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", out)
        return out

    def test_simulated_run_and_all_strategies(self, workdir, capsys):
        array = self._generate(workdir)
        results = workdir / "results.json"
        assert run_cli(
            "run", "--guide", workdir / "guide.json", "--array", array,
            "--oracle", workdir / "dnf.json", "-o", results,
        ) == 0
        assert results.exists() and (workdir / "results.json.jsonl").exists()

        for flag in ("dtree", "dtree-max-partition", "logic"):
            sol_path = workdir / f"sol_{flag}.json"
            assert run_cli(
                "analyze", "--guide", workdir / "guide.json",
                "--results", results, "--strategy", flag,
                "--oracle", workdir / "dnf.json", "-o", sol_path,
            ) == 0
            sol = load_solution(sol_path)
            assert sol.verified_non_breaking is True
            assert len(sol.excluded) == 1
            assert sol.excluded <= {"R1", "R4"}

    def test_unverified_analyze_prints_hint(self, workdir, capsys):
        array = self._generate(workdir)
        results = workdir / "results.json"
        run_cli("run", "--guide", workdir / "guide.json", "--array", array,
                "--oracle", workdir / "dnf.json", "-o", results)
        capsys.readouterr()
        assert run_cli(
            "analyze", "--guide", workdir / "guide.json",
            "--results", results, "--strategy", "logic",
            "-o", workdir / "sol.json",
        ) == 0
        out = capsys.readouterr().out
        assert "unverified" in out
        sol = load_solution(workdir / "sol.json")
        assert sol.verified_non_breaking is None

    def test_dot_export(self, workdir):
        array = self._generate(workdir)
        results = workdir / "results.json"
        run_cli("run", "--guide", workdir / "guide.json", "--array", array,
                "--oracle", workdir / "dnf.json", "-o", results)
        dot = workdir / "tree.dot"
        assert run_cli(
            "analyze", "--guide", workdir / "guide.json",
            "--results", results, "--strategy", "dtree",
            "--dot", dot, "-o", workdir / "s.json",
        ) == 0
        assert dot.read_text().startswith("digraph")

    def test_dot_with_logic_is_usage_error(self, workdir):
        array = self._generate(workdir)
        results = workdir / "results.json"
        run_cli("run", "--guide", workdir / "guide.json", "--array", array,
                "--oracle", workdir / "dnf.json", "-o", results)
        assert run_cli(
            "analyze", "--guide", workdir / "guide.json",
            "--results", results, "--strategy", "logic",
            "--dot", workdir / "x.dot", "-o", workdir / "y.json",
        ) == 64

    def test_worker_count_gives_identical_results_file(self, workdir):
        array = self._generate(workdir)
        blobs = []
        for workers in (1, 2, 8):
            out = workdir / f"results_{workers}.json"
            assert run_cli(
                "run", "--guide", workdir / "guide.json", "--array", array,
                "--oracle", workdir / "dnf.json",
                "--workers", workers, "-o", out,
            ) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]

    def test_full_guide_pass_short_circuits(self, workdir, capsys):
        array = self._generate(workdir)
        empty = workdir / "empty_dnf.json"
        save_breaking_set(BreakingSetDNF(name="empty", clauses=()), empty)
        results = workdir / "results.json"
        assert run_cli(
            "run", "--guide", workdir / "guide.json", "--array", array,
            "--oracle", empty, "-o", results,
        ) == 0
        assert "nothing to exclude" in capsys.readouterr().out
        doc = json.loads(results.read_text())
        stages = [r["stage"] for r in doc["records"]]
        assert stages == ["baseline", "full_guide"]


class TestExternalExitCodes:
    def test_baseline_failure_exits_2(self, workdir):
        cmds = {
            "apply": write_script(workdir / "apply.sh", "exit 0\n"),
            "test": write_script(workdir / "test.sh", "echo boom\nexit 1\n"),
            "revert": write_script(workdir / "revert.sh", "exit 0\n"),
        }
        array = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", array)
        assert run_cli(
            "run", "--guide", workdir / "guide.json", "--array", array,
            "--apply-cmd", cmds["apply"], "--test-cmd", cmds["test"],
            "--revert-cmd", cmds["revert"], "-o", workdir / "r.json",
        ) == 2

    def test_broken_revert_exits_3(self, workdir):
        state = workdir / "state.txt"
        apply_cmd = write_script(workdir / "apply.sh", f'cp "$1" {state}\n')
        test_cmd = write_script(
            workdir / "test.sh", f"[ -f {state} ] && exit 1\nexit 0\n"
        )
        # Claims success but leaves the state behind.
        revert_cmd = write_script(workdir / "revert.sh", "exit 0\n")
        array = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", array)
        assert run_cli(
            "run", "--guide", workdir / "guide.json", "--array", array,
            "--apply-cmd", apply_cmd, "--test-cmd", test_cmd,
            "--revert-cmd", revert_cmd, "-o", workdir / "r.json",
        ) == 3

    def test_revert_command_error_exits_3(self, workdir):
        state = workdir / "state.txt"
        apply_cmd = write_script(workdir / "apply.sh", f'cp "$1" {state}\n')
        test_cmd = write_script(
            workdir / "test.sh", f"[ -f {state} ] && exit 1\nexit 0\n"
        )
        # The command itself errors, not just a stale state.
        revert_cmd = write_script(workdir / "revert.sh", "exit 1\n")
        array = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", array)
        assert run_cli(
            "run", "--guide", workdir / "guide.json", "--array", array,
            "--apply-cmd", apply_cmd, "--test-cmd", test_cmd,
            "--revert-cmd", revert_cmd, "-o", workdir / "r.json",
        ) == 3

    def test_partial_run_exits_4(self, tmp_path):
        guide = Guide(guide_id="g3", rules=("R0", "R1", "R2"))
        save_guide(guide, tmp_path / "guide.json")
        arr = CoveringArray(
            guide_id="g3", strength=2, algorithm_tag="test",
            columns=guide.rules,
            rows=(
                (True, True, True),
                (True, False, False),
                (False, True, False),
            ),
        )
        save_array(arr, tmp_path / "array.json")
        state = tmp_path / "state.txt"
        # Applying a single-rule tuple fails; everything else works.
        apply_cmd = write_script(
            tmp_path / "apply.sh",
            f'if [ "$(grep -c . "$1")" = "1" ]; then exit 9; fi\ncp "$1" {state}\n',
        )
        test_cmd = write_script(
            tmp_path / "test.sh",
            f"if [ -f {state} ] && [ \"$(grep -c . {state})\" = \"3\" ]; then\n"
            "  echo all-rules\n  exit 1\nfi\nexit 0\n",
        )
        revert_cmd = write_script(tmp_path / "revert.sh", f"rm -f {state}\n")
        assert run_cli(
            "run", "--guide", tmp_path / "guide.json",
            "--array", tmp_path / "array.json",
            "--apply-cmd", apply_cmd, "--test-cmd", test_cmd,
            "--revert-cmd", revert_cmd, "-o", tmp_path / "r.json",
        ) == 4


class TestEvaluateEffort:
    def test_evaluate_writes_per_strategy_csvs(self, workdir, capsys):
        array = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", array)
        assert run_cli(
            "evaluate", "--guide", workdir / "guide.json", "--array", array,
            "--grid", "1x2", "--variants", 1, "--seed", 3,
            "-o", workdir / "study.csv",
        ) == 0
        for strategy in (
            "dtree_shortest_path", "dtree_max_partition", "logic_min"
        ):
            path = workdir / f"study-{strategy}.csv"
            assert path.exists()
            assert path.read_text().startswith("n_clauses,")
        assert "exact" in capsys.readouterr().out

    def test_effort_documented_value(self, capsys):
        assert run_cli(
            "effort", "--n-tuples", 330, "--n-vms", 30, "--t-vm", 60,
            "--t-sw", 300, "--t-a", 120, "--t-t", 120, "--t-sr", 120,
            "--t-ana", 60,
        ) == 0
        assert "6120 s" in capsys.readouterr().out


class TestUsageErrors:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("nonsense")
        assert exc.value.code == 64

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("generate", "--strength", 2)
        assert exc.value.code == 64

    def test_no_subcommand_prints_help(self, capsys):
        assert run_cli() == 64
        assert "generate" in capsys.readouterr().out

    def test_oracle_and_commands_conflict(self, workdir):
        array = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", array)
        assert run_cli(
            "run", "--guide", workdir / "guide.json", "--array", array,
            "--oracle", workdir / "dnf.json", "--apply-cmd", "x",
            "-o", workdir / "r.json",
        ) == 64

    def test_bad_grid_shape(self, workdir):
        array = workdir / "array.json"
        run_cli("generate", "--guide", workdir / "guide.json",
                "--strength", 2, "-o", array)
        assert run_cli(
            "evaluate", "--guide", workdir / "guide.json", "--array", array,
            "--grid", "wide", "-o", workdir / "s.csv",
        ) == 64

    def test_missing_file_is_runtime_error(self, tmp_path):
        assert run_cli("verify", "--array", tmp_path / "nope.json") == 1
