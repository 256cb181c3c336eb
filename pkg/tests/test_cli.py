"""CLI behavior: subcommands, exit codes, and the JSON output schema."""

import json
from pathlib import Path

import pytest

from conftest import TASKS_DIR
from eplan import Policy, parse_task, product_update
from eplan.cli import main
from eplan.dsl import export_dot

PO2 = str(TASKS_DIR / "two_post_offices.eplan")
SINGLE = str(TASKS_DIR / "birthday_single.eplan")
WRAP = str(TASKS_DIR / "wrap_copresence.eplan")
PRIVATE = str(TASKS_DIR / "ask_private.eplan")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCheck:
    def test_top_is_true(self, capsys):
        code, out, _ = run(capsys, "check", PO2, "top")
        assert code == 0 and out == "true\n"

    def test_false_formula_exits_three(self, capsys):
        code, out, _ = run(capsys, "check", PO2, "At(Present,PostOffice1)")
        assert code == 3 and out == "false\n"

    def test_json_shape(self, capsys):
        code, out, _ = run(capsys, "check", PO2, "--format", "json", "top")
        payload = json.loads(out)
        assert payload == {
            "eplan": 1,
            "command": "check",
            "formula": "top",
            "value": True,
        }

    def test_bad_formula_exits_two(self, capsys):
        code, _, err = run(capsys, "check", PO2, "At(Nowhere,Else)")
        assert code == 2 and "unknown atom" in err


class TestApply:
    def test_fold_and_check(self, capsys):
        code, out, _ = run(
            capsys,
            "apply", PO2,
            "--actions", "Go(Father,Home,PostOffice1)",
            "TryPickUp(Father,Present,PostOffice1)",
            "--check",
            "K[Father] Has(Father,Present) | K[Father] !Has(Father,Present)",
        )
        assert code == 0
        assert "edge Father" not in out  # the link was cut
        assert out.strip().endswith("true")

    def test_inapplicable_exits_three(self, capsys):
        code, _, err = run(capsys, "apply", PO2, "--actions", "Wrap(Father,Present)")
        assert code == 3 and "not applicable" in err

    def test_unknown_action_exits_two(self, capsys):
        code, _, err = run(capsys, "apply", PO2, "--actions", "Fly(Father)")
        assert code == 2 and "unknown action" in err

    def test_contract_flag(self, capsys):
        code, out, _ = run(capsys, "apply", PO2, "--contract", "--format", "json")
        payload = json.loads(out)
        assert payload["contracted"] is True
        assert len(payload["state"]["worlds"]) == 2


class TestSolveSeq:
    def test_plan_text_output(self, capsys):
        code, out, _ = run(capsys, "solve", PO2, "--mode", "seq", "--max-depth", "8")
        assert code == 0
        assert out.splitlines() == [
            "Go(Father,Home,PostOffice1)",
            "TryPickUp(Father,Present,PostOffice1)",
            "Go(Father,PostOffice1,PostOffice2)",
            "TryPickUp(Father,Present,PostOffice2)",
            "Go(Father,PostOffice2,Home)",
            "Wrap(Father,Present)",
        ]

    def test_no_solution_exits_one(self, capsys):
        code, out, _ = run(capsys, "solve", PO2, "--mode", "seq", "--max-depth", "3")
        assert code == 1 and "no solution" in out

    def test_json_schema(self, capsys):
        code, out, _ = run(
            capsys, "solve", PO2, "--mode", "seq", "--max-depth", "8",
            "--format", "json",
        )
        payload = json.loads(out)
        assert payload["eplan"] == 1
        assert payload["found"] is True
        assert payload["length"] == 6
        assert isinstance(payload["plan"], list)

    def test_max_depth_required(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve", PO2, "--mode", "seq"])
        assert exc.value.code == 2


class TestSolvePolicy:
    def test_policy_with_tree_and_lengths(self, capsys):
        code, out, _ = run(capsys, "solve", PO2, "--mode", "policy", "--max-depth", "8")
        assert code == 0
        assert "policy owner=Father entries=7" in out
        assert "lengths={4,6}" in out
        assert "tree:" in out

    def test_policy_round_trip_through_file(self, capsys, tmp_path):
        policy_file = tmp_path / "policy.json"
        code, _, _ = run(
            capsys, "solve", PO2, "--mode", "policy", "--max-depth", "8",
            "--format", "json", "--output", str(policy_file),
        )
        assert code == 0
        payload = json.loads(policy_file.read_text())
        assert payload["owner"] == "Father"
        assert len(payload["entries"]) == 7

        code, out, _ = run(capsys, "validate", PO2, "--policy", str(policy_file))
        assert code == 0 and "valid" in out

        code, out, _ = run(
            capsys, "execute", PO2, "--policy", str(policy_file),
            "--seed", "1", "--start", "w2",
        )
        assert code == 0
        assert "outcome: success" in out
        first = out

        code, out, _ = run(
            capsys, "execute", PO2, "--policy", str(policy_file),
            "--seed", "1", "--start", "w2",
        )
        assert out == first  # same seed, same trace

    def test_policy_needs_owner(self, capsys, tmp_path):
        code, _, err = run(
            capsys, "solve", PRIVATE, "--mode", "policy", "--max-depth", "4"
        )
        assert code == 2 and "owner" in err


class TestValidate:
    def test_plan_file_ok(self, capsys, tmp_path):
        plan = tmp_path / "plan.txt"
        plan.write_text(
            "# the worked six-step plan\n"
            "Go(Father,Home,PostOffice1)\n"
            "TryPickUp(Father,Present,PostOffice1)\n"
            "Go(Father,PostOffice1,PostOffice2)\n"
            "TryPickUp(Father,Present,PostOffice2)\n"
            "Go(Father,PostOffice2,Home)\n"
            "Wrap(Father,Present)\n"
        )
        code, out, _ = run(capsys, "validate", PO2, "--plan", str(plan))
        assert code == 0 and "valid" in out

    def test_plan_file_invalid_exits_three(self, capsys, tmp_path):
        plan = tmp_path / "plan.txt"
        plan.write_text("Wrap(Father,Present)\n")
        code, out, _ = run(capsys, "validate", PO2, "--plan", str(plan))
        assert code == 3 and "not applicable" in out

    def test_failing_policy_file(self, capsys, tmp_path):
        # Build the wrap-at-home policy by hand and write it in the wire
        # format; validation must reject it.
        doc = parse_task(Path(WRAP).read_bytes())
        task = doc.task
        after_go = product_update(
            task.initial, task.action_named("Go(Father,PostOffice,Home)")
        )
        policy = Policy.from_assignments(
            task.owner,
            [
                (task.initial, "Go(Father,PostOffice,Home)"),
                (after_go, "Wrap(Father,Present,Home)"),
            ],
        )
        payload = {
            "eplan": 1,
            "owner": task.owner.name,
            "entries": [
                {"key": key.hex(), "action": action}
                for key, action in policy.entries.items()
            ],
        }
        policy_file = tmp_path / "wrap_home.json"
        policy_file.write_text(json.dumps(payload))
        code, out, _ = run(capsys, "validate", WRAP, "--policy", str(policy_file))
        assert code == 3
        assert "violation" in out

    def test_requires_exactly_one_input(self, capsys):
        code, _, err = run(capsys, "validate", PO2)
        assert code == 2

    def test_garbage_policy_file_exits_two(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "validate", PO2, "--policy", str(bad))
        assert code == 2 and "not a policy file" in err


class TestDot:
    def test_initial_state_dot(self, capsys):
        doc = parse_task(Path(PO2).read_bytes())
        code, out, _ = run(capsys, "dot", PO2)
        assert code == 0 and out == export_dot(doc.task.initial)

    def test_action_dot(self, capsys):
        code, out, _ = run(capsys, "dot", PRIVATE, "--action", "AskWhetherPO1")
        assert code == 0 and out.startswith("digraph action")

    def test_unknown_state_exits_two(self, capsys):
        code, _, err = run(capsys, "dot", PO2, "--state", "nope")
        assert code == 2

    def test_named_state_export(self, capsys):
        code, out, _ = run(capsys, "dot", PO2, "--state", "s0")
        assert code == 0 and out.startswith("digraph state")

    def test_output_file_in_text_mode(self, capsys, tmp_path):
        target = tmp_path / "plan.txt"
        code, out, _ = run(
            capsys, "solve", PO2, "--mode", "seq", "--max-depth", "8",
            "--output", str(target),
        )
        assert code == 0 and out == ""
        assert target.read_text().splitlines()[0] == "Go(Father,Home,PostOffice1)"


class TestErrors:
    def test_parse_error_exits_two(self, capsys, tmp_path):
        bad = tmp_path / "bad.eplan"
        bad.write_text("task { initial: s0 }")
        code, _, err = run(capsys, "check", str(bad), "top")
        assert code == 2 and "error:" in err

    def test_missing_file_exits_two(self, capsys):
        code, _, err = run(capsys, "check", "/nonexistent.eplan", "top")
        assert code == 2
