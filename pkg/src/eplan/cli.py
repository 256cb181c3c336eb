"""Command-line interface over ``.eplan`` task files.

Exit codes: 0 success or solution found; 1 no solution within the depth
cap (or execution cutoff); 2 usage, parse, or resolution errors; 3 a
validation or check failure. ``solve`` always validates its own output
before printing, so an internal soundness bug surfaces as exit 3, never
as a silently wrong plan. Identical invocations produce byte-identical
output; set EPLAN_LOG=debug for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from .actions import applicable, product_update
from .dsl import (
    ParsedDocument,
    export_dot,
    parse_formula,
    parse_task,
    render_state,
    render_state_line,
)
from .errors import EplanError, TaskParseError
from .logic import eval_state, render_formula
from .models import EpistemicState, bisim_contract, globals_of
from .planner import (
    EpistemicTask,
    Policy,
    SequentialPlan,
    execute,
    solve_policy,
    solve_sequential,
    validate_plan,
    validate_policy,
)

JSON_VERSION = 1


def main(argv=None) -> int:
    level = os.environ.get("EPLAN_LOG", "").upper()
    if level:
        logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TaskParseError as exc:
        for diagnostic in exc.diagnostics:
            print(f"error: {diagnostic}", file=sys.stderr)
        return 2
    except EplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eplan", description="Model check, update, and plan over epistemic tasks."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("task", help="path to a .eplan task file")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--output", "-o", help="write output to a file instead of stdout")

    p = sub.add_parser("check", help="evaluate a formula in the task's initial state")
    common(p)
    p.add_argument("formula", help="formula in the task syntax")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("apply", help="fold product updates and print the result")
    common(p)
    p.add_argument("--actions", nargs="*", default=[], metavar="NAME")
    p.add_argument("--contract", action="store_true", help="contract the result")
    p.add_argument("--check", help="also evaluate a formula in the resulting state")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("contract", help="print the bisimulation-contracted initial state")
    common(p)
    p.set_defaults(func=cmd_contract)

    p = sub.add_parser("solve", help="search for a sequential plan or a strong policy")
    common(p)
    p.add_argument("--mode", choices=("seq", "policy"), required=True)
    p.add_argument("--max-depth", type=int, required=True,
                   help="mandatory search depth cap (plan existence is undecidable)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="validate a plan or policy file against the task")
    common(p)
    p.add_argument("--plan", help="plan file: one action name per line")
    p.add_argument("--policy", help="policy file: JSON as produced by solve --mode policy")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("execute", help="simulate a policy from a global initial state")
    common(p)
    p.add_argument("--policy", required=True, help="policy file (JSON)")
    p.add_argument("--seed", type=int, default=0, help="seed for the outcome chooser")
    p.add_argument("--start", help="designated world to start from (default: first)")
    p.add_argument("--max-steps", type=int, default=100)
    p.set_defaults(func=cmd_execute)

    p = sub.add_parser("dot", help="export a state or action model to Graphviz DOT")
    common(p)
    p.add_argument("--action", help="export this action model instead of the initial state")
    p.add_argument("--state", help="export this named state block")
    p.set_defaults(func=cmd_dot)

    return parser


def _load(args) -> ParsedDocument:
    path = Path(args.task)
    return parse_task(path.read_bytes())


def _emit(args, text: str, payload: dict) -> None:
    if args.format == "json":
        out = json.dumps(payload, ensure_ascii=False) + "\n"
    else:
        out = text if text.endswith("\n") else text + "\n"
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)


def _digest(key: bytes) -> str:
    return hashlib.sha256(key).hexdigest()[:12]


def _state_payload(state: EpistemicState) -> dict:
    model = state.model
    worlds = [
        {
            "name": model.world_names[w],
            "designated": w in state.designated,
            "atoms": sorted((a.name for a in model.labels[w])),
        }
        for w in range(model.n)
    ]
    edges = []
    for agent in model.vocab.agents:
        for (u, v) in sorted(model.edges[agent]):
            edges.append(
                {
                    "agent": agent.name,
                    "source": model.world_names[u],
                    "target": model.world_names[v],
                }
            )
    return {"worlds": worlds, "edges": edges}


# --------------------------------------------------------------------------
# Subcommands


def cmd_check(args) -> int:
    parsed = _load(args)
    task = parsed.task
    phi = parse_formula(args.formula, task.vocab)
    value = eval_state(task.initial, phi)
    _emit(
        args,
        "true" if value else "false",
        {
            "eplan": JSON_VERSION,
            "command": "check",
            "formula": render_formula(phi),
            "value": value,
        },
    )
    return 0 if value else 3


def _fold_actions(task: EpistemicTask, names: list[str]) -> EpistemicState:
    state = task.initial
    for name in names:
        action = task.action_named(name)
        if not applicable(state, action):
            raise _Failure(f"action {name} is not applicable at this point")
        state = product_update(state, action)
    return state


class _Failure(Exception):
    """Semantic failure mapped to exit code 3."""


def cmd_apply(args) -> int:
    parsed = _load(args)
    task = parsed.task
    try:
        state = _fold_actions(task, args.actions)
    except _Failure as exc:
        print(f"not applicable: {exc}", file=sys.stderr)
        return 3
    if args.contract:
        state = bisim_contract(state)
    lines = [render_state(state)]
    payload = {
        "eplan": JSON_VERSION,
        "command": "apply",
        "actions": list(args.actions),
        "contracted": bool(args.contract),
        "state": _state_payload(state),
    }
    status = 0
    if args.check:
        phi = parse_formula(args.check, task.vocab)
        value = eval_state(state, phi)
        lines.append(f"check {render_formula(phi)}: {'true' if value else 'false'}")
        payload["check"] = {"formula": render_formula(phi), "value": value}
        if not value:
            status = 3
    _emit(args, "\n".join(lines), payload)
    return status


def cmd_contract(args) -> int:
    parsed = _load(args)
    state = bisim_contract(parsed.task.initial)
    _emit(
        args,
        render_state(state),
        {
            "eplan": JSON_VERSION,
            "command": "contract",
            "state": _state_payload(state),
        },
    )
    return 0


def cmd_solve(args) -> int:
    parsed = _load(args)
    task = parsed.task
    if args.mode == "seq":
        return _solve_seq(args, task)
    return _solve_policy(args, task)


def _solve_seq(args, task: EpistemicTask) -> int:
    plan = solve_sequential(task, args.max_depth)
    if plan is None:
        _emit(
            args,
            f"no solution within depth {args.max_depth}",
            {
                "eplan": JSON_VERSION,
                "command": "solve",
                "mode": "seq",
                "max_depth": args.max_depth,
                "found": False,
            },
        )
        return 1
    report = validate_plan(task, plan)
    if not report.ok:
        print(f"internal error: produced plan failed validation: {report}", file=sys.stderr)
        return 3
    _emit(
        args,
        "\n".join(plan.steps),
        {
            "eplan": JSON_VERSION,
            "command": "solve",
            "mode": "seq",
            "max_depth": args.max_depth,
            "found": True,
            "plan": list(plan.steps),
            "length": len(plan),
        },
    )
    return 0


def _policy_rows(policy: Policy) -> list[dict]:
    rows = []
    for key, action in policy.entries.items():
        state = policy.states.get(key)
        rows.append(
            {
                "digest": _digest(key),
                "key": key.hex(),
                "state": render_state_line(state) if state is not None else "",
                "action": action,
            }
        )
    return rows


def _policy_tree(task: EpistemicTask, policy: Policy) -> list[str]:
    from .planner import _owner_classes

    lines = ["tree:"]

    def walk(key: bytes, state: EpistemicState, indent: int, path: frozenset) -> None:
        pad = "  " * indent
        action = policy.entries.get(key)
        if action is None:
            lines.append(f"{pad}[{_digest(key)}] (goal)")
            return
        if key in path:  # cannot happen for validated policies
            lines.append(f"{pad}[{_digest(key)}] (cycle)")
            return
        lines.append(f"{pad}[{_digest(key)}] {action}")
        succ = bisim_contract(product_update(state, task.action_named(action)))
        for child_key, child_state in _owner_classes(succ, policy.owner):
            walk(child_key, child_state, indent + 1, path | {key})

    for key, state in _owner_classes(task.initial, policy.owner):
        walk(key, state, 1, frozenset())
    return lines


def _solve_policy(args, task: EpistemicTask) -> int:
    if task.owner is None:
        print("error: policy mode requires a task with an owner", file=sys.stderr)
        return 2
    policy = solve_policy(task, args.max_depth)
    if policy is None:
        _emit(
            args,
            f"no strong policy within depth {args.max_depth}",
            {
                "eplan": JSON_VERSION,
                "command": "solve",
                "mode": "policy",
                "max_depth": args.max_depth,
                "found": False,
            },
        )
        return 1
    report = validate_policy(task, policy)
    if not report.ok:
        print("internal error: produced policy failed validation:", file=sys.stderr)
        for violation in report.violations:
            print(f"  {violation}", file=sys.stderr)
        return 3
    lengths = ",".join(str(n) for n in report.execution_lengths)
    lines = [f"policy owner={policy.owner.name} entries={len(policy)}"]
    for i, row in enumerate(_policy_rows(policy)):
        lines.append(f"{i}: digest={row['digest']} action={row['action']}")
        lines.append(f"   state: {row['state']}")
    lines.extend(_policy_tree(task, policy))
    lines.append(f"executions: count={len(report.executions)} lengths={{{lengths}}}")
    payload = {
        "eplan": JSON_VERSION,
        "command": "solve",
        "mode": "policy",
        "max_depth": args.max_depth,
        "found": True,
        "owner": policy.owner.name,
        "entries": _policy_rows(policy),
        "executions": {
            "count": len(report.executions),
            "lengths": list(report.execution_lengths),
        },
    }
    _emit(args, "\n".join(lines), payload)
    return 0


def _load_policy_file(path: str, task: EpistemicTask) -> Policy:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        owner = task.vocab.agent(doc["owner"])
        entries = {bytes.fromhex(row["key"]): row["action"] for row in doc["entries"]}
    except (ValueError, KeyError, TypeError) as exc:
        raise EplanError(f"not a policy file: {path} ({exc})") from None
    return Policy(owner, entries)


def cmd_validate(args) -> int:
    parsed = _load(args)
    task = parsed.task
    if bool(args.plan) == bool(args.policy):
        print("error: validate needs exactly one of --plan or --policy", file=sys.stderr)
        return 2
    if args.plan:
        steps = [
            line.strip()
            for line in Path(args.plan).read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
        report = validate_plan(task, SequentialPlan(tuple(steps)))
        _emit(
            args,
            report.message,
            {
                "eplan": JSON_VERSION,
                "command": "validate",
                "kind": "plan",
                "ok": report.ok,
                "message": report.message,
                "failed_step": report.failed_step,
            },
        )
        return 0 if report.ok else 3
    policy = _load_policy_file(args.policy, task)
    report = validate_policy(task, policy)
    lines = [str(report)]
    lines.extend(f"violation {v}" for v in report.violations)
    _emit(
        args,
        "\n".join(lines),
        {
            "eplan": JSON_VERSION,
            "command": "validate",
            "kind": "policy",
            "ok": report.ok,
            "violations": [str(v) for v in report.violations],
            "executions": {
                "count": len(report.executions),
                "lengths": list(report.execution_lengths),
            },
        },
    )
    return 0 if report.ok else 3


def cmd_execute(args) -> int:
    parsed = _load(args)
    task = parsed.task
    policy = _load_policy_file(args.policy, task)
    initial = task.initial
    starts = globals_of(initial)
    if args.start is not None:
        index = initial.model.world_index(args.start)
        if index not in initial.designated:
            print(f"error: world {args.start} is not designated", file=sys.stderr)
            return 2
        start = EpistemicState(initial.model, {index})
    else:
        start = starts[0]
    result = execute(task, policy, start, seed=args.seed, max_steps=args.max_steps)
    lines = [f"start: {render_state_line(result.states[0])}"]
    for i, name in enumerate(result.actions):
        lines.append(f"{i + 1}: {name} -> {render_state_line(result.states[i + 1])}")
    lines.append(f"outcome: {result.outcome}" + (f" ({result.reason})" if result.reason else ""))
    payload = {
        "eplan": JSON_VERSION,
        "command": "execute",
        "seed": args.seed,
        "trace": {
            "states": [render_state_line(s) for s in result.states],
            "actions": list(result.actions),
        },
        "outcome": result.outcome,
        "reason": result.reason,
    }
    _emit(args, "\n".join(lines), payload)
    if result.outcome == "success":
        return 0
    return 1 if result.outcome == "cutoff" else 3


def cmd_dot(args) -> int:
    parsed = _load(args)
    if args.action and args.state:
        print("error: choose one of --action or --state", file=sys.stderr)
        return 2
    if args.action:
        value = parsed.task.action_named(args.action)
    elif args.state:
        if args.state not in parsed.states:
            print(f"error: unknown state {args.state}", file=sys.stderr)
            return 2
        value = parsed.states[args.state]
    else:
        value = parsed.task.initial
    text = export_dot(value)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
