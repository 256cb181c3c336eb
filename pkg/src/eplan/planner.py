"""Epistemic planning tasks, sequential search, strong-policy synthesis,
and plan/policy validation.

Search nodes are bisimulation-contracted states keyed by canonical bytes,
so revisits are detected up to bisimilarity. Depth caps are mandatory:
plan existence is undecidable in general, so there is no unbounded mode.
All tie-breaking is fixed (actions in declaration order, worlds by index,
node classes by key), which makes every search result reproducible.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .actions import EpistemicAction, applicable, local_action, product_update
from .errors import ModelError, VocabularyMismatchError
from .logic import Agent, Formula, Vocabulary, eval_state, validate_over
from .models import (
    EpistemicState,
    bisim_contract,
    canonical_key,
    globals_of,
    is_local_for,
    local_state,
)


class EpistemicTask:
    """An action repertoire, an initial state, and a goal formula.

    When ``owner`` is set the task is that agent's own planning task: the
    initial state and every action must be local for the owner (checked).
    """

    __slots__ = ("vocab", "actions", "initial", "goal", "owner", "_by_name")

    def __init__(
        self,
        vocab: Vocabulary,
        actions: Sequence[EpistemicAction],
        initial: EpistemicState,
        goal: Formula,
        owner: Agent | None = None,
    ):
        if initial.model.vocab != vocab:
            raise VocabularyMismatchError("initial state uses a different vocabulary")
        for action in actions:
            if action.vocab != vocab:
                raise VocabularyMismatchError(
                    f"action {action.name} uses a different vocabulary"
                )
        validate_over(vocab, goal)
        by_name: dict[str, EpistemicAction] = {}
        for action in actions:
            if action.name in by_name:
                raise ModelError(f"duplicate action name: {action.name}")
            by_name[action.name] = action
        if owner is not None:
            if vocab.agents[owner.index] != owner:
                raise VocabularyMismatchError(f"owner {owner.name} not in vocabulary")
            if not is_local_for(initial, owner):
                raise ModelError(
                    f"initial state is not local for owner {owner.name}"
                )
            for action in actions:
                if not action.is_local_for(owner):
                    raise ModelError(
                        f"action {action.name} is not local for owner {owner.name}"
                    )
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "actions", tuple(actions))
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "goal", goal)
        object.__setattr__(self, "owner", owner)
        object.__setattr__(self, "_by_name", by_name)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("EpistemicTask is immutable")

    def action_named(self, name: str) -> EpistemicAction:
        try:
            return self._by_name[name]
        except KeyError:
            raise ModelError(f"unknown action name: {name}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpistemicTask):
            return NotImplemented
        return (
            self.vocab == other.vocab
            and self.actions == other.actions
            and self.initial == other.initial
            and self.goal == other.goal
            and self.owner == other.owner
        )

    def __repr__(self) -> str:
        owner = self.owner.name if self.owner else None
        return f"EpistemicTask({len(self.actions)} actions, owner={owner})"


@dataclass(frozen=True)
class SequentialPlan:
    steps: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def localize(task: EpistemicTask, agent: Agent) -> EpistemicTask:
    """The agent's local planning task: localized initial state and
    actions, with the agent installed as owner."""
    return EpistemicTask(
        task.vocab,
        tuple(local_action(a, agent) for a in task.actions),
        local_state(task.initial, agent),
        task.goal,
        owner=agent,
    )


# --------------------------------------------------------------------------
# Sequential planning


def solve_sequential(task: EpistemicTask, depth_cap: int) -> SequentialPlan | None:
    """Shortest action sequence reaching the goal, or None within the cap.

    Breadth-first over product updates, contracting at every expansion and
    deduplicating by canonical key, so bisimilar states are explored once.
    """
    if depth_cap < 0:
        raise ModelError("depth cap must be non-negative")
    start = bisim_contract(task.initial)
    if eval_state(start, task.goal):
        return SequentialPlan(())
    visited = {canonical_key(start)}
    frontier: list[tuple[EpistemicState, tuple[str, ...]]] = [(start, ())]
    depth = 0
    while frontier and depth < depth_cap:
        depth += 1
        next_frontier: list[tuple[EpistemicState, tuple[str, ...]]] = []
        for state, path in frontier:
            for action in task.actions:
                if not applicable(state, action):
                    continue
                succ = bisim_contract(product_update(state, action))
                key = canonical_key(succ)
                if key in visited:
                    continue
                if eval_state(succ, task.goal):
                    return SequentialPlan(path + (action.name,))
                visited.add(key)
                next_frontier.append((succ, path + (action.name,)))
        frontier = next_frontier
    return None


@dataclass
class PlanReport:
    """Result of replaying a plan step by step."""

    ok: bool
    message: str
    failed_step: int | None = None
    final_state: EpistemicState | None = None

    def __str__(self) -> str:
        return self.message


def validate_plan(task: EpistemicTask, plan: SequentialPlan | Sequence[str]) -> PlanReport:
    """Replay product updates; report the first inapplicable step or the
    final goal verdict. Unknown action names raise."""
    steps = list(plan.steps if isinstance(plan, SequentialPlan) else plan)
    state = bisim_contract(task.initial)
    for i, name in enumerate(steps):
        action = task.action_named(name)
        if not applicable(state, action):
            return PlanReport(
                ok=False,
                message=f"step {i + 1} ({name}) is not applicable",
                failed_step=i,
                final_state=state,
            )
        state = bisim_contract(product_update(state, action))
    if eval_state(state, task.goal):
        return PlanReport(ok=True, message=f"valid: {len(steps)} steps reach the goal",
                          final_state=state)
    return PlanReport(
        ok=False,
        message="goal does not hold in the final state",
        failed_step=None,
        final_state=state,
    )


# --------------------------------------------------------------------------
# Policies


class Policy:
    """A uniform mapping from global states to action names.

    Entries are keyed by the canonical key of the owner's local view of a
    global state, which enforces the uniformity condition by construction:
    two global states the owner cannot tell apart share a key, hence an
    action. ``states`` keeps a representative node state per key for
    rendering; file-loaded policies may omit it.
    """

    __slots__ = ("owner", "entries", "states")

    def __init__(
        self,
        owner: Agent,
        entries: dict[bytes, str] | None = None,
        states: dict[bytes, EpistemicState] | None = None,
    ):
        self.owner = owner
        self.entries = dict(entries or {})
        self.states = dict(states or {})

    @classmethod
    def from_assignments(
        cls, owner: Agent, pairs: Iterable[tuple[EpistemicState, str]]
    ) -> "Policy":
        """Build a policy from (state, action name) pairs; states are taken
        from the owner's perspective. Conflicting assignments to the same
        local view are rejected."""
        policy = cls(owner)
        for state, name in pairs:
            view = bisim_contract(local_state(state, owner))
            key = canonical_key(view)
            if key in policy.entries and policy.entries[key] != name:
                raise ModelError(
                    f"conflicting assignments for one local state:"
                    f" {policy.entries[key]} vs {name}"
                )
            policy.entries[key] = name
            policy.states[key] = view
        return policy

    def key_for(self, state: EpistemicState) -> bytes:
        return canonical_key(local_state(state, self.owner))

    def action_for(self, state: EpistemicState) -> str | None:
        return self.entries.get(self.key_for(state))

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"Policy(owner={self.owner.name}, {len(self.entries)} entries)"


def _owner_classes(
    state: EpistemicState, owner: Agent
) -> list[tuple[bytes, EpistemicState]]:
    """Partition the globals of ``state`` into the owner's run-time
    observation classes: globals sharing a bisimilar owner-local view.

    Returns (key, contracted local state) per class, sorted by key."""
    classes: dict[bytes, EpistemicState] = {}
    for g in globals_of(state):
        view = bisim_contract(local_state(g, owner))
        key = canonical_key(view)
        if key not in classes:
            classes[key] = view
    return sorted(classes.items(), key=lambda kv: kv[0])


@dataclass
class _Node:
    state: EpistemicState
    depth: int
    goal: bool
    # One entry per applicable action: (order, action name, child keys).
    edges: list[tuple[int, str, tuple[bytes, ...]]] = field(default_factory=list)
    expanded: bool = False


def solve_policy(task: EpistemicTask, depth_cap: int) -> Policy | None:
    """Strong acyclic policy via AND-OR search over owner-local states.

    OR-choice: an action applicable in the owner's local state. AND-branch:
    the owner-local classes of the updated state's globals (what the owner
    may observe at run time). The reachable node graph is explored to the
    depth cap, then heights are computed by min-max backward induction:
    goal nodes have height 0, an action's cost is one plus its worst child,
    and each node takes the best action (first declared wins ties). A
    policy exists iff every initial class gets a finite height within the
    cap; following strictly decreasing heights makes the result acyclic.
    """
    if task.owner is None:
        raise ModelError("policy synthesis needs a task with an owner")
    if depth_cap < 0:
        raise ModelError("depth cap must be non-negative")
    owner = task.owner

    nodes: dict[bytes, _Node] = {}
    order: list[bytes] = []

    def intern(key: bytes, state: EpistemicState, depth: int) -> _Node:
        node = nodes.get(key)
        if node is None:
            node = _Node(state, depth, eval_state(state, task.goal))
            nodes[key] = node
            order.append(key)
        return node

    roots = _owner_classes(task.initial, owner)
    queue: deque[bytes] = deque()
    for key, state in roots:
        intern(key, state, 0)
        queue.append(key)

    while queue:
        key = queue.popleft()
        node = nodes[key]
        if node.expanded or node.goal or node.depth >= depth_cap:
            continue
        node.expanded = True
        for rank, action in enumerate(task.actions):
            if not applicable(node.state, action):
                continue
            succ = bisim_contract(product_update(node.state, action))
            child_keys = []
            for child_key, child_state in _owner_classes(succ, owner):
                child_keys.append(child_key)
                if child_key not in nodes:
                    intern(child_key, child_state, node.depth + 1)
                    queue.append(child_key)
            node.edges.append((rank, action.name, tuple(child_keys)))

    heights: dict[bytes, int] = {k: 0 for k in order if nodes[k].goal}
    changed = True
    while changed:
        changed = False
        for key in order:
            node = nodes[key]
            if node.goal:
                continue
            best: int | None = None
            for _, _, children in node.edges:
                if any(c not in heights for c in children):
                    continue
                h = 1 + max(heights[c] for c in children)
                if best is None or h < best:
                    best = h
            if best is not None and (key not in heights or best < heights[key]):
                heights[key] = best
                changed = True

    if any(key not in heights or heights[key] > depth_cap for key, _ in roots):
        return None

    # Pick, per node, the first declared action achieving the minimal height.
    chosen: dict[bytes, str] = {}
    for key in order:
        node = nodes[key]
        if node.goal or key not in heights:
            continue
        for _, name, children in node.edges:
            if all(c in heights for c in children):
                if 1 + max(heights[c] for c in children) == heights[key]:
                    chosen[key] = name
                    break

    # Collect only the nodes the chosen actions can actually reach.
    entries: dict[bytes, str] = {}
    states: dict[bytes, EpistemicState] = {}
    walk: deque[bytes] = deque(key for key, _ in roots)
    seen: set[bytes] = set(walk)
    while walk:
        key = walk.popleft()
        node = nodes[key]
        if node.goal:
            continue
        entries[key] = chosen[key]
        states[key] = node.state
        for _, name, children in node.edges:
            if name == chosen[key]:
                for child in children:
                    if child not in seen:
                        seen.add(child)
                        walk.append(child)
                break
    return Policy(owner, entries, states)


# --------------------------------------------------------------------------
# Execution


@dataclass
class Execution:
    """An alternating trace of global states and actions."""

    states: tuple[EpistemicState, ...]
    actions: tuple[str, ...]
    outcome: str  # "success" | "failure" | "cutoff"
    reason: str | None = None

    @property
    def length(self) -> int:
        return len(self.actions)

    def __repr__(self) -> str:
        return f"Execution({self.length} steps, {self.outcome})"


def execute(
    task: EpistemicTask,
    policy: Policy,
    start: EpistemicState,
    seed: int = 0,
    max_steps: int = 100,
    chooser: Callable[[list[EpistemicState]], int] | None = None,
) -> Execution:
    """Follow the policy from a global state, resolving nondeterministic
    outcomes with the chooser (default: seeded RNG). Stops with success
    when the policy is undefined and the goal holds, with failure when it
    is undefined otherwise or a step misfires, and with cutoff after
    ``max_steps`` (a guard against non-solution policies)."""
    if not start.is_global:
        raise ModelError("execution starts from a global state")
    if chooser is None:
        rng = random.Random(seed)
        chooser = lambda options: rng.randrange(len(options))  # noqa: E731
    states = [bisim_contract(start)]
    actions: list[str] = []
    while True:
        current = states[-1]
        name = policy.action_for(current)
        if name is None:
            if eval_state(current, task.goal):
                return Execution(tuple(states), tuple(actions), "success")
            return Execution(
                tuple(states), tuple(actions), "failure", "policy undefined"
            )
        if len(actions) >= max_steps:
            return Execution(tuple(states), tuple(actions), "cutoff", "step bound")
        action = task.action_named(name)
        if not applicable(current, action):
            return Execution(
                tuple(states), tuple(actions), "failure", f"{name} not applicable"
            )
        options = [bisim_contract(g) for g in globals_of(product_update(current, action))]
        pick = chooser(options)
        actions.append(name)
        states.append(options[pick])


def enumerate_executions(
    task: EpistemicTask,
    policy: Policy,
    start: EpistemicState,
    max_steps: int = 1000,
) -> list[Execution]:
    """All executions of the policy from a global state, depth-first with
    branches explored in world order. Revisiting a state already on the
    current path is reported as a cutoff (the policy loops)."""
    if not start.is_global:
        raise ModelError("execution starts from a global state")
    out: list[Execution] = []

    def walk(state: EpistemicState, trace_states, trace_actions, path_keys):
        name = policy.action_for(state)
        if name is None:
            outcome = "success" if eval_state(state, task.goal) else "failure"
            reason = None if outcome == "success" else "policy undefined"
            out.append(Execution(tuple(trace_states), tuple(trace_actions), outcome, reason))
            return
        key = canonical_key(state)
        if key in path_keys:
            out.append(
                Execution(tuple(trace_states), tuple(trace_actions), "cutoff", "cycle")
            )
            return
        if len(trace_actions) >= max_steps:
            out.append(
                Execution(tuple(trace_states), tuple(trace_actions), "cutoff", "step bound")
            )
            return
        action = task.action_named(name)
        if not applicable(state, action):
            out.append(
                Execution(
                    tuple(trace_states),
                    tuple(trace_actions),
                    "failure",
                    f"{name} not applicable",
                )
            )
            return
        for succ in globals_of(product_update(state, action)):
            succ = bisim_contract(succ)
            walk(
                succ,
                trace_states + [succ],
                trace_actions + [name],
                path_keys | {key},
            )

    first = bisim_contract(start)
    walk(first, [first], [], frozenset())
    return out


# --------------------------------------------------------------------------
# Policy validation


@dataclass(frozen=True)
class Violation:
    kind: str  # coverage | inapplicable | uniformity | cycle | unsuccessful
    message: str
    trace: tuple[str, ...] = ()

    def __str__(self) -> str:
        text = f"{self.kind}: {self.message}"
        if self.trace:
            text += " [after " + "; ".join(self.trace) + "]"
        return text


@dataclass
class PolicyReport:
    ok: bool
    violations: tuple[Violation, ...]
    executions: tuple[Execution, ...]

    @property
    def execution_lengths(self) -> tuple[int, ...]:
        return tuple(sorted({e.length for e in self.executions}))

    def __str__(self) -> str:
        if self.ok:
            lengths = ",".join(str(n) for n in self.execution_lengths)
            return (
                f"valid: {len(self.executions)} executions enumerated,"
                f" lengths {{{lengths}}}"
            )
        return f"invalid: {len(self.violations)} violations"


def validate_policy(task: EpistemicTask, policy) -> PolicyReport:
    """Check a policy against the strong-solution definition.

    (a) every prescribed action is applicable in the owner's local state;
    (b) uniformity: states with bisimilar owner-local views get one action;
    (c) the initial state's globals are covered (or already satisfy the
    goal); (d) every execution, enumerated exhaustively, succeeds, and the
    reachable policy graph is acyclic. The policy only needs ``owner`` and
    ``action_for``; violations carry a witness trace."""
    owner = policy.owner
    violations: list[Violation] = []
    executions: list[Execution] = []

    by_view: dict[bytes, str] = {}
    checked: set[bytes] = set()

    def check_state(state: EpistemicState, trace: tuple[str, ...]) -> str | None:
        name = policy.action_for(state)
        if name is None:
            return None
        key = canonical_key(state)
        view = bisim_contract(local_state(state, owner))
        view_key = canonical_key(view)
        if view_key in by_view and by_view[view_key] != name:
            violations.append(
                Violation(
                    "uniformity",
                    f"bisimilar local states map to {by_view[view_key]} and {name}",
                    trace,
                )
            )
        by_view.setdefault(view_key, name)
        if key in checked:
            return name
        checked.add(key)
        try:
            action = task.action_named(name)
        except ModelError:
            violations.append(Violation("inapplicable", f"unknown action {name}", trace))
            return None
        if not applicable(view, action):
            violations.append(
                Violation(
                    "inapplicable",
                    f"{name} is not applicable in the owner-local state",
                    trace,
                )
            )
            return None
        return name

    for g in globals_of(task.initial):
        g = bisim_contract(g)
        if policy.action_for(g) is None and not eval_state(g, task.goal):
            violations.append(
                Violation(
                    "coverage",
                    "initial global state is neither covered nor a goal state",
                )
            )

    # Walk the reachable policy graph, checking (a)/(b) at each state.
    frontier: deque[tuple[EpistemicState, tuple[str, ...]]] = deque(
        (bisim_contract(g), ()) for g in globals_of(task.initial)
    )
    walked: set[bytes] = set()
    while frontier:
        state, trace = frontier.popleft()
        key = canonical_key(state)
        if key in walked:
            continue
        walked.add(key)
        name = check_state(state, trace)
        if name is None:
            continue
        action = task.action_named(name)
        if not applicable(state, action):
            continue
        for succ in globals_of(product_update(state, action)):
            frontier.append((bisim_contract(succ), trace + (name,)))

    for g in globals_of(task.initial):
        for execution in enumerate_executions(task, policy, g):
            executions.append(execution)
            if execution.outcome == "cutoff":
                violations.append(
                    Violation(
                        "cycle" if execution.reason == "cycle" else "unsuccessful",
                        f"execution does not terminate ({execution.reason})",
                        execution.actions,
                    )
                )
            elif execution.outcome != "success":
                violations.append(
                    Violation(
                        "unsuccessful",
                        f"execution fails: {execution.reason}",
                        execution.actions,
                    )
                )

    return PolicyReport(not violations, tuple(violations), tuple(executions))
