"""The pre-epistemic layers: STRIPS-style schemas with grounding,
propositional planning tasks, and belief-state planning with conditional
actions.

Rigid type predicates are handled by sorting parameters instead of carrying
IsAgent/IsLocation-style atoms through the state.
"""

from __future__ import annotations

from collections import deque
from itertools import product as iproduct
from typing import Iterable, Mapping, Sequence

from .errors import ConsistencyError, ModelError, VocabularyError
from .logic import (
    And,
    Bottom,
    Formula,
    LiteralConjunction,
    Not,
    Or,
    Prop,
    Top,
    Vocabulary,
    is_propositional,
    validate_over,
)
from .models import BeliefState

Valuation = frozenset


class SchemaAtom:
    """A predicate applied to parameters and/or constants, e.g. At(agt, from)."""

    __slots__ = ("predicate", "args")

    def __init__(self, predicate: str, args: Sequence[str]):
        object.__setattr__(self, "predicate", predicate)
        object.__setattr__(self, "args", tuple(args))

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("SchemaAtom is immutable")

    def ground_name(self, binding: Mapping[str, str]) -> str:
        resolved = [binding.get(a, a) for a in self.args]
        if not resolved:
            return self.predicate
        return f"{self.predicate}({','.join(resolved)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SchemaAtom):
            return NotImplemented
        return self.predicate == other.predicate and self.args == other.args

    def __hash__(self) -> int:
        return hash((self.predicate, self.args))

    def __repr__(self) -> str:
        return self.ground_name({})


class SchemaLiterals:
    """Positive and negative schema atoms of a precondition or effect."""

    __slots__ = ("positives", "negatives")

    def __init__(self, positives: Iterable[SchemaAtom] = (), negatives: Iterable[SchemaAtom] = ()):
        object.__setattr__(self, "positives", tuple(positives))
        object.__setattr__(self, "negatives", tuple(negatives))

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("SchemaLiterals is immutable")


class ActionSchema:
    """A named, parameterized pre/effect pair over sorted variables."""

    __slots__ = ("name", "parameters", "precondition", "effect")

    def __init__(
        self,
        name: str,
        parameters: Sequence[tuple[str, str]],
        precondition: SchemaLiterals,
        effect: SchemaLiterals,
    ):
        declared = {var for var, _ in parameters}
        if len(declared) != len(parameters):
            raise ModelError(f"schema {name}: duplicate parameter names")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "parameters", tuple(parameters))
        object.__setattr__(self, "precondition", precondition)
        object.__setattr__(self, "effect", effect)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("ActionSchema is immutable")

    def __repr__(self) -> str:
        params = ",".join(f"{v}:{s}" for v, s in self.parameters)
        return f"ActionSchema({self.name}({params}))"


class GroundAction:
    """A propositional action: a precondition/postcondition pair."""

    __slots__ = ("name", "pre", "post")

    def __init__(self, name: str, pre: LiteralConjunction, post: LiteralConjunction):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("GroundAction is immutable")

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroundAction):
            return NotImplemented
        return self.name == other.name and self.pre == other.pre and self.post == other.post

    def __repr__(self) -> str:
        return f"GroundAction({self.name!r})"


class ConditionalAction:
    """A non-empty set of ground events; mutually consistent preconditions
    are read as nondeterminism (only one event takes place)."""

    __slots__ = ("name", "events")

    def __init__(self, name: str, events: Sequence[GroundAction]):
        if not events:
            raise ModelError(f"conditional action {name}: needs at least one event")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "events", tuple(events))

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("ConditionalAction is immutable")

    def __repr__(self) -> str:
        return f"ConditionalAction({self.name!r}, {len(self.events)} events)"


class PropositionalTask:
    """Ground actions, an initial valuation, and a propositional goal."""

    __slots__ = ("vocab", "actions", "initial", "goal")

    def __init__(
        self,
        vocab: Vocabulary,
        actions: Sequence[GroundAction],
        initial: Iterable,
        goal: Formula,
    ):
        init = frozenset(initial)
        for atom in init:
            if atom.index >= len(vocab.atoms) or vocab.atoms[atom.index] != atom:
                raise VocabularyError(f"initial atom {atom.name} not in vocabulary")
        validate_over(vocab, goal)
        if not is_propositional(goal):
            raise ModelError("goal of a propositional task must not use K or C")
        names = [a.name for a in actions]
        if len(set(names)) != len(names):
            raise ModelError("duplicate ground action names")
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "actions", tuple(actions))
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "goal", goal)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("PropositionalTask is immutable")


def eval_prop(valuation: Valuation, phi: Formula) -> bool:
    """Propositional truth in a valuation (no modalities allowed)."""
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bottom):
        return False
    if isinstance(phi, Prop):
        return phi.atom in valuation
    if isinstance(phi, Not):
        return not eval_prop(valuation, phi.sub)
    if isinstance(phi, And):
        return eval_prop(valuation, phi.left) and eval_prop(valuation, phi.right)
    if isinstance(phi, Or):
        return eval_prop(valuation, phi.left) or eval_prop(valuation, phi.right)
    raise ModelError("propositional evaluation reached a modality")


# --------------------------------------------------------------------------
# Grounding


def ground(
    schemas: Sequence[ActionSchema],
    objects: Mapping[str, Sequence[str]],
    vocab: Vocabulary,
) -> list[GroundAction]:
    """All ground instances of the schemas, sorted by name then arguments.

    Effects are applied delete-then-add, so a literal that an instantiation
    makes both positive and negative nets to positive (self-moves like
    Go(F,H,H) become no-ops); instances whose precondition becomes
    contradictory can never fire and are dropped.
    """
    out: list[tuple[tuple[str, tuple[str, ...]], GroundAction]] = []
    for schema in schemas:
        domains = []
        for var, sort in schema.parameters:
            members = objects.get(sort)
            if not members:
                raise ModelError(f"schema {schema.name}: empty sort {sort}")
            domains.append(list(members))
        for combo in iproduct(*domains):
            binding = {var: obj for (var, _), obj in zip(schema.parameters, combo)}
            name = f"{schema.name}({','.join(combo)})" if combo else schema.name
            try:
                pre = _instantiate(schema.precondition, binding, vocab, normalize=False)
            except ConsistencyError:
                continue
            post = _instantiate(schema.effect, binding, vocab, normalize=True)
            out.append(((schema.name, tuple(combo)), GroundAction(name, pre, post)))
    out.sort(key=lambda item: item[0])
    return [action for _, action in out]


def _instantiate(
    literals: SchemaLiterals,
    binding: Mapping[str, str],
    vocab: Vocabulary,
    normalize: bool,
) -> LiteralConjunction:
    pos = {vocab.atom(a.ground_name(binding)) for a in literals.positives}
    neg = {vocab.atom(a.ground_name(binding)) for a in literals.negatives}
    if normalize:
        neg -= pos
    return LiteralConjunction(frozenset(pos), frozenset(neg))


# --------------------------------------------------------------------------
# Transition semantics


def apply_ground(valuation: Valuation, action: GroundAction) -> Valuation | None:
    """Delete-then-add update, or None when the precondition fails."""
    if not action.pre.holds_in(valuation):
        return None
    return action.post.apply_to(valuation)


def apply_belief(belief: BeliefState, action: ConditionalAction) -> BeliefState:
    """The generalized transition on belief states: collect the results of
    every applicable event at every valuation (duplicates merge).

    Requires strong applicability: every valuation must admit at least one
    event, keeping this layer aligned with epistemic applicability."""
    results = set()
    for valuation in belief.valuations:
        fired = False
        for event in action.events:
            if event.pre.holds_in(valuation):
                results.add(event.post.apply_to(valuation))
                fired = True
        if not fired:
            names = ", ".join(sorted(a.name for a in valuation)) or "(empty)"
            raise ModelError(
                f"action {action.name} not applicable: no event fires in"
                f" {{{names}}}"
            )
    return BeliefState(results)


def reachable_system(
    actions: Sequence[GroundAction], initial: Valuation
) -> tuple[list[Valuation], set[tuple[Valuation, str, Valuation]]]:
    """The reachable fragment of the induced transition system.

    States come back in BFS discovery order (actions tried in the given
    order); edges are (source, action name, target) triples."""
    initial = frozenset(initial)
    states = [initial]
    seen = {initial}
    edges: set[tuple[Valuation, str, Valuation]] = set()
    queue = deque([initial])
    while queue:
        state = queue.popleft()
        for action in actions:
            result = apply_ground(state, action)
            if result is None:
                continue
            edges.add((state, action.name, result))
            if result not in seen:
                seen.add(result)
                states.append(result)
                queue.append(result)
    return states, edges


def solve_classical(task: PropositionalTask, depth_cap: int) -> list[str] | None:
    """Shortest plan by breadth-first search over valuations, or None
    within the cap; ties break by action order."""
    if depth_cap < 0:
        raise ModelError("depth cap must be non-negative")
    if eval_prop(task.initial, task.goal):
        return []
    visited = {task.initial}
    frontier: list[tuple[Valuation, list[str]]] = [(task.initial, [])]
    depth = 0
    while frontier and depth < depth_cap:
        depth += 1
        next_frontier: list[tuple[Valuation, list[str]]] = []
        for state, path in frontier:
            for action in task.actions:
                result = apply_ground(state, action)
                if result is None or result in visited:
                    continue
                if eval_prop(result, task.goal):
                    return path + [action.name]
                visited.add(result)
                next_frontier.append((result, path + [action.name]))
        frontier = next_frontier
    return None
