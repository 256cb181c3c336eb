"""Action models and product update.

Events carry a formula precondition and a literal-conjunction postcondition.
Per-agent event edges are directed and may carry a formula guard (an
unconditioned action model is the special case where every guard is top);
reflexive top-guarded loops are implicit for all agents, mirroring state
relations. A missing edge is distinct from a guarded edge whose condition
never holds only in that the latter round-trips through the DSL.
"""

from __future__ import annotations

import logging
from typing import Iterable, Sequence

from .errors import (
    EmptyProductError,
    ModelError,
    NotApplicableError,
    VocabularyMismatchError,
)
from .logic import (
    TOP,
    Agent,
    And,
    Formula,
    Knows,
    LiteralConjunction,
    Not,
    Top,
    Vocabulary,
    eval_world,
    validate_over,
)
from .models import EpistemicModel, EpistemicState

log = logging.getLogger(__name__)


class Event:
    """A possible outcome of an action: what must hold, what changes."""

    __slots__ = ("name", "pre", "post")

    def __init__(self, name: str, pre: Formula, post: LiteralConjunction):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("Event is immutable")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Event):
            return NotImplemented
        return self.name == other.name and self.pre == other.pre and self.post == other.post

    def __repr__(self) -> str:
        return f"Event({self.name!r})"


class EdgeGuard:
    """A directed agent edge between events, present when ``condition``
    holds at the source world of the pair being linked."""

    __slots__ = ("agent", "source", "target", "condition")

    def __init__(self, agent: Agent, source: int, target: int, condition: Formula = TOP):
        object.__setattr__(self, "agent", agent)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "condition", condition)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("EdgeGuard is immutable")

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeGuard):
            return NotImplemented
        return (
            self.agent == other.agent
            and self.source == other.source
            and self.target == other.target
            and self.condition == other.condition
        )

    def __repr__(self) -> str:
        return f"EdgeGuard({self.agent.name}, {self.source}->{self.target})"


class EpistemicAction:
    """An action model plus a non-empty set of designated events."""

    __slots__ = ("name", "vocab", "events", "designated", "edges", "_guards")

    def __init__(
        self,
        name: str,
        vocab: Vocabulary,
        events: Sequence[Event],
        designated: Iterable[int],
        edges: Iterable[EdgeGuard] = (),
    ):
        if not events:
            raise ModelError(f"action {name}: needs at least one event")
        des = frozenset(designated)
        if not des:
            raise ModelError(f"action {name}: designated set must be non-empty")
        n = len(events)
        for e in des:
            if not 0 <= e < n:
                raise ModelError(f"action {name}: designated event out of range: {e}")
        names = [e.name for e in events]
        if len(set(names)) != n:
            raise ModelError(f"action {name}: duplicate event names")
        for event in events:
            validate_over(vocab, event.pre)
        seen: set[tuple[int, int, int]] = set()
        kept: list[EdgeGuard] = []
        for g in edges:
            if not (0 <= g.source < n and 0 <= g.target < n):
                raise ModelError(f"action {name}: edge endpoint out of range")
            validate_over(vocab, g.condition)
            if g.source == g.target:
                continue  # reflexive loops are implicit and unconditioned
            key = (g.agent.index, g.source, g.target)
            if key in seen:
                raise ModelError(
                    f"action {name}: duplicate edge {g.agent.name}:"
                    f" {names[g.source]} -> {names[g.target]}"
                )
            seen.add(key)
            kept.append(g)
        kept.sort(key=lambda g: (g.agent.index, g.source, g.target))
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "events", tuple(events))
        object.__setattr__(self, "designated", des)
        object.__setattr__(self, "edges", tuple(kept))
        object.__setattr__(self, "_guards", None)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("EpistemicAction is immutable")

    def event_index(self, name: str) -> int:
        for i, event in enumerate(self.events):
            if event.name == name:
                return i
        raise ModelError(f"action {self.name}: unknown event {name}")

    def guards(self, agent: Agent) -> dict[tuple[int, int], Formula]:
        """Explicit guarded edges of one agent, as (source, target) -> guard."""
        table = self._guards
        if table is None:
            table = {a: {} for a in self.vocab.agents}
            for g in self.edges:
                table[g.agent][(g.source, g.target)] = g.condition
            object.__setattr__(self, "_guards", table)
        return table[agent]

    def is_unconditional(self) -> bool:
        return all(isinstance(g.condition, Top) for g in self.edges)

    def event_successors(self, agent: Agent, e: int, top_only: bool = False) -> tuple[int, ...]:
        """Sorted event successors including the implicit reflexive one."""
        out = {e}
        for (src, tgt), guard in self.guards(agent).items():
            if src == e and (not top_only or isinstance(guard, Top)):
                out.add(tgt)
        return tuple(sorted(out))

    def is_local_for(self, agent: Agent) -> bool:
        """Designated events closed under the agent's top-guarded edges.

        Guards with non-top conditions depend on worlds and cannot be
        decided at the action level; they are ignored here (and flagged)."""
        self._warn_mixed(agent)
        return all(
            f in self.designated
            for e in self.designated
            for f in self.event_successors(agent, e, top_only=True)
        )

    def _warn_mixed(self, agent: Agent) -> None:
        if any(
            not isinstance(guard, Top)
            for (src, _), guard in self.guards(agent).items()
            if src in self.designated
        ):
            log.debug(
                "action %s: event closure for %s ignores non-trivial guards",
                self.name,
                agent.name,
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpistemicAction):
            return NotImplemented
        return (
            self.name == other.name
            and self.vocab == other.vocab
            and self.events == other.events
            and self.designated == other.designated
            and self.edges == other.edges
        )

    def __repr__(self) -> str:
        return f"EpistemicAction({self.name!r}, {len(self.events)} events)"


# --------------------------------------------------------------------------
# Applicability and product update


def _check_shared_vocab(state: EpistemicState, action: EpistemicAction) -> None:
    if state.model.vocab != action.vocab:
        raise VocabularyMismatchError(
            f"state and action {action.name} use different atom/agent tables"
        )


def applicable(state: EpistemicState, action: EpistemicAction) -> bool:
    """For every designated world there is a designated event whose
    precondition holds there."""
    _check_shared_vocab(state, action)
    return inapplicable_witness(state, action) is None


def inapplicable_witness(state: EpistemicState, action: EpistemicAction) -> int | None:
    """A designated world with no applicable designated event, or None."""
    model = state.model
    designated_events = sorted(action.designated)
    for w in sorted(state.designated):
        if not any(
            eval_world(model, w, action.events[e].pre) for e in designated_events
        ):
            return w
    return None


def product_update(state: EpistemicState, action: EpistemicAction) -> EpistemicState:
    """The product update: pair worlds with events whose preconditions hold.

    An agent edge links (w,e) to (w',e') when w relates to w' and there is
    an agent edge e -> e' whose guard holds at the source world w in the
    pre-update model; postconditions delete negatives then add positives.
    """
    _check_shared_vocab(state, action)
    witness = inapplicable_witness(state, action)
    if witness is not None:
        raise NotApplicableError(
            f"action {action.name} not applicable: designated world"
            f" {state.model.world_names[witness]} satisfies no designated event's"
            " precondition",
            witness=witness,
        )
    model = state.model
    vocab = model.vocab

    pairs: list[tuple[int, int]] = []
    index: dict[tuple[int, int], int] = {}
    for w in range(model.n):
        for e, event in enumerate(action.events):
            if eval_world(model, w, event.pre):
                index[(w, e)] = len(pairs)
                pairs.append((w, e))
    if not pairs:
        raise EmptyProductError(
            f"product of state with action {action.name} has no worlds"
        )

    names = [
        f"({model.world_names[w]},{action.events[e].name})" for (w, e) in pairs
    ]
    labels = [action.events[e].post.apply_to(model.labels[w]) for (w, e) in pairs]

    edges: dict[Agent, set[tuple[int, int]]] = {agent: set() for agent in vocab.agents}
    for agent in vocab.agents:
        guard_table = action.guards(agent)
        for (w, e) in pairs:
            i = index[(w, e)]
            world_succ = model.successors(agent, w)
            event_succ: list[int] = [e]
            for (src, tgt), guard in guard_table.items():
                if src == e and eval_world(model, w, guard):
                    event_succ.append(tgt)
            for wp in world_succ:
                for ep in event_succ:
                    j = index.get((wp, ep))
                    if j is not None and j != i:
                        edges[agent].add((i, j))

    designated = {
        index[(w, e)]
        for w in state.designated
        for e in sorted(action.designated)
        if (w, e) in index
    }
    new_model = EpistemicModel(vocab, names, labels, edges)
    return EpistemicState(new_model, designated)


def local_action(action: EpistemicAction, agent: Agent) -> EpistemicAction:
    """The agent's perspective on an action: designated events closed under
    the agent's top-guarded edges (conditional edges cannot contribute to a
    world-independent closure and are flagged in debug logging)."""
    action._warn_mixed(agent)
    closed = set(action.designated)
    frontier = list(closed)
    while frontier:
        e = frontier.pop()
        for f in action.event_successors(agent, e, top_only=True):
            if f not in closed:
                closed.add(f)
                frontier.append(f)
    if closed == action.designated:
        return action
    return EpistemicAction(action.name, action.vocab, action.events, closed, action.edges)


# --------------------------------------------------------------------------
# Constructors


def induced_action(
    name: str,
    vocab: Vocabulary,
    pre: Formula | LiteralConjunction,
    post: LiteralConjunction,
) -> EpistemicAction:
    """The one-event action induced by a propositional pre/post pair."""
    if isinstance(pre, LiteralConjunction):
        pre = pre.to_formula()
    return EpistemicAction(name, vocab, [Event("e", pre, post)], {0})


def skip_action(vocab: Vocabulary, name: str = "skip") -> EpistemicAction:
    return induced_action(name, vocab, TOP, LiteralConjunction())


def make_ask(
    vocab: Vocabulary,
    asker: Agent,
    answerer: Agent,
    phi: Formula,
    mode: str = "public",
    overhearers: Iterable[Agent] = (),
) -> EpistemicAction:
    """An action where ``asker`` asks ``answerer`` whether ``phi`` holds.

    The three designated answer events are a sincere "yes" (the answerer
    knows phi), "no" (knows not-phi), and "don't know". In ``public`` mode
    they are pairwise distinguishable for everyone. In ``private`` mode a
    non-designated skip event is added with directed edges from each answer
    for every agent other than the two participants, so bystanders think
    nothing happened. In ``overheard`` mode the agents in ``overhearers``
    instead hear the question but not the answer: they get links among the
    three answers, while the remaining outsiders point to skip.
    """
    if asker == answerer:
        raise ModelError("asker and answerer must differ")
    validate_over(vocab, phi)
    overhearer_set = frozenset(overhearers)
    for agent in overhearer_set:
        if agent in (asker, answerer):
            raise ModelError("overhearers must exclude asker and answerer")
    yes = Event("yes", Knows(answerer, phi), LiteralConjunction())
    no = Event("no", Knows(answerer, Not(phi)), LiteralConjunction())
    unknown = Event(
        "unknown",
        And(Not(Knows(answerer, phi)), Not(Knows(answerer, Not(phi)))),
        LiteralConjunction(),
    )
    name = f"Ask({asker.name},{answerer.name},{_short(phi)})"
    if mode == "public":
        return EpistemicAction(name, vocab, [yes, no, unknown], {0, 1, 2})
    if mode not in ("private", "overheard"):
        raise ModelError(f"unknown ask mode: {mode}")
    if mode == "private" and overhearer_set:
        raise ModelError("private mode takes no overhearers")
    skip = Event("skip", TOP, LiteralConjunction())
    events = [yes, no, unknown, skip]
    edges: list[EdgeGuard] = []
    outsiders = [
        agent
        for agent in vocab.agents
        if agent not in (asker, answerer) and agent not in overhearer_set
    ]
    for agent in outsiders:
        for answer in (0, 1, 2):
            edges.append(EdgeGuard(agent, answer, 3))
    for agent in sorted(overhearer_set, key=lambda a: a.index):
        for a in (0, 1, 2):
            for b in (0, 1, 2):
                if a != b:
                    edges.append(EdgeGuard(agent, a, b))
    return EpistemicAction(name, vocab, events, {0, 1, 2}, edges)


def _short(phi: Formula) -> str:
    from .logic import render_formula

    return render_formula(phi)
