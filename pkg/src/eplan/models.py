"""Epistemic models and states: perspective shifts, belief-state embedding,
bisimulation contraction, and canonical hashing keys for search nodes.

Relations are stored as explicit per-agent directed edge sets; reflexive
loops are implicit and always present, so drawn figures and documents never
need to declare them. Symmetry/transitivity are not enforced structurally,
so models with false beliefs (private actions) are representable; an
optional checker can assert S5 properties.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .errors import ModelError, VocabularyError, VocabularyMismatchError
from .logic import Agent, Atom, Vocabulary

Edge = tuple[int, int]


class EpistemicModel:
    """A finite multi-agent Kripke model with a valuation per world.

    Immutable after construction; successor lists and union-reachability
    are cached lazily, which keeps repeated evaluation cheap and is safe to
    share across concurrent readers.
    """

    __slots__ = ("vocab", "world_names", "labels", "edges", "_succ", "_reach")

    def __init__(
        self,
        vocab: Vocabulary,
        world_names: Sequence[str],
        labels: Sequence[Iterable[Atom]],
        edges: dict[Agent, Iterable[Edge]] | None = None,
    ):
        if not world_names:
            raise ModelError("a model needs at least one world")
        if len(labels) != len(world_names):
            raise ModelError("labels and world names disagree in length")
        n = len(world_names)
        frozen_labels = []
        for label in labels:
            fl = frozenset(label)
            for atom in fl:
                if atom.index >= len(vocab.atoms) or vocab.atoms[atom.index] != atom:
                    raise VocabularyError(f"label atom {atom.name} not in vocabulary")
            frozen_labels.append(fl)
        edge_map: dict[Agent, frozenset[Edge]] = {}
        edges = edges or {}
        for agent in vocab.agents:
            pairs = set()
            for (u, v) in edges.get(agent, ()):
                if not (0 <= u < n and 0 <= v < n):
                    raise ModelError(f"edge endpoint out of range: ({u},{v})")
                if u != v:  # reflexive loops are implicit
                    pairs.add((u, v))
            edge_map[agent] = frozenset(pairs)
        for agent in edges:
            if agent not in edge_map:
                raise VocabularyError(f"agent {agent.name} not in vocabulary")

        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "world_names", tuple(world_names))
        object.__setattr__(self, "labels", tuple(frozen_labels))
        object.__setattr__(self, "edges", edge_map)
        object.__setattr__(self, "_succ", {})
        object.__setattr__(self, "_reach", {})

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("EpistemicModel is immutable")

    @property
    def n(self) -> int:
        return len(self.world_names)

    def world_index(self, name: str) -> int:
        try:
            return self.world_names.index(name)
        except ValueError:
            raise ModelError(f"unknown world: {name}") from None

    def successors(self, agent: Agent, w: int) -> tuple[int, ...]:
        """Sorted i-successors of ``w``, including ``w`` itself."""
        key = (agent.index, w)
        cached = self._succ.get(key)
        if cached is None:
            out = {w}
            for (u, v) in self.edges[agent]:
                if u == w:
                    out.add(v)
            cached = tuple(sorted(out))
            self._succ[key] = cached
        return cached

    def union_reach(self, w: int) -> frozenset[int]:
        """Worlds reachable from ``w`` under the union of all relations."""
        cached = self._reach.get(w)
        if cached is None:
            seen = {w}
            frontier = [w]
            while frontier:
                u = frontier.pop()
                for agent in self.vocab.agents:
                    for v in self.successors(agent, u):
                        if v not in seen:
                            seen.add(v)
                            frontier.append(v)
            cached = frozenset(seen)
            self._reach[w] = cached
        return cached

    def reachable_from(self, starts: Iterable[int]) -> frozenset[int]:
        out: set[int] = set()
        for w in starts:
            out.update(self.union_reach(w))
        return frozenset(out)

    def is_equivalence(self, agent: Agent) -> bool:
        """True when the agent's relation (with implicit loops) is an
        equivalence relation; useful as an optional S5 check."""
        explicit = self.edges[agent]
        if any((v, u) not in explicit for (u, v) in explicit):
            return False
        succ = {w: set(self.successors(agent, w)) for w in range(self.n)}
        return all(succ[v] <= succ[u] for u in range(self.n) for v in succ[u])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpistemicModel):
            return NotImplemented
        return (
            self.vocab == other.vocab
            and self.world_names == other.world_names
            and self.labels == other.labels
            and self.edges == other.edges
        )

    def __repr__(self) -> str:
        return f"EpistemicModel({self.n} worlds)"


class EpistemicState:
    """A model plus a non-empty set of designated worlds.

    Global when exactly one world is designated; doubles as the planner's
    search node.
    """

    __slots__ = ("model", "designated")

    def __init__(self, model: EpistemicModel, designated: Iterable[int]):
        des = frozenset(designated)
        if not des:
            raise ModelError("designated set must be non-empty")
        for w in des:
            if not 0 <= w < model.n:
                raise ModelError(f"designated world out of range: {w}")
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "designated", des)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("EpistemicState is immutable")

    @property
    def is_global(self) -> bool:
        return len(self.designated) == 1

    @property
    def actual_world(self) -> int:
        if not self.is_global:
            raise ModelError("not a global state")
        return next(iter(self.designated))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpistemicState):
            return NotImplemented
        return self.model == other.model and self.designated == other.designated

    def __repr__(self) -> str:
        des = ",".join(self.model.world_names[w] for w in sorted(self.designated))
        return f"EpistemicState({self.model.n} worlds, designated {des})"


class BeliefState:
    """A non-empty finite set of propositional valuations."""

    __slots__ = ("valuations",)

    def __init__(self, valuations: Iterable[Iterable[Atom]]):
        vals = frozenset(frozenset(v) for v in valuations)
        if not vals:
            raise ModelError("belief state must be non-empty")
        object.__setattr__(self, "valuations", vals)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("BeliefState is immutable")

    def __eq__(self, other) -> bool:
        if not isinstance(other, BeliefState):
            return NotImplemented
        return self.valuations == other.valuations

    def __hash__(self) -> int:
        return hash(self.valuations)

    def __len__(self) -> int:
        return len(self.valuations)

    def __repr__(self) -> str:
        return f"BeliefState({len(self.valuations)} valuations)"


# --------------------------------------------------------------------------
# Perspective shifts


def globals_of(state: EpistemicState) -> list[EpistemicState]:
    """One global state per designated world, ordered by world index."""
    return [EpistemicState(state.model, {w}) for w in sorted(state.designated)]


def local_state(state: EpistemicState, agent: Agent) -> EpistemicState:
    """Agent's perspective: designated set closed under its relation.

    For non-symmetric relations the forward-reachable closure is taken, so
    the result is always closed under the agent's relation; for equivalence
    relations this coincides with taking the agent's equivalence classes.
    """
    model = state.model
    closed = set(state.designated)
    frontier = list(closed)
    while frontier:
        w = frontier.pop()
        for v in model.successors(agent, w):
            if v not in closed:
                closed.add(v)
                frontier.append(v)
    return EpistemicState(model, closed)


def is_local_for(state: EpistemicState, agent: Agent) -> bool:
    """True iff every agent-successor of a designated world is designated."""
    model = state.model
    return all(
        v in state.designated
        for w in state.designated
        for v in model.successors(agent, w)
    )


def from_belief_state(vocab: Vocabulary, belief: BeliefState) -> EpistemicState:
    """Embed a belief state: one world per valuation, the total relation for
    every agent, all worlds designated."""
    order = sorted(
        belief.valuations,
        key=lambda val: tuple(sorted(a.index for a in val)),
    )
    n = len(order)
    names = [f"w{i + 1}" for i in range(n)]
    total = [(u, v) for u in range(n) for v in range(n) if u != v]
    edges = {agent: total for agent in vocab.agents}
    model = EpistemicModel(vocab, names, order, edges)
    return EpistemicState(model, range(n))


def to_belief_state(state: EpistemicState) -> BeliefState:
    """Forget structure: the designated worlds' valuations as a set."""
    return BeliefState(state.model.labels[w] for w in sorted(state.designated))


# --------------------------------------------------------------------------
# Bisimulation machinery
#
# Contraction restricts to the worlds reachable from the designated set and
# quotients by the coarsest partition stable under labels and per-agent
# successor-block sets (Paige-Tarjan-style refinement). Designation does not
# split blocks: state bisimilarity only requires the designated sets to be
# linked both ways, so the quotient marks a block designated when it contains
# a designated world. This is what makes canonical-key equality coincide with
# state bisimilarity.


def _refine(
    worlds: Sequence[int],
    labels,
    succ,
    agents: Sequence[Agent],
    initial: dict[int, int],
) -> dict[int, int]:
    """Iterate successor-set splitting until the partition is stable.

    ``succ(agent, w)`` must include the implicit reflexive successor.
    Returns a dense block id per world.
    """
    block = dict(initial)
    while True:
        sig_to_id: dict[tuple, int] = {}
        new_block: dict[int, int] = {}
        for w in worlds:
            sig = (
                block[w],
                tuple(
                    frozenset(block[v] for v in succ(agent, w))
                    for agent in agents
                ),
            )
            if sig not in sig_to_id:
                sig_to_id[sig] = len(sig_to_id)
            new_block[w] = sig_to_id[sig]
        if len(set(new_block.values())) == len(set(block.values())):
            return new_block
        block = new_block


def _label_blocks(worlds: Sequence[int], labels) -> dict[int, int]:
    key_to_id: dict[tuple, int] = {}
    out: dict[int, int] = {}
    for w in worlds:
        key = tuple(sorted(a.index for a in labels[w]))
        if key not in key_to_id:
            key_to_id[key] = len(key_to_id)
        out[w] = key_to_id[key]
    return out


def bisim_contract(state: EpistemicState) -> EpistemicState:
    """Quotient by the largest bisimulation on the designated-reachable part.

    The result is bisimilar to ``state``, has no two bisimilar worlds, and
    its designated set is the image of the input's designated set. Worlds
    unreachable from the designated set are dropped here (and only here).
    """
    model = state.model
    reach = sorted(model.reachable_from(state.designated))
    in_reach = set(reach)

    def succ(agent: Agent, w: int):
        return [v for v in model.successors(agent, w) if v in in_reach]

    block = _refine(
        reach, model.labels, succ, model.vocab.agents, _label_blocks(reach, model.labels)
    )

    # One quotient world per block, ordered by smallest member index.
    members: dict[int, list[int]] = {}
    for w in reach:
        members.setdefault(block[w], []).append(w)
    ordered_blocks = sorted(members.values(), key=lambda ws: min(ws))
    block_of = {w: i for i, ws in enumerate(ordered_blocks) for w in ws}

    names = [model.world_names[min(ws)] for ws in ordered_blocks]
    labels = [model.labels[min(ws)] for ws in ordered_blocks]
    edges: dict[Agent, set[Edge]] = {agent: set() for agent in model.vocab.agents}
    for agent in model.vocab.agents:
        for (u, v) in model.edges[agent]:
            if u in block_of and v in block_of and block_of[u] != block_of[v]:
                edges[agent].add((block_of[u], block_of[v]))
    designated = {block_of[w] for w in state.designated}
    contracted = EpistemicModel(model.vocab, names, labels, edges)
    return EpistemicState(contracted, designated)


def bisimilar(s: EpistemicState, t: EpistemicState) -> bool:
    """Whether a bisimulation links the two designated sets both ways.

    Computed by refining the disjoint union of both models and checking
    that every designated world of each state shares a block with a
    designated world of the other.
    """
    if s.model.vocab != t.model.vocab:
        raise VocabularyMismatchError("states are over different atom/agent tables")
    ms, mt = s.model, t.model
    offset = ms.n
    worlds = list(range(ms.n + mt.n))

    def labels(w: int):
        return ms.labels[w] if w < offset else mt.labels[w - offset]

    def succ(agent: Agent, w: int):
        if w < offset:
            return ms.successors(agent, w)
        return [v + offset for v in mt.successors(agent, w - offset)]

    class _L:
        def __getitem__(self, w):
            return labels(w)

    block = _refine(worlds, _L(), succ, ms.vocab.agents, _label_blocks(worlds, _L()))
    s_blocks = {block[w] for w in s.designated}
    t_blocks = {block[w + offset] for w in t.designated}
    return s_blocks <= t_blocks and t_blocks <= s_blocks


def canonical_key(state: EpistemicState) -> bytes:
    """A deterministic byte key with: equal keys iff bisimilar states.

    Contracts first, then orders the (pairwise non-bisimilar) quotient
    worlds by an iterated signature: label set and designated flag first,
    then per-agent sorted successor-rank multisets, refined to a fixpoint.
    Ranks are assigned by sorting signatures, so the final order does not
    depend on the input's world numbering; any residual tie (impossible
    after contraction, kept for safety) breaks by world index.
    """
    c = bisim_contract(state)
    model = c.model
    n = model.n
    agents = model.vocab.agents

    sigs: list[tuple] = [
        (tuple(sorted(a.index for a in model.labels[w])), w in c.designated)
        for w in range(n)
    ]
    rank = _ranks(sigs)
    for _ in range(n):
        sigs = [
            (
                rank[w],
                tuple(
                    tuple(sorted(rank[v] for v in model.successors(agent, w)))
                    for agent in agents
                ),
            )
            for w in range(n)
        ]
        new_rank = _ranks(sigs)
        if new_rank == rank:
            break
        rank = new_rank

    order = sorted(range(n), key=lambda w: (rank[w], w))
    position = {w: i for i, w in enumerate(order)}
    payload = (
        len(model.vocab.atoms),
        len(agents),
        n,
        tuple(
            (tuple(sorted(a.index for a in model.labels[w])), w in c.designated)
            for w in order
        ),
        tuple(
            tuple(sorted((position[u], position[v]) for (u, v) in model.edges[agent]))
            for agent in agents
        ),
    )
    return repr(payload).encode("ascii")


def _ranks(sigs: list[tuple]) -> list[int]:
    table = {sig: i for i, sig in enumerate(sorted(set(sigs)))}
    return [table[sig] for sig in sigs]
