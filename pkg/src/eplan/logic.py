"""Epistemic language: vocabulary, formula AST, and the truth definition.

Formulas are evaluated against Kripke-style models that expose
``vocab``, ``labels``, ``successors(agent, world)`` and ``union_reach(world)``
(see :mod:`eplan.models`); keeping the evaluator duck-typed avoids an import
cycle between syntax and structures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import ConsistencyError, ModelError, VocabularyError


@dataclass(frozen=True)
class Atom:
    """An atomic proposition, interned in a :class:`Vocabulary`."""

    index: int
    name: str

    def __repr__(self) -> str:
        return f"Atom({self.name!r})"


@dataclass(frozen=True)
class Agent:
    """An agent, interned in a :class:`Vocabulary`."""

    index: int
    name: str

    def __repr__(self) -> str:
        return f"Agent({self.name!r})"


class Vocabulary:
    """The finite atom and agent tables a task is built over.

    Immutable after construction; atoms and agents keep their declaration
    order, which fixes every deterministic ordering downstream.
    """

    __slots__ = ("atoms", "agents", "_atom_by_name", "_agent_by_name")

    def __init__(self, atom_names: Iterable[str], agent_names: Iterable[str]):
        atoms = []
        seen: dict[str, int] = {}
        for name in atom_names:
            if name in seen:
                raise VocabularyError(f"duplicate atom name: {name}")
            seen[name] = len(atoms)
            atoms.append(Atom(len(atoms), name))
        agents = []
        aseen: dict[str, int] = {}
        for name in agent_names:
            if name in aseen:
                raise VocabularyError(f"duplicate agent name: {name}")
            aseen[name] = len(agents)
            agents.append(Agent(len(agents), name))
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "agents", tuple(agents))
        object.__setattr__(self, "_atom_by_name", seen)
        object.__setattr__(self, "_agent_by_name", aseen)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("Vocabulary is immutable")

    def atom(self, name: str) -> Atom:
        try:
            return self.atoms[self._atom_by_name[name]]
        except KeyError:
            raise VocabularyError(f"unknown atom: {name}") from None

    def agent(self, name: str) -> Agent:
        try:
            return self.agents[self._agent_by_name[name]]
        except KeyError:
            raise VocabularyError(f"unknown agent: {name}") from None

    def has_atom(self, name: str) -> bool:
        return name in self._atom_by_name

    def has_agent(self, name: str) -> bool:
        return name in self._agent_by_name

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.atoms == other.atoms and self.agents == other.agents

    def __hash__(self) -> int:
        return hash((self.atoms, self.agents))

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.atoms)} atoms, {len(self.agents)} agents)"


# --------------------------------------------------------------------------
# Formula AST


class Formula:
    """Base class; concrete nodes below are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    def __repr__(self) -> str:
        return "Top()"


@dataclass(frozen=True)
class Bottom(Formula):
    def __repr__(self) -> str:
        return "Bottom()"


@dataclass(frozen=True)
class Prop(Formula):
    atom: Atom


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    """Syntactic sugar: equivalent to Not(And(Not(left), Not(right)))."""

    left: Formula
    right: Formula


@dataclass(frozen=True)
class Knows(Formula):
    agent: Agent
    sub: Formula


@dataclass(frozen=True)
class Common(Formula):
    sub: Formula


TOP = Top()
BOTTOM = Bottom()


def and_all(parts: Iterable[Formula]) -> Formula:
    """Right-fold a sequence into a conjunction; empty sequence is Top."""
    items = list(parts)
    if not items:
        return TOP
    result = items[-1]
    for part in reversed(items[:-1]):
        result = And(part, result)
    return result


def desugar(phi: Formula) -> Formula:
    """Rewrite Or nodes into the primitive connectives."""
    if isinstance(phi, (Top, Bottom, Prop)):
        return phi
    if isinstance(phi, Not):
        return Not(desugar(phi.sub))
    if isinstance(phi, And):
        return And(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Or):
        return Not(And(Not(desugar(phi.left)), Not(desugar(phi.right))))
    if isinstance(phi, Knows):
        return Knows(phi.agent, desugar(phi.sub))
    if isinstance(phi, Common):
        return Common(desugar(phi.sub))
    raise TypeError(f"not a formula: {phi!r}")


def atoms_of(phi: Formula) -> frozenset[Atom]:
    """The atoms syntactically occurring in ``phi``."""
    out: set[Atom] = set()
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, Prop):
            out.add(node.atom)
        elif isinstance(node, Not):
            stack.append(node.sub)
        elif isinstance(node, (And, Or)):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, (Knows, Common)):
            stack.append(node.sub)
        elif not isinstance(node, (Top, Bottom)):
            raise TypeError(f"not a formula: {node!r}")
    return frozenset(out)


def agents_of(phi: Formula) -> frozenset[Agent]:
    """The agents syntactically occurring in ``phi``."""
    out: set[Agent] = set()
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, Not):
            stack.append(node.sub)
        elif isinstance(node, (And, Or)):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Knows):
            out.add(node.agent)
            stack.append(node.sub)
        elif isinstance(node, Common):
            stack.append(node.sub)
    return frozenset(out)


def is_propositional(phi: Formula) -> bool:
    """True when ``phi`` contains no knowledge modality."""
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, (Knows, Common)):
            return False
        if isinstance(node, Not):
            stack.append(node.sub)
        elif isinstance(node, (And, Or)):
            stack.append(node.left)
            stack.append(node.right)
    return True


def validate_over(vocab: Vocabulary, phi: Formula) -> None:
    """Check every atom and agent in ``phi`` is the vocabulary's own entry."""
    for atom in atoms_of(phi):
        if atom.index >= len(vocab.atoms) or vocab.atoms[atom.index] != atom:
            raise VocabularyError(f"atom {atom.name} not in vocabulary")
    for agent in agents_of(phi):
        if agent.index >= len(vocab.agents) or vocab.agents[agent.index] != agent:
            raise VocabularyError(f"agent {agent.name} not in vocabulary")


# Rendering uses the concrete syntax also accepted by the DSL parser:
# `!` binds tightest, then `&`, then `|`; K[agent] and C are prefix unary.

_PREC_OR = 1
_PREC_AND = 2
_PREC_UNARY = 3


def render_formula(phi: Formula) -> str:
    return _render(phi, 0)


def _render(phi: Formula, parent_prec: int) -> str:
    if isinstance(phi, Top):
        return "top"
    if isinstance(phi, Bottom):
        return "bot"
    if isinstance(phi, Prop):
        return phi.atom.name
    if isinstance(phi, Not):
        return "!" + _render(phi.sub, _PREC_UNARY)
    if isinstance(phi, Knows):
        return f"K[{phi.agent.name}] " + _render(phi.sub, _PREC_UNARY)
    if isinstance(phi, Common):
        return "C " + _render(phi.sub, _PREC_UNARY)
    if isinstance(phi, And):
        # The parser is left-associative; right-nested children keep parens.
        text = _render(phi.left, _PREC_AND) + " & " + _render(phi.right, _PREC_AND + 1)
        return f"({text})" if parent_prec > _PREC_AND else text
    if isinstance(phi, Or):
        text = _render(phi.left, _PREC_OR) + " | " + _render(phi.right, _PREC_OR + 1)
        return f"({text})" if parent_prec > _PREC_OR else text
    raise TypeError(f"not a formula: {phi!r}")


# --------------------------------------------------------------------------
# Literal conjunctions (preconditions/effects/postconditions)


@dataclass(frozen=True)
class LiteralConjunction:
    """A conjunction of literals; the empty conjunction denotes top."""

    positives: frozenset[Atom] = field(default_factory=frozenset)
    negatives: frozenset[Atom] = field(default_factory=frozenset)

    def __post_init__(self):
        overlap = self.positives & self.negatives
        if overlap:
            names = ", ".join(sorted(a.name for a in overlap))
            raise ConsistencyError(f"contradictory literals: {names}")

    @classmethod
    def of(cls, positives: Iterable[Atom] = (), negatives: Iterable[Atom] = ()) -> "LiteralConjunction":
        return cls(frozenset(positives), frozenset(negatives))

    @classmethod
    def from_formula(cls, phi: Formula) -> "LiteralConjunction":
        """Read a formula of literal-conjunction shape; reject anything else."""
        pos: set[Atom] = set()
        neg: set[Atom] = set()
        stack = [phi]
        while stack:
            node = stack.pop()
            if isinstance(node, Top):
                continue
            if isinstance(node, And):
                stack.append(node.left)
                stack.append(node.right)
            elif isinstance(node, Prop):
                pos.add(node.atom)
            elif isinstance(node, Not) and isinstance(node.sub, Prop):
                neg.add(node.sub.atom)
            else:
                raise ConsistencyError(
                    f"not a conjunction of literals: {render_formula(phi)}"
                )
        return cls(frozenset(pos), frozenset(neg))

    def to_formula(self) -> Formula:
        parts: list[Formula] = [Prop(a) for a in sorted(self.positives, key=lambda a: a.index)]
        parts += [Not(Prop(a)) for a in sorted(self.negatives, key=lambda a: a.index)]
        return and_all(parts)

    @property
    def is_top(self) -> bool:
        return not self.positives and not self.negatives

    def holds_in(self, valuation: frozenset[Atom]) -> bool:
        return self.positives <= valuation and not (self.negatives & valuation)

    def apply_to(self, valuation: frozenset[Atom]) -> frozenset[Atom]:
        """Delete negatives, then add positives."""
        return (valuation - self.negatives) | self.positives

    def literals(self) -> Iterator[tuple[Atom, bool]]:
        for a in sorted(self.positives, key=lambda a: a.index):
            yield a, True
        for a in sorted(self.negatives, key=lambda a: a.index):
            yield a, False

    def render(self) -> str:
        return render_formula(self.to_formula())


EMPTY_CONJUNCTION = LiteralConjunction()


# --------------------------------------------------------------------------
# Truth definition


def eval_world(model, world: int, phi: Formula) -> bool:
    """Truth at a single world of an epistemic model.

    K[i] quantifies over i's successors (relations carry an implicit
    reflexive edge, so the world itself is always included); C quantifies
    over the set reachable from ``world`` under the union of all agents'
    relations.
    """
    if not 0 <= world < len(model.labels):
        raise ModelError(f"unknown world id: {world}")
    validate_over(model.vocab, phi)
    return _eval(model, world, phi)


def _eval(model, w: int, phi: Formula) -> bool:
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bottom):
        return False
    if isinstance(phi, Prop):
        return phi.atom in model.labels[w]
    if isinstance(phi, Not):
        return not _eval(model, w, phi.sub)
    if isinstance(phi, And):
        return _eval(model, w, phi.left) and _eval(model, w, phi.right)
    if isinstance(phi, Or):
        # Sugar for !(!left & !right); evaluated directly.
        return _eval(model, w, phi.left) or _eval(model, w, phi.right)
    if isinstance(phi, Knows):
        return all(_eval(model, v, phi.sub) for v in model.successors(phi.agent, w))
    if isinstance(phi, Common):
        return all(_eval(model, v, phi.sub) for v in model.union_reach(w))
    raise TypeError(f"not a formula: {phi!r}")


def eval_state(state, phi: Formula) -> bool:
    """Truth in an epistemic state: truth at every designated world."""
    model = state.model
    if state.designated:
        validate_over(model.vocab, phi)
    return all(_eval(model, w, phi) for w in sorted(state.designated))
