"""The ``.eplan`` task format: parser with positioned diagnostics, a
canonical serializer, and Graphviz DOT export.

A document declares agents, sorts, objects, atoms (literal or templates
over sorts), STRIPS-style schemas (ground at parse time), explicit action
models, states, a goal, and exactly one task block wiring them together.
`#` starts a line comment; input is UTF-8 and whitespace-insensitive.
Blocks may appear in any order: names are resolved after the whole
document has been read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .actions import EdgeGuard, EpistemicAction, Event
from .classical import ActionSchema, SchemaAtom, SchemaLiterals, ground
from .errors import ConsistencyError, Diagnostic, ModelError, TaskParseError, VocabularyError
from .logic import (
    TOP,
    And,
    Bottom,
    Common,
    Formula,
    Knows,
    LiteralConjunction,
    Not,
    Or,
    Prop,
    Top,
    Vocabulary,
    render_formula,
)
from .models import EpistemicModel, EpistemicState
from .planner import EpistemicTask

BLOCK_KEYWORDS = (
    "agents",
    "sorts",
    "objects",
    "atoms",
    "schema",
    "action",
    "state",
    "goal",
    "task",
)
RESERVED_HEADS = {"top", "bot", "K", "C"}
DEFAULT_GROUND_CAP = 10_000


# --------------------------------------------------------------------------
# Tokens


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "punct" | "eof"
    text: str
    line: int
    col: int


_TWO_CHAR = {"--", "->"}
_ONE_CHAR = set("{}()[],:;&|!")


def _tokenize(text: str, diagnostics: list[Diagnostic]) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            tokens.append(Token("ident", word, line, col))
            col += i - start
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token("punct", two, line, col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR:
            tokens.append(Token("punct", ch, line, col))
            i += 1
            col += 1
            continue
        diagnostics.append(Diagnostic(line, col, f"unexpected character {ch!r}"))
        i += 1
        col += 1
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Abort(Exception):
    """Internal: unwinds to the nearest recovery point."""


class _Stream:
    def __init__(self, tokens: list[Token], diagnostics: list[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = diagnostics

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "eof"

    def eat(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def error(self, message: str, tok: Token | None = None) -> _Abort:
        tok = tok or self.peek()
        self.diagnostics.append(Diagnostic(tok.line, tok.col, message))
        return _Abort()

    def expect(self, text: str) -> Token:
        if self.at(text):
            return self.next()
        raise self.error(f"expected {text!r}, found {self.peek().text!r}")

    def expect_ident(self, what: str = "a name") -> Token:
        tok = self.peek()
        if tok.kind == "ident":
            return self.next()
        raise self.error(f"expected {what}, found {tok.text!r}")

    def skip_to_recovery(self) -> None:
        """Skip tokens until a plausible top-level block start."""
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth = max(0, depth - 1)
                self.next()
                if depth == 0:
                    return
                continue
            elif depth == 0 and tok.kind == "ident" and tok.text in BLOCK_KEYWORDS:
                return
            self.next()


# --------------------------------------------------------------------------
# Raw (unresolved) document pieces


@dataclass
class _RawName:
    text: str
    line: int
    col: int


@dataclass
class _RawEdge:
    agent: _RawName
    source: _RawName
    target: _RawName
    symmetric: bool
    guard_tokens: list[Token] | None  # None when unguarded


@dataclass
class _RawEvent:
    name: _RawName
    pre_tokens: list[Token]
    post_tokens: list[Token]


@dataclass
class _RawAction:
    name: _RawName
    events: list[_RawEvent] = field(default_factory=list)
    edges: list[_RawEdge] = field(default_factory=list)
    designated: list[_RawName] = field(default_factory=list)


@dataclass
class _RawWorld:
    name: _RawName
    atoms: list[_RawName]


@dataclass
class _RawState:
    name: _RawName
    worlds: list[_RawWorld] = field(default_factory=list)
    edges: list[_RawEdge] = field(default_factory=list)
    designated: list[_RawName] = field(default_factory=list)


@dataclass
class _RawSchema:
    name: _RawName
    parameters: list[tuple[str, _RawName]]
    pre: list[tuple[bool, _RawName]]  # (positive?, parameterized atom)
    effect: list[tuple[bool, _RawName]]


@dataclass
class _RawTask:
    line: int
    col: int
    initial: _RawName | None = None
    actions: list[_RawName] = field(default_factory=list)
    owner: _RawName | None = None


@dataclass
class _RawDocument:
    agents: list[_RawName] = field(default_factory=list)
    sorts: list[_RawName] = field(default_factory=list)
    objects: list[tuple[_RawName, list[_RawName]]] = field(default_factory=list)
    atom_decls: list[tuple[_RawName, list[_RawName]]] = field(default_factory=list)
    schemas: list[_RawSchema] = field(default_factory=list)
    actions: list[_RawAction] = field(default_factory=list)
    states: list[_RawState] = field(default_factory=list)
    goals: list[tuple[list[Token], int, int]] = field(default_factory=list)
    tasks: list[_RawTask] = field(default_factory=list)


def _parse_ref(s: _Stream, what: str = "a name") -> _RawName:
    """IDENT optionally followed by a parenthesized identifier list; the
    canonical text joins the pieces without whitespace."""
    head = s.expect_ident(what)
    if not s.at("("):
        return _RawName(head.text, head.line, head.col)
    s.expect("(")
    args = [s.expect_ident("an argument").text]
    while s.eat(","):
        args.append(s.expect_ident("an argument").text)
    s.expect(")")
    return _RawName(f"{head.text}({','.join(args)})", head.line, head.col)


def _parse_name_list(s: _Stream, what: str) -> list[_RawName]:
    names = [_parse_ref(s, what)]
    while s.eat(","):
        names.append(_parse_ref(s, what))
    return names


def _collect_formula_tokens(s: _Stream, stop: tuple[str, ...]) -> list[Token]:
    """Grab the raw tokens of a formula up to a stop punct at paren depth 0."""
    depth = 0
    out: list[Token] = []
    while True:
        tok = s.peek()
        if tok.kind == "eof":
            return out
        if tok.text == "(" or tok.text == "[":
            depth += 1
        elif tok.text == ")" or tok.text == "]":
            if depth == 0:
                return out
            depth -= 1
        elif depth == 0 and tok.text in stop:
            return out
        out.append(s.next())
    return out


def _parse_edge(s: _Stream, allow_guard: bool) -> _RawEdge:
    agent = _parse_ref(s, "an agent name")
    s.expect(":")
    source = _parse_ref(s, "an endpoint")
    if s.eat("--"):
        symmetric = True
    elif s.eat("->"):
        symmetric = False
    else:
        raise s.error("expected '--' or '->'")
    target = _parse_ref(s, "an endpoint")
    guard_tokens = None
    if s.peek().kind == "ident" and s.peek().text == "if":
        if not allow_guard:
            raise s.error("state edges cannot carry guards")
        s.next()
        guard_tokens = _collect_formula_tokens(s, (";", "}"))
    return _RawEdge(agent, source, target, symmetric, guard_tokens)


def _parse_raw(s: _Stream) -> _RawDocument:
    doc = _RawDocument()
    while s.peek().kind != "eof":
        tok = s.peek()
        if tok.kind != "ident" or tok.text not in BLOCK_KEYWORDS:
            s.diagnostics.append(
                Diagnostic(tok.line, tok.col, f"expected a block, found {tok.text!r}")
            )
            s.next()
            s.skip_to_recovery()
            continue
        try:
            _parse_block(s, doc)
        except _Abort:
            s.skip_to_recovery()
    return doc


def _parse_block(s: _Stream, doc: _RawDocument) -> None:
    keyword = s.next().text
    if keyword == "agents":
        s.expect("{")
        if not s.at("}"):
            doc.agents.extend(_parse_name_list(s, "an agent name"))
        s.expect("}")
    elif keyword == "sorts":
        s.expect("{")
        while not s.at("}") and s.peek().kind != "eof":
            doc.sorts.append(_parse_ref(s, "a sort name"))
            if not (s.eat(",") or s.eat(";")):
                break
        s.expect("}")
    elif keyword == "objects":
        s.expect("{")
        while not s.at("}") and s.peek().kind != "eof":
            sort = _parse_ref(s, "a sort name")
            s.expect(":")
            members = _parse_name_list(s, "an object name")
            doc.objects.append((sort, members))
            s.eat(";")
        s.expect("}")
    elif keyword == "atoms":
        s.expect("{")
        while not s.at("}") and s.peek().kind != "eof":
            head = s.expect_ident("an atom name")
            args: list[_RawName] = []
            if s.eat("("):
                args.append(_parse_ref(s, "an argument"))
                while s.eat(","):
                    args.append(_parse_ref(s, "an argument"))
                s.expect(")")
            doc.atom_decls.append((_RawName(head.text, head.line, head.col), args))
            if not (s.eat(",") or s.eat(";")):
                break
        s.expect("}")
    elif keyword == "schema":
        doc.schemas.append(_parse_schema(s))
    elif keyword == "action":
        doc.actions.append(_parse_action(s))
    elif keyword == "state":
        doc.states.append(_parse_state(s))
    elif keyword == "goal":
        tok = s.expect("{")
        tokens = _collect_formula_tokens(s, ("}",))
        s.expect("}")
        doc.goals.append((tokens, tok.line, tok.col))
    elif keyword == "task":
        tok = s.peek()
        raw = _RawTask(tok.line, tok.col)
        s.expect("{")
        while not s.at("}") and s.peek().kind != "eof":
            entry = s.expect_ident("a task entry")
            s.expect(":")
            if entry.text == "initial":
                raw.initial = _parse_ref(s, "a state name")
            elif entry.text == "actions":
                raw.actions.extend(_parse_name_list(s, "an action name"))
            elif entry.text == "owner":
                raw.owner = _parse_ref(s, "an agent name")
            else:
                raise s.error(f"unknown task entry {entry.text!r}", entry)
            s.eat(";")
        s.expect("}")
        doc.tasks.append(raw)


def _parse_schema(s: _Stream) -> _RawSchema:
    name = s.expect_ident("a schema name")
    params: list[tuple[str, _RawName]] = []
    s.expect("(")
    if not s.at(")"):
        while True:
            var = s.expect_ident("a parameter name")
            s.expect(":")
            sort = _parse_ref(s, "a sort name")
            params.append((var.text, sort))
            if not s.eat(","):
                break
    s.expect(")")
    s.expect("{")
    pre: list[tuple[bool, _RawName]] = []
    effect: list[tuple[bool, _RawName]] = []
    while not s.at("}") and s.peek().kind != "eof":
        entry = s.expect_ident("'pre' or 'effect'")
        s.expect(":")
        target = pre if entry.text == "pre" else effect
        if entry.text not in ("pre", "effect"):
            raise s.error(f"unknown schema entry {entry.text!r}", entry)
        _parse_schema_literals(s, target)
        s.eat(";")
    s.expect("}")
    return _RawSchema(_RawName(name.text, name.line, name.col), params, pre, effect)


def _parse_schema_literals(s: _Stream, out: list[tuple[bool, _RawName]]) -> None:
    if s.peek().text == "top":
        s.next()
        return
    while True:
        positive = not s.eat("!")
        out.append((positive, _parse_ref(s, "an atom")))
        if not s.eat("&"):
            return


def _parse_action(s: _Stream) -> _RawAction:
    name = _parse_ref(s, "an action name")
    action = _RawAction(name)
    s.expect("{")
    while not s.at("}") and s.peek().kind != "eof":
        entry = s.expect_ident("an action entry")
        if entry.text == "event":
            ev_name = _parse_ref(s, "an event name")
            s.expect("{")
            pre_tokens: list[Token] = []
            post_tokens: list[Token] = []
            while not s.at("}") and s.peek().kind != "eof":
                part = s.expect_ident("'pre' or 'post'")
                s.expect(":")
                tokens = _collect_formula_tokens(s, (";", "}"))
                if part.text == "pre":
                    pre_tokens = tokens
                elif part.text == "post":
                    post_tokens = tokens
                else:
                    raise s.error(f"unknown event entry {part.text!r}", part)
                s.eat(";")
            s.expect("}")
            action.events.append(_RawEvent(ev_name, pre_tokens, post_tokens))
        elif entry.text == "edge":
            action.edges.append(_parse_edge(s, allow_guard=True))
            s.eat(";")
        elif entry.text == "designated":
            action.designated.extend(_parse_name_list(s, "an event name"))
            s.eat(";")
        else:
            raise s.error(f"unknown action entry {entry.text!r}", entry)
    s.expect("}")
    return action


def _parse_state(s: _Stream) -> _RawState:
    name = _parse_ref(s, "a state name")
    state = _RawState(name)
    s.expect("{")
    while not s.at("}") and s.peek().kind != "eof":
        entry = s.expect_ident("a state entry")
        if entry.text == "world":
            w_name = _parse_ref(s, "a world name")
            s.expect("{")
            atoms: list[_RawName] = []
            if not s.at("}"):
                atoms.extend(_parse_name_list(s, "an atom"))
            s.expect("}")
            state.worlds.append(_RawWorld(w_name, atoms))
        elif entry.text == "edge":
            state.edges.append(_parse_edge(s, allow_guard=False))
            s.eat(";")
        elif entry.text == "designated":
            state.designated.extend(_parse_name_list(s, "a world name"))
            s.eat(";")
        else:
            raise s.error(f"unknown state entry {entry.text!r}", entry)
    s.expect("}")
    return state


# --------------------------------------------------------------------------
# Formula parsing (token list -> Formula over a vocabulary)


class _FormulaParser:
    def __init__(self, tokens: list[Token], vocab: Vocabulary, diagnostics: list[Diagnostic]):
        end = tokens[-1] if tokens else Token("eof", "", 1, 1)
        self.stream = _Stream(tokens + [Token("eof", "", end.line, end.col)], diagnostics)
        self.vocab = vocab

    def parse(self) -> Formula:
        s = self.stream
        if s.peek().kind == "eof":
            raise s.error("expected a formula")
        phi = self._or()
        if s.peek().kind != "eof":
            raise s.error(f"unexpected {s.peek().text!r} after formula")
        return phi

    def _or(self) -> Formula:
        phi = self._and()
        while self.stream.eat("|"):
            phi = Or(phi, self._and())
        return phi

    def _and(self) -> Formula:
        phi = self._unary()
        while self.stream.eat("&"):
            phi = And(phi, self._unary())
        return phi

    def _unary(self) -> Formula:
        s = self.stream
        tok = s.peek()
        if s.eat("!"):
            return Not(self._unary())
        if tok.kind == "ident" and tok.text == "K":
            s.next()
            s.expect("[")
            agent_tok = s.expect_ident("an agent name")
            s.expect("]")
            if not self.vocab.has_agent(agent_tok.text):
                raise s.error(f"unknown agent: {agent_tok.text}", agent_tok)
            return Knows(self.vocab.agent(agent_tok.text), self._unary())
        if tok.kind == "ident" and tok.text == "C":
            s.next()
            return Common(self._unary())
        if tok.kind == "ident" and tok.text == "top":
            s.next()
            return Top()
        if tok.kind == "ident" and tok.text == "bot":
            s.next()
            return Bottom()
        if s.eat("("):
            phi = self._or()
            s.expect(")")
            return phi
        if tok.kind == "ident":
            ref = _parse_ref(s, "an atom")
            if not self.vocab.has_atom(ref.text):
                raise s.error(f"unknown atom: {ref.text}", tok)
            return Prop(self.vocab.atom(ref.text))
        raise s.error(f"expected a formula, found {tok.text!r}")


def parse_formula(text: str, vocab: Vocabulary) -> Formula:
    """Parse a standalone formula in the task syntax; raises TaskParseError."""
    diagnostics: list[Diagnostic] = []
    tokens = _tokenize(text, diagnostics)
    if diagnostics:
        raise TaskParseError(diagnostics)
    try:
        phi = _FormulaParser(tokens[:-1], vocab, diagnostics).parse()
    except _Abort:
        raise TaskParseError(diagnostics) from None
    if diagnostics:
        raise TaskParseError(diagnostics)
    return phi


# --------------------------------------------------------------------------
# Resolution


@dataclass
class ParsedDocument:
    """A fully resolved document: the task, named states, and a source map
    from declared entity names (namespaced) to (line, column)."""

    task: EpistemicTask
    states: dict[str, EpistemicState]
    source_map: dict[str, tuple[int, int]]


def parse_task(
    text: str | bytes, max_ground_actions: int = DEFAULT_GROUND_CAP
) -> ParsedDocument:
    """Parse and resolve a task document; no partial tasks come back.

    Raises :class:`TaskParseError` with positioned diagnostics for lexical,
    syntactic, resolution, and semantic problems.
    """
    diagnostics: list[Diagnostic] = []
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TaskParseError(
                [Diagnostic(1, 1, f"input is not valid UTF-8: {exc.reason}")]
            ) from None
    tokens = _tokenize(text, diagnostics)
    stream = _Stream(tokens, diagnostics)
    doc = _parse_raw(stream)

    resolver = _Resolver(doc, diagnostics, max_ground_actions)
    parsed = resolver.resolve()
    if diagnostics or parsed is None:
        raise TaskParseError(diagnostics or [Diagnostic(1, 1, "unresolved document")])
    return parsed


class _Resolver:
    def __init__(self, doc: _RawDocument, diagnostics: list[Diagnostic], ground_cap: int):
        self.doc = doc
        self.diagnostics = diagnostics
        self.ground_cap = ground_cap
        self.source_map: dict[str, tuple[int, int]] = {}

    def note(self, name: _RawName, message: str) -> None:
        self.diagnostics.append(Diagnostic(name.line, name.col, message))

    def record(self, namespace: str, name: _RawName) -> None:
        self.source_map.setdefault(f"{namespace}:{name.text}", (name.line, name.col))

    def resolve(self) -> ParsedDocument | None:
        doc = self.doc
        vocab = self._build_vocab()
        if vocab is None:
            return None
        self.vocab_ref = vocab
        schema_groups = self._ground_schemas(vocab)
        explicit = self._build_actions(vocab)
        states = self._build_states(vocab)
        goal = self._build_goal(vocab)

        if not doc.tasks:
            self.diagnostics.append(Diagnostic(1, 1, "missing task block"))
            return None
        if len(doc.tasks) > 1:
            extra = doc.tasks[1]
            self.diagnostics.append(
                Diagnostic(extra.line, extra.col, "more than one task block")
            )
            return None
        raw = doc.tasks[0]
        if self.diagnostics:
            return None

        actions: list[EpistemicAction] = []
        for name in raw.actions:
            if name.text in explicit:
                actions.append(explicit[name.text])
            elif name.text in schema_groups:
                actions.extend(schema_groups[name.text])
            else:
                instance = self._find_instance(schema_groups, name.text)
                if instance is None:
                    self.note(name, f"unknown action: {name.text}")
                else:
                    actions.append(instance)
        if raw.initial is None:
            self.diagnostics.append(Diagnostic(raw.line, raw.col, "task has no initial state"))
        initial = states.get(raw.initial.text) if raw.initial else None
        if raw.initial and initial is None:
            self.note(raw.initial, f"unknown state: {raw.initial.text}")
        owner = None
        if raw.owner is not None:
            if vocab.has_agent(raw.owner.text):
                owner = vocab.agent(raw.owner.text)
            else:
                self.note(raw.owner, f"unknown agent: {raw.owner.text}")
        if goal is None:
            self.diagnostics.append(Diagnostic(raw.line, raw.col, "missing goal block"))
        if self.diagnostics or initial is None or goal is None:
            return None
        try:
            task = EpistemicTask(vocab, actions, initial, goal, owner)
        except (ModelError, VocabularyError) as exc:
            self.diagnostics.append(Diagnostic(raw.line, raw.col, str(exc)))
            return None
        return ParsedDocument(task, states, self.source_map)

    # -- phase 1: vocabulary ------------------------------------------------

    def _build_vocab(self) -> Vocabulary | None:
        doc = self.doc
        agent_names: list[str] = []
        for name in doc.agents:
            if name.text in agent_names:
                self.note(name, f"duplicate agent: {name.text}")
            else:
                agent_names.append(name.text)
                self.record("agent", name)

        sort_members: dict[str, list[str]] = {}
        declared_sorts = {s.text for s in doc.sorts}
        for sort, _ in doc.objects:
            declared_sorts.add(sort.text)
        for sort, members in doc.objects:
            bucket = sort_members.setdefault(sort.text, [])
            for member in members:
                if member.text in bucket:
                    self.note(member, f"duplicate object {member.text} in sort {sort.text}")
                else:
                    bucket.append(member.text)
                    self.record("object", member)
        self.sorts = {name: tuple(vals) for name, vals in sort_members.items()}
        for sort in doc.sorts:
            self.sorts.setdefault(sort.text, ())

        atom_names: list[str] = []
        seen: set[str] = set()

        def declare(name: str, where: _RawName) -> None:
            if name in seen:
                self.note(where, f"duplicate atom: {name}")
                return
            seen.add(name)
            atom_names.append(name)

        for head, args in doc.atom_decls:
            if head.text in RESERVED_HEADS:
                self.note(head, f"{head.text!r} is reserved and cannot name an atom")
                continue
            self.record("atom", head)
            if not args:
                declare(head.text, head)
                continue
            domains: list[list[str]] = []
            for arg in args:
                if arg.text in self.sorts:
                    members = list(self.sorts[arg.text])
                    if not members:
                        self.note(arg, f"sort {arg.text} has no objects")
                        members = []
                    domains.append(members)
                else:
                    domains.append([arg.text])  # a constant, used literally
            combos = [[]]
            for domain in domains:
                combos = [prefix + [value] for prefix in combos for value in domain]
            for combo in combos:
                declare(f"{head.text}({','.join(combo)})", head)

        if self.diagnostics:
            return None
        try:
            return Vocabulary(atom_names, agent_names)
        except VocabularyError as exc:  # pragma: no cover - guarded above
            self.diagnostics.append(Diagnostic(1, 1, str(exc)))
            return None

    # -- phase 2: schemas ---------------------------------------------------

    def _ground_schemas(self, vocab: Vocabulary) -> dict[str, list[EpistemicAction]]:
        from .actions import induced_action

        groups: dict[str, list[EpistemicAction]] = {}
        total = 0
        for raw in self.doc.schemas:
            self.record("schema", raw.name)
            params = []
            count = 1
            bad = False
            for var, sort in raw.parameters:
                if sort.text not in self.sorts or not self.sorts[sort.text]:
                    self.note(sort, f"unknown or empty sort: {sort.text}")
                    bad = True
                    continue
                params.append((var, sort.text))
                count *= len(self.sorts[sort.text])
            if bad:
                continue
            total += count
            if total > self.ground_cap:
                self.note(
                    raw.name,
                    f"grounding exceeds the cap of {self.ground_cap} actions;"
                    " split the task or raise the cap",
                )
                return groups
            schema = ActionSchema(
                raw.name.text,
                params,
                self._schema_literals(raw.pre),
                self._schema_literals(raw.effect),
            )
            try:
                ground_actions = ground([schema], self.sorts, vocab)
            except (ModelError, VocabularyError, ConsistencyError) as exc:
                self.note(raw.name, f"schema {raw.name.text}: {exc}")
                continue
            groups[raw.name.text] = [
                induced_action(ga.name, vocab, ga.pre, ga.post) for ga in ground_actions
            ]
        return groups

    @staticmethod
    def _schema_literals(items: list[tuple[bool, _RawName]]) -> SchemaLiterals:
        pos: list[SchemaAtom] = []
        neg: list[SchemaAtom] = []
        for positive, ref in items:
            if "(" in ref.text:
                head, rest = ref.text.split("(", 1)
                args = rest.rstrip(")").split(",")
            else:
                head, args = ref.text, []
            (pos if positive else neg).append(SchemaAtom(head, args))
        return SchemaLiterals(pos, neg)

    @staticmethod
    def _find_instance(
        groups: dict[str, list[EpistemicAction]], name: str
    ) -> EpistemicAction | None:
        for instances in groups.values():
            for action in instances:
                if action.name == name:
                    return action
        return None

    # -- phase 3: explicit action models ------------------------------------

    def _build_actions(self, vocab: Vocabulary) -> dict[str, EpistemicAction]:
        out: dict[str, EpistemicAction] = {}
        for raw in self.doc.actions:
            self.record("action", raw.name)
            if raw.name.text in out:
                self.note(raw.name, f"duplicate action: {raw.name.text}")
                continue
            events: list[Event] = []
            index: dict[str, int] = {}
            ok = True
            for rev in raw.events:
                self.record(f"event {raw.name.text}", rev.name)
                if rev.name.text in index:
                    self.note(rev.name, f"duplicate event: {rev.name.text}")
                    ok = False
                    continue
                pre = self._formula(rev.pre_tokens, rev.name) if rev.pre_tokens else TOP
                post_formula = (
                    self._formula(rev.post_tokens, rev.name) if rev.post_tokens else TOP
                )
                if pre is None or post_formula is None:
                    ok = False
                    continue
                try:
                    post = LiteralConjunction.from_formula(post_formula)
                except ConsistencyError as exc:
                    self.note(rev.name, f"inconsistent postcondition: {exc}")
                    ok = False
                    continue
                index[rev.name.text] = len(events)
                events.append(Event(rev.name.text, pre, post))
            designated = self._resolve_names(raw.designated, index, "event")
            edges: list[EdgeGuard] = []
            for redge in raw.edges:
                resolved = self._resolve_edge(redge, index, vocab, "event")
                if resolved is None:
                    ok = False
                else:
                    edges.extend(resolved)
            if not raw.designated:
                self.note(raw.name, f"action {raw.name.text}: empty designated set")
                ok = False
            if not ok or designated is None:
                continue
            try:
                out[raw.name.text] = EpistemicAction(
                    raw.name.text, vocab, events, designated, edges
                )
            except (ModelError, VocabularyError) as exc:
                self.note(raw.name, str(exc))
        return out

    def _resolve_names(
        self, names: list[_RawName], index: dict[str, int], what: str
    ) -> list[int] | None:
        out = []
        ok = True
        for name in names:
            if name.text not in index:
                self.note(name, f"unknown {what}: {name.text}")
                ok = False
            else:
                out.append(index[name.text])
        return out if ok else None

    def _resolve_edge(
        self, redge: _RawEdge, index: dict[str, int], vocab: Vocabulary, what: str
    ):
        if not vocab.has_agent(redge.agent.text):
            self.note(redge.agent, f"unknown agent: {redge.agent.text}")
            return None
        agent = vocab.agent(redge.agent.text)
        if redge.source.text not in index:
            self.note(redge.source, f"unknown {what}: {redge.source.text}")
            return None
        if redge.target.text not in index:
            self.note(redge.target, f"unknown {what}: {redge.target.text}")
            return None
        guard = TOP
        if redge.guard_tokens is not None:
            parsed = self._formula(redge.guard_tokens, redge.agent)
            if parsed is None:
                return None
            guard = parsed
        src, tgt = index[redge.source.text], index[redge.target.text]
        if redge.symmetric:
            return [EdgeGuard(agent, src, tgt, guard), EdgeGuard(agent, tgt, src, guard)]
        return [EdgeGuard(agent, src, tgt, guard)]

    def _formula(self, tokens: list[Token], where: _RawName) -> Formula | None:
        if not tokens:
            self.note(where, "expected a formula")
            return None
        try:
            return _FormulaParser(tokens, self.vocab_ref, self.diagnostics).parse()
        except _Abort:
            return None

    # -- phase 4: states ----------------------------------------------------

    def _build_states(self, vocab: Vocabulary) -> dict[str, EpistemicState]:
        out: dict[str, EpistemicState] = {}
        for raw in self.doc.states:
            self.record("state", raw.name)
            if raw.name.text in out:
                self.note(raw.name, f"duplicate state: {raw.name.text}")
                continue
            names: list[str] = []
            labels: list[list] = []
            index: dict[str, int] = {}
            ok = True
            for world in raw.worlds:
                self.record(f"world {raw.name.text}", world.name)
                if world.name.text in index:
                    self.note(world.name, f"duplicate world: {world.name.text}")
                    ok = False
                    continue
                atoms = []
                for ref in world.atoms:
                    if not vocab.has_atom(ref.text):
                        self.note(ref, f"unknown atom: {ref.text}")
                        ok = False
                    else:
                        atoms.append(vocab.atom(ref.text))
                index[world.name.text] = len(names)
                names.append(world.name.text)
                labels.append(atoms)
            edges: dict = {}
            for redge in raw.edges:
                resolved = self._resolve_edge(redge, index, vocab, "world")
                if resolved is None:
                    ok = False
                    continue
                for guard_edge in resolved:
                    edges.setdefault(guard_edge.agent, []).append(
                        (guard_edge.source, guard_edge.target)
                    )
            designated = self._resolve_names(raw.designated, index, "world")
            if not raw.designated:
                self.note(raw.name, f"state {raw.name.text}: empty designated set")
                ok = False
            if not ok or designated is None:
                continue
            try:
                model = EpistemicModel(vocab, names, labels, edges)
                out[raw.name.text] = EpistemicState(model, designated)
            except (ModelError, VocabularyError) as exc:
                self.note(raw.name, str(exc))
        return out

    # -- phase 5: goal ------------------------------------------------------

    def _build_goal(self, vocab: Vocabulary) -> Formula | None:
        if not self.doc.goals:
            return None
        if len(self.doc.goals) > 1:
            _, line, col = self.doc.goals[1]
            self.diagnostics.append(Diagnostic(line, col, "more than one goal block"))
            return None
        tokens, line, col = self.doc.goals[0]
        return self._formula(tokens, _RawName("goal", line, col))


# --------------------------------------------------------------------------
# Serialization


def render_post(post: LiteralConjunction) -> str:
    return "top" if post.is_top else render_formula(post.to_formula())


def serialize_task(task: EpistemicTask, initial_name: str = "s0") -> str:
    """Canonical document text; parsing it back yields a structurally equal
    task (schemas are emitted as their ground actions)."""
    lines: list[str] = []
    agents = ", ".join(a.name for a in task.vocab.agents)
    lines.append(f"agents {{ {agents} }}")
    lines.append("")
    lines.append("atoms {")
    for atom in task.vocab.atoms:
        lines.append(f"  {atom.name};")
    lines.append("}")
    lines.append("")
    lines.extend(_serialize_state(task.initial, initial_name))
    for action in task.actions:
        lines.append("")
        lines.extend(_serialize_action(action))
    lines.append("")
    lines.append(f"goal {{ {render_formula(task.goal)} }}")
    lines.append("")
    lines.append("task {")
    lines.append(f"  initial: {initial_name};")
    names = ", ".join(a.name for a in task.actions)
    lines.append(f"  actions: {names};")
    if task.owner is not None:
        lines.append(f"  owner: {task.owner.name};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _merge_symmetric(pairs: Iterable[tuple[int, int]]):
    """Classify explicit directed pairs into symmetric and one-way lists."""
    pairs = set(pairs)
    symmetric = sorted((u, v) for (u, v) in pairs if u < v and (v, u) in pairs)
    one_way = sorted((u, v) for (u, v) in pairs if (v, u) not in pairs)
    return symmetric, one_way


def _serialize_state(state: EpistemicState, name: str) -> list[str]:
    model = state.model
    lines = [f"state {name} {{"]
    for w in range(model.n):
        atoms = ", ".join(a.name for a in sorted(model.labels[w], key=lambda a: a.index))
        body = f" {atoms} " if atoms else " "
        lines.append(f"  world {model.world_names[w]} {{{body}}}")
    for agent in model.vocab.agents:
        symmetric, one_way = _merge_symmetric(model.edges[agent])
        for (u, v) in symmetric:
            lines.append(
                f"  edge {agent.name}: {model.world_names[u]} -- {model.world_names[v]};"
            )
        for (u, v) in one_way:
            lines.append(
                f"  edge {agent.name}: {model.world_names[u]} -> {model.world_names[v]};"
            )
    designated = ", ".join(model.world_names[w] for w in sorted(state.designated))
    lines.append(f"  designated {designated};")
    lines.append("}")
    return lines


def _serialize_action(action: EpistemicAction) -> list[str]:
    lines = [f"action {action.name} {{"]
    for event in action.events:
        lines.append(f"  event {event.name} {{")
        lines.append(f"    pre: {render_formula(event.pre)};")
        lines.append(f"    post: {render_post(event.post)};")
        lines.append("  }")
    by_agent: dict = {}
    for g in action.edges:
        by_agent.setdefault(g.agent, []).append(g)
    for agent in action.vocab.agents:
        guards = by_agent.get(agent, [])
        table = {(g.source, g.target): g.condition for g in guards}
        symmetric, one_way = _merge_symmetric(table.keys())
        merged_symmetric = []
        for (u, v) in symmetric:
            if table[(u, v)] == table[(v, u)]:
                merged_symmetric.append((u, v))
            else:
                one_way.extend([(u, v), (v, u)])
        one_way.sort()
        for (u, v) in merged_symmetric:
            lines.append(_edge_line(action, agent, u, v, "--", table[(u, v)]))
        for (u, v) in one_way:
            lines.append(_edge_line(action, agent, u, v, "->", table[(u, v)]))
    designated = ", ".join(
        action.events[e].name for e in sorted(action.designated)
    )
    lines.append(f"  designated {designated};")
    lines.append("}")
    return lines


def _edge_line(action, agent, u, v, arrow, guard) -> str:
    src = action.events[u].name
    tgt = action.events[v].name
    line = f"  edge {agent.name}: {src} {arrow} {tgt}"
    if not isinstance(guard, Top):
        line += f" if {render_formula(guard)}"
    return line + ";"


# --------------------------------------------------------------------------
# Text rendering (CLI and policy summaries)


def render_state(state: EpistemicState) -> str:
    """Multi-line listing of worlds, labels, edges, and designation."""
    model = state.model
    lines = []
    for w in range(model.n):
        mark = " [designated]" if w in state.designated else ""
        atoms = ", ".join(a.name for a in sorted(model.labels[w], key=lambda a: a.index))
        lines.append(f"world {model.world_names[w]}{mark}: {atoms}")
    for agent in model.vocab.agents:
        symmetric, one_way = _merge_symmetric(model.edges[agent])
        for (u, v) in symmetric:
            lines.append(
                f"edge {agent.name}: {model.world_names[u]} -- {model.world_names[v]}"
            )
        for (u, v) in one_way:
            lines.append(
                f"edge {agent.name}: {model.world_names[u]} -> {model.world_names[v]}"
            )
    return "\n".join(lines)


def render_state_line(state: EpistemicState) -> str:
    """One-line summary used in policy listings."""
    model = state.model
    parts = []
    for w in range(model.n):
        mark = "*" if w in state.designated else ""
        atoms = ",".join(a.name for a in sorted(model.labels[w], key=lambda a: a.index))
        parts.append(f"{model.world_names[w]}{mark}[{atoms}]")
    edge_bits = []
    for agent in model.vocab.agents:
        symmetric, one_way = _merge_symmetric(model.edges[agent])
        for (u, v) in symmetric:
            edge_bits.append(f"{agent.name}:{model.world_names[u]}--{model.world_names[v]}")
        for (u, v) in one_way:
            edge_bits.append(f"{agent.name}:{model.world_names[u]}->{model.world_names[v]}")
    text = " ".join(parts)
    if edge_bits:
        text += " | " + " ".join(edge_bits)
    return text


# --------------------------------------------------------------------------
# DOT export


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(value: EpistemicState | EpistemicAction) -> str:
    """Graphviz rendering: designated nodes double-circled, reflexive edges
    suppressed, symmetric edges drawn once without direction, guards shown
    on edge labels; node order follows the index order."""
    if isinstance(value, EpistemicState):
        return _dot_state(value)
    if isinstance(value, EpistemicAction):
        return _dot_action(value)
    raise TypeError("export_dot expects a state or an action")


def _dot_state(state: EpistemicState) -> str:
    model = state.model
    lines = ["digraph state {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    for w in range(model.n):
        atoms = ", ".join(a.name for a in sorted(model.labels[w], key=lambda a: a.index))
        label = model.world_names[w] + ("\\n" + _dot_escape(atoms) if atoms else "")
        extra = ", peripheries=2" if w in state.designated else ""
        lines.append(f'  n{w} [label="{label}"{extra}];')
    for agent in model.vocab.agents:
        symmetric, one_way = _merge_symmetric(model.edges[agent])
        for (u, v) in symmetric:
            lines.append(f'  n{u} -> n{v} [label="{_dot_escape(agent.name)}", dir=none];')
        for (u, v) in one_way:
            lines.append(f'  n{u} -> n{v} [label="{_dot_escape(agent.name)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_action(action: EpistemicAction) -> str:
    lines = ["digraph action {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    for i, event in enumerate(action.events):
        pair = f"⟨{render_formula(event.pre)}, {render_post(event.post)}⟩"
        caption = _dot_escape(event.name) + "\\n" + _dot_escape(pair)
        extra = ", peripheries=2" if i in action.designated else ""
        lines.append(f'  n{i} [label="{caption}"{extra}];')
    by_agent: dict = {}
    for g in action.edges:
        by_agent.setdefault(g.agent, {})[(g.source, g.target)] = g.condition
    for agent in action.vocab.agents:
        table = by_agent.get(agent, {})
        symmetric, one_way = _merge_symmetric(table.keys())
        merged = []
        for (u, v) in symmetric:
            if table[(u, v)] == table[(v, u)]:
                merged.append((u, v))
            else:
                one_way.extend([(u, v), (v, u)])
        one_way.sort()
        for (u, v) in merged:
            lines.append(f'  n{u} -> n{v} [label="{_dot_label(agent, table[(u, v)])}", dir=none];')
        for (u, v) in one_way:
            lines.append(f'  n{u} -> n{v} [label="{_dot_label(agent, table[(u, v)])}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_label(agent, guard) -> str:
    if isinstance(guard, Top):
        return _dot_escape(agent.name)
    return _dot_escape(f"{agent.name}: {render_formula(guard)}")
