"""Task-document parsing, diagnostics, serialization, and DOT export."""

import random

import pytest

from conftest import GOLDEN_DIR, TASK_FILES, load_doc
from eplan import (
    TaskParseError,
    Top,
    export_dot,
    parse_task,
    serialize_task,
)
from eplan.dsl import parse_formula, render_state, render_state_line


MINIMAL = """
agents { A }
atoms { p }
action skip {
  event e { pre: top; post: top; }
  designated e;
}
state s0 {
  world w { p }
  designated w;
}
goal { p }
task { initial: s0; actions: skip; }
"""


class TestParse:
    def test_two_post_offices_document(self, po2):
        assert po2.initial.model.n == 2
        assert po2.owner.name == "Father"
        assert len(po2.actions) == 12  # 9 Go + 2 TryPickUp + 1 Wrap
        assert [a.name for a in po2.actions[:3]] == [
            "Go(Father,Home,Home)",
            "Go(Father,Home,PostOffice1)",
            "Go(Father,Home,PostOffice2)",
        ]

    def test_source_map_positions(self):
        doc = load_doc("two_post_offices")
        line, col = doc.source_map["state:s0"]
        assert line > 1 and col >= 1
        assert "action:TryPickUp(Father,Present,PostOffice1)" in doc.source_map

    def test_minimal_document(self):
        doc = parse_task(MINIMAL)
        assert doc.task.initial.model.n == 1
        assert len(doc.task.actions) == 1

    def test_empty_document_reports_missing_task(self):
        with pytest.raises(TaskParseError) as exc:
            parse_task("")
        assert any("missing task block" in str(d) for d in exc.value.diagnostics)

    def test_inconsistent_postcondition_reported(self):
        bad = MINIMAL.replace("post: top;", "post: p & !p;")
        with pytest.raises(TaskParseError) as exc:
            parse_task(bad)
        assert any("inconsistent postcondition" in str(d) for d in exc.value.diagnostics)

    def test_unknown_atom_reported_with_position(self):
        bad = MINIMAL.replace("world w { p }", "world w { q }")
        with pytest.raises(TaskParseError) as exc:
            parse_task(bad)
        diag = next(d for d in exc.value.diagnostics if "unknown atom: q" in d.message)
        assert diag.line > 1

    def test_empty_designated_set_reported(self):
        bad = MINIMAL.replace("designated w;", "")
        with pytest.raises(TaskParseError) as exc:
            parse_task(bad)
        assert any("empty designated set" in str(d) for d in exc.value.diagnostics)

    def test_duplicate_task_block_rejected(self):
        bad = MINIMAL + "\ntask { initial: s0; actions: skip; }\n"
        with pytest.raises(TaskParseError) as exc:
            parse_task(bad)
        assert any("more than one task" in str(d) for d in exc.value.diagnostics)

    def test_reserved_atom_heads_rejected(self):
        bad = MINIMAL.replace("atoms { p }", "atoms { p; C }")
        with pytest.raises(TaskParseError):
            parse_task(bad)

    def test_grounding_cap(self):
        text = """
agents { A }
sorts { thing }
objects { thing: a, b, c, d, e, f, g, h, i, j; }
atoms { P(thing, thing) }
schema Link(x: thing, y: thing) {
  pre: top;
  effect: P(x, y);
}
state s0 { world w { } designated w; }
goal { top }
task { initial: s0; actions: Link; }
"""
        with pytest.raises(TaskParseError) as exc:
            parse_task(text, max_ground_actions=50)
        assert any("cap" in str(d) for d in exc.value.diagnostics)

    def test_invalid_utf8_is_a_diagnostic(self):
        with pytest.raises(TaskParseError):
            parse_task(b"\xff\xfe agents")

    def test_atom_names_are_whitespace_insensitive(self):
        spaced = MINIMAL.replace("atoms { p }", "atoms { At( X , Y ) }").replace(
            "world w { p }", "world w { At(X,Y) }"
        ).replace("goal { p }", "goal { At (X, Y) }")
        doc = parse_task(spaced)
        assert doc.task.vocab.atoms[0].name == "At(X,Y)"

    def test_extra_state_blocks_are_kept(self):
        text = MINIMAL + "\nstate other { world v { } designated v; }\n"
        doc = parse_task(text)
        assert "other" in doc.states
        assert doc.states["other"].model.n == 1

    def test_parser_never_crashes_on_noise(self):
        rng = random.Random(67)
        fragments = [
            "agents", "{", "}", "(", ")", ";", ",", "K[", "task", "state",
            "world", "p", "!", "&", "|", "edge", "->", "--", "goal", "¤", "#x",
        ]
        for _ in range(500):
            if rng.random() < 0.5:
                text = " ".join(rng.choice(fragments) for _ in range(rng.randint(0, 40)))
                data = text.encode()
            else:
                data = bytes(rng.randrange(256) for _ in range(rng.randint(0, 160)))
            try:
                parse_task(data)
            except TaskParseError:
                pass  # diagnostics are the contract


class TestRoundTrip:
    @pytest.mark.parametrize("name", TASK_FILES)
    def test_corpus_round_trips(self, name):
        task = load_doc(name).task
        text = serialize_task(task)
        again = parse_task(text).task
        assert again == task

    def test_serialization_is_stable(self):
        task = load_doc("wrap_copresence").task
        once = serialize_task(task)
        assert serialize_task(parse_task(once).task) == once

    def test_minimal_document_golden(self):
        text = serialize_task(parse_task(MINIMAL).task)
        assert text == (GOLDEN_DIR / "minimal.eplan").read_text()

    def test_guards_survive_round_trip(self, wrap_copresence):
        wrap = wrap_copresence.action_named("Wrap(Father,Present,PostOffice)")
        text = serialize_task(wrap_copresence)
        again = parse_task(text).task.action_named("Wrap(Father,Present,PostOffice)")
        assert again == wrap
        guards = [g for g in again.edges if not isinstance(g.condition, Top)]
        assert len(guards) == 2

    def test_formula_round_trip_through_text(self, po2):
        for phi in (po2.goal,):
            from eplan import render_formula

            assert parse_formula(render_formula(phi), po2.vocab) == phi


class TestDot:
    @pytest.mark.parametrize(
        "golden, kind, name",
        [
            ("s0_father.dot", "state", "two_post_offices"),
            ("one_world.dot", "state", "birthday_single"),
            ("private_ask.dot", "action", "ask_private"),
        ],
    )
    def test_golden_files(self, golden, kind, name):
        doc = load_doc(name)
        if kind == "state":
            text = export_dot(doc.task.initial)
        else:
            text = export_dot(doc.task.action_named("AskWhetherPO1"))
        assert text == (GOLDEN_DIR / golden).read_text()

    def test_designated_worlds_double_circled(self, po2):
        text = export_dot(po2.initial)
        assert text.count("peripheries=2") == 2
        assert text.count('label="Father"') == 1  # merged symmetric edge

    def test_private_ask_shape(self, ask_private):
        text = export_dot(ask_private.action_named("AskWhetherPO1"))
        assert text.count("peripheries=2") == 3
        assert text.count("Employee2") == 3
        assert "dir=none" not in text

    def test_stable_across_runs(self, po2):
        assert export_dot(po2.initial) == export_dot(po2.initial)


class TestRenderers:
    def test_render_state_lists_worlds_and_edges(self, po2):
        text = render_state(po2.initial)
        assert "world w1 [designated]: At(Father,Home), At(Present,PostOffice1)" in text
        assert "edge Father: w1 -- w2" in text

    def test_render_state_line_compact(self, po2):
        line = render_state_line(po2.initial)
        assert line.startswith("w1*[")
        assert "| Father:w1--w2" in line
