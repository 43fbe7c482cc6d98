import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_chromatic, brute_proper_colorings
from vlmdiag.errors import ParseError, PerceptionParseError
from vlmdiag.evaluator import (
    ColoringAnswer,
    GridAnswer,
    MetricRecord,
    acc_gc,
    acc_sudoku,
    parse_answer,
    parse_output,
    parse_perception,
    perception_accuracy,
    score,
)
from vlmdiag.taskgen import EdgeList, GivensGrid, GraphInstance, TaskKind, gen_graph, gen_sudoku, make_task

K3 = EdgeList([(0, 1), (0, 2), (1, 2)])


def _raw(perception, answer, think="t"):
    return f"<perception>{perception}</perception><think>{think}</think><answer>{answer}</answer>"


class TestParseOutput:
    def test_happy_path(self):
        out = parse_output("<perception>edges: (0,1)</perception><think>t</think><answer>0:1,1:2</answer>")
        assert out.perception_text == "edges: (0,1)"
        assert out.reasoning_text == "t"
        assert out.answer == ColoringAnswer(((0, 1), (1, 2)))

    def test_answer_missing(self):
        with pytest.raises(ParseError, match="answer missing") as err:
            parse_output("<perception>edges:</perception><think>x</think>")
        assert err.value.block == "answer"

    def test_perception_missing(self):
        with pytest.raises(ParseError, match="perception missing"):
            parse_output("<think>x</think><answer>0:1</answer>")

    def test_first_answer_wins(self):
        out = parse_output(_raw("edges:", "0:1") + "<answer>0:2</answer>")
        assert out.answer.as_dict() == {0: 1}

    def test_empty_reasoning_allowed(self):
        out = parse_output("<perception>edges:</perception><answer>0:1</answer>")
        assert out.reasoning_text == ""

    def test_answer_before_perception_ignored(self):
        with pytest.raises(ParseError, match="answer missing"):
            parse_output("<answer>0:1</answer><perception>edges:</perception>")

    def test_whitespace_trimmed(self):
        out = parse_output("<perception>\n edges: (0,1) \n</perception><think>  a </think><answer> 0:1 , 1:2 </answer>")
        assert out.perception_text == "edges: (0,1)"
        assert out.reasoning_text == "a"
        assert out.answer.as_dict() == {0: 1, 1: 2}

    def test_malformed_answer_is_unparsed(self):
        out = parse_output(_raw("edges:", "zero is red"), TaskKind.GC)
        assert out.answer is None

    def test_grid_answer(self):
        s = gen_sudoku(30, seed=1)
        text = "\n".join("".join(map(str, r)) for r in s.solution)
        out = parse_output(_raw("x", text))
        assert isinstance(out.answer, GridAnswer)
        assert out.answer.cells == s.solution


class TestParsePerception:
    def test_normalization(self):
        assert parse_perception("edges: (1,0);(2,1)", "GC") == EdgeList([(0, 1), (1, 2)])

    def test_dedupe(self):
        assert parse_perception("edges: (0,1);(1,0)", "GC").edges == ((0, 1),)

    def test_empty_edge_list(self):
        assert parse_perception("edges:", "GC") == EdgeList(())

    @pytest.mark.parametrize("text", ["(0,1)", "edges: (0,1),(1,2)", "edges: (a,1)", "edges: (1,1)", "edges: (0,1);"])
    def test_bad_edges(self, text):
        with pytest.raises(PerceptionParseError):
            parse_perception(text, "GC")

    def test_grid_blanks(self):
        s = gen_sudoku(30, seed=5)
        dotted = GivensGrid(s.givens).serialize()
        zeroed = dotted.replace(".", "0")
        assert parse_perception(dotted, "Sudoku") == parse_perception(zeroed, "Sudoku") == GivensGrid(s.givens)

    def test_short_grid_line(self):
        text = GivensGrid(gen_sudoku(30, seed=5).givens).serialize().split("\n")
        text[3] = text[3][:8]
        with pytest.raises(PerceptionParseError):
            parse_perception("\n".join(text), "Sudoku")


class TestPerceptionAccuracy:
    def test_identity(self):
        assert perception_accuracy(K3, K3) == 1

    def test_missing_edge(self):
        assert perception_accuracy(EdgeList([(0, 1), (0, 2)]), K3) == 0

    def test_order_orientation(self):
        assert perception_accuracy(parse_perception("edges: (2,1);(1,0);(2,0)", "GC"), K3) == 1

    def test_parse_failure(self):
        assert perception_accuracy(PerceptionParseError("x"), K3) == 0
        assert perception_accuracy(None, K3) == 0


class TestAccGC:
    def test_proper_minimum(self):
        assert acc_gc({0: 1, 1: 2, 2: 3}, K3, 3, 3) == 1

    def test_clash(self):
        assert acc_gc({0: 1, 1: 1, 2: 2}, K3, 3, 3) == 0

    def test_path_too_many_colors(self):
        path = EdgeList([(0, 1), (1, 2)])
        chi = brute_chromatic(path.edges, 3)
        assert chi == 2
        assert acc_gc({0: 1, 1: 2, 2: 3}, path, 3, chi) == 0
        assert acc_gc({0: 1, 1: 2, 2: 1}, path, 3, chi) == 1

    def test_missing_and_extra_nodes(self):
        assert acc_gc({0: 1, 1: 2}, K3, 3, 3) == 0
        assert acc_gc({0: 1, 1: 2, 2: 3, 3: 1}, K3, 3, 3) == 0

    def test_none(self):
        assert acc_gc(None, K3, 3, 3) == 0


class TestAccSudoku:
    def test_valid(self):
        s = gen_sudoku(30, seed=6)
        assert acc_sudoku(GridAnswer(s.solution), GivensGrid(s.givens)) == 1

    def test_row_duplicate(self):
        s = gen_sudoku(30, seed=6)
        g = [list(r) for r in s.solution]
        g[4][0] = g[4][1]
        assert acc_sudoku(g, GivensGrid([[0] * 9] * 9)) == 0

    def test_changes_given(self):
        s = gen_sudoku(30, seed=6)
        # relabel digits: still a valid sudoku but inconsistent with the givens
        relabel = {d: d % 9 + 1 for d in range(1, 10)}
        g = [[relabel[d] for d in r] for r in s.solution]
        assert acc_sudoku(g, GivensGrid([[0] * 9] * 9)) == 1
        assert acc_sudoku(g, GivensGrid(s.givens)) == 0


class TestScore:
    def test_perfect(self):
        t = make_task(GraphInstance.from_edges(3, K3.edges), "k3")
        m = score(_raw(K3.serialize(), "0:1,1:2,2:3"), t)
        assert m == MetricRecord(1, 1, 1)
        assert m.counterfactual_reasoning is None

    def test_disentanglement_dropped_edge(self):
        """Find, by enumeration, a coloring that is optimal for the graph minus
        one edge but invalid for the true graph."""
        found = None
        for seed in range(50):
            g = gen_graph(6, 0.5, seed=seed)
            for e in g.edges:
                dropped = [x for x in g.edges if x != e]
                chi = brute_chromatic(dropped, 6)
                for colors in brute_proper_colorings(dropped, 6, chi):
                    if colors[e[0]] == colors[e[1]]:
                        found = (g, dropped, colors)
                        break
                if found:
                    break
            if found:
                break
        assert found is not None
        g, dropped, colors = found
        t = make_task(g, "d")
        answer = ",".join(f"{i}:{c}" for i, c in enumerate(colors))
        m = score(_raw(EdgeList(dropped).serialize(), answer), t)
        assert m == MetricRecord(0, 0, 1)

    def test_unparseable_answer(self, gc_tasks):
        t = gc_tasks[0]
        m = score(_raw(t.canonical_perception.serialize(), "no idea"), t)
        assert (m.end_to_end, m.perception, m.conditional_reasoning) == (0, 1, 0)
        m = score(f"<perception>{t.canonical_perception.serialize()}</perception>", t)
        assert (m.end_to_end, m.perception, m.conditional_reasoning) == (0, 1, 0)

    def test_unparseable_perception(self, gc_tasks):
        t = gc_tasks[0]
        m = score(_raw("I see a graph", "0:1"), t)
        assert m.perception == 0 and m.conditional_reasoning == 0

    def test_out_of_range_perception_nodes(self):
        t = make_task(GraphInstance.from_edges(3, K3.edges), "k3")
        m = score(_raw("edges: (0,1);(0,2);(1,2);(2,3)", "0:1,1:2,2:3,3:1"), t)
        assert (m.end_to_end, m.perception, m.conditional_reasoning) == (0, 0, 1)

    def test_sudoku_conditional_uses_parsed_givens(self, sudoku_tasks):
        t = sudoku_tasks[0]
        sol = t.payload.solution
        givens = [list(r) for r in t.payload.givens]
        # perceive one extra (correct) digit: a_p = 0 but the solution still fits both
        r, c = next((r, c) for r in range(9) for c in range(9) if not givens[r][c])
        givens[r][c] = sol[r][c]
        text = "\n".join("".join(map(str, row)) for row in sol)
        m = score(_raw(GivensGrid(givens).serialize(), text), t)
        assert (m.end_to_end, m.perception, m.conditional_reasoning) == (1, 0, 1)

    def test_ap_one_implies_a_equals_ar(self, mixed_tasks):
        rng = random.Random(0)
        for t in mixed_tasks:
            for _ in range(3):
                if t.task_kind is TaskKind.GC:
                    ans = ",".join(f"{i}:{rng.randint(1, 4)}" for i in range(t.node_count))
                else:
                    ans = "\n".join("".join(str(rng.randint(1, 9)) for _ in range(9)) for _ in range(9))
                m = score(_raw(t.canonical_perception.serialize(), ans), t)
                assert m.perception == 1
                assert m.end_to_end == m.conditional_reasoning


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)).filter(lambda e: e[0] != e[1]), max_size=20))
def test_edge_list_parse_serialize_identity(pairs):
    p = EdgeList(pairs)
    assert parse_perception(p.serialize(), "GC") == p


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(0, 9), min_size=9, max_size=9), min_size=9, max_size=9))
def test_grid_parse_serialize_identity(cells):
    p = GivensGrid(cells)
    assert parse_perception(p.serialize(), "Sudoku") == p


def test_parse_answer_kinds():
    assert parse_answer("0:1,1:1", "GC") == ColoringAnswer(((0, 1), (1, 1)))
    assert parse_answer("0:1,0:2", "GC") is None
    assert parse_answer("123", "Sudoku") is None
