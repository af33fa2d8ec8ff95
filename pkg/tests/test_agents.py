import pytest

from confab.agents import AgentState, express, observe, pace_gate, render_expression
from confab.analyzer import Insight, canonical_key
from confab.domain import ChatMessage, ForecastQuestion

Q = ForecastQuestion(id="g1", team_a="Sharks", team_b="Coyotes", spread=5.5)


def msg(seq, text, author="p1", subgroup="tt1"):
    return ChatMessage(seq=seq, timestamp=seq * 1000, author=author,
                       subgroup_id=subgroup, text=text)


def make_insight(side="B", reason="bench depth is thin", conviction=0.7, origin="tt2"):
    key = canonical_key(side, (reason,))
    return Insight(id=f"ins-{key[:8]}-{origin}-1", side=side, reasons=(reason,),
                   conviction=conviction, origin_subgroup=origin, canonical_key=key)


class TestObserve:
    def test_one_marker_in_burst(self):
        state = AgentState("tt1", "agent-tt1")
        burst = [
            msg(1, "hello"),
            msg(2, "[pick:A][conf:0.6] rim protection", author="p2"),
            msg(3, "agreed!"),
        ]
        insights = observe(state, burst, Q)
        assert len(insights) == 1
        assert state.observed_through_seq == 3

    def test_replay_is_idempotent(self):
        state = AgentState("tt1", "agent-tt1")
        burst = [msg(1, "[pick:A][conf:0.6] rim protection")]
        assert len(observe(state, burst, Q)) == 1
        assert observe(state, burst, Q) == []

    def test_two_distinct_reasons_two_keys(self):
        state = AgentState("tt1", "agent-tt1")
        burst = [
            msg(1, "[pick:A][conf:0.6] rim protection"),
            msg(2, "[pick:B][conf:0.8] transition offense", author="p2"),
        ]
        insights = observe(state, burst, Q)
        assert len(insights) == 2
        assert len({i.canonical_key for i in insights}) == 2

    def test_skips_own_expressions(self):
        state = AgentState("tt1", "agent-tt1")
        routed = ChatMessage(seq=1, timestamp=0, author="agent-tt1", subgroup_id="tt1",
                             text="Another group is leaning Coyotes: pace.",
                             insight_id="ins-x")
        assert observe(state, [routed], Q) == []
        assert state.observed_through_seq == 0  # nothing fresh was participant dialog


class TestExpress:
    def test_text_names_team_and_reasons(self):
        state = AgentState("tt1", "agent-tt1")
        ins = make_insight(side="B", reason="bench depth is thin")
        out = express(state, ins, Q, template_seed=0, seq=7, now_ms=40_000)
        assert out.author == "agent-tt1"
        assert out.subgroup_id == "tt1"
        assert out.seq == 7
        assert "Coyotes" in out.text
        assert "bench depth is thin" in out.text
        assert out.insight_id == ins.id
        assert state.last_expression_time == 40_000

    def test_seed_changes_phrasing_not_annotation(self):
        ins = make_insight()
        texts = {render_expression(ins, Q, seed) for seed in range(4)}
        assert len(texts) > 1
        s1, s2 = AgentState("tt1", "a1"), AgentState("tt1", "a1")
        m1 = express(s1, ins, Q, 0, seq=1, now_ms=0)
        m2 = express(s2, ins, Q, 1, seq=1, now_ms=0)
        assert m1.text != m2.text
        assert m1.insight_id == m2.insight_id

    def test_all_reasons_verbatim(self):
        key = canonical_key("A", ("rest edge", "injury report"))
        ins = Insight(id="ins-two", side="A", reasons=("rest edge", "injury report"),
                      conviction=0.5, origin_subgroup="tt2", canonical_key=key)
        state = AgentState("tt1", "agent-tt1")
        out = express(state, ins, Q, template_seed=2, seq=1, now_ms=0)
        assert "rest edge" in out.text and "injury report" in out.text
        assert "Sharks" in out.text

    def test_refuses_local_insight(self):
        state = AgentState("tt1", "agent-tt1")
        with pytest.raises(ValueError):
            express(state, make_insight(origin="tt1"), Q, 0, seq=1, now_ms=0)


class TestPaceGate:
    def test_open_after_gap(self):
        state = AgentState("tt1", "a", last_expression_time=0)
        assert pace_gate(state, now_ms=30_000, min_gap_ms=25_000) is True

    def test_closed_within_gap(self):
        state = AgentState("tt1", "a", last_expression_time=0)
        assert pace_gate(state, now_ms=10_000, min_gap_ms=25_000) is False

    def test_first_expression_always_open(self):
        assert pace_gate(AgentState("tt1", "a"), now_ms=0) is True

    def test_boundary_is_open(self):
        state = AgentState("tt1", "a", last_expression_time=5_000)
        assert pace_gate(state, now_ms=30_000, min_gap_ms=25_000) is True
