import os
import random

import pytest

from mpst.core import (PEnd, Session, bisim_global, normalize_session,
                       participants_of_global)
from mpst.parser import (parse_global, parse_process, parse_session,
                         print_global, print_session)
from mpst.semantics import (CommAction, StateSpaceBoundExceeded, explore,
                            fidelity_harness, global_enabled, global_step,
                            lock_free, session_enabled, session_step,
                            simulate, standard_witness)
from mpst.typecheck import Mode, typecheck

import randgen


def _count_nodes(P):
    seen, stack = set(), [P]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if not isinstance(n, PEnd):
            stack.extend(c for _, c in n.branches)
    return len(seen)


# ---------------------------------------------------------------------------
# Session transitions.

def test_initial_enabled_action_of_relay(cx):
    M = cx.sess("relay.sess")
    actions = [a for a, _ in session_enabled(M)]
    assert [str(a) for a in actions] == ["p -text-> q"]
    succ = session_step(M, actions[0])
    assert succ["p"] is not M["p"]
    assert succ["h"] is M["h"]


def test_output_labels_must_be_covered_by_input(store):
    fires = parse_session("p |> q!l . 0 || q |> p?{l . 0, l2 . 0}", store=store)
    assert [str(a) for a, _ in session_enabled(fires)] == ["p -l-> q"]
    blocked = parse_session("p |> q!{l . 0, l2 . 0} || q |> p?l . 0", store=store)
    assert session_enabled(blocked) == []


def test_wide_output_fires_per_label(store):
    M = parse_session(
        "p |> q!{a . 0, b . q?done . 0} || q |> p?{a . 0, b . p!done . 0, c . 0}",
        store=store)
    assert sorted(str(a) for a, _ in session_enabled(M)) == \
        ["p -a-> q", "p -b-> q"]


def test_session_step_returns_none_when_disabled(cx):
    M = cx.sess("relay.sess")
    assert session_step(M, CommAction("q", "text", "p")) is None


# ---------------------------------------------------------------------------
# Global transitions.

def test_global_enabled_inside_communications(store):
    G = parse_global(
        "p -> q : {l1 . r -> s : a . end, l2 . r -> s : a . p -> q : go . end}",
        store=store)
    assert sorted(str(a) for a, _ in global_enabled(G)) == \
        ["p -l1-> q", "p -l2-> q", "r -a-> s"]
    inner = global_step(G, CommAction("r", "a", "s"))
    assert inner is parse_global(
        "p -> q : {l1 . end, l2 . p -> q : go . end}", store=store)


def test_global_icomm_blocked_by_involved_root(cx):
    G = cx.gt("relay.gt")
    assert [str(a) for a, _ in global_enabled(G)] == ["p -text-> q"]


def test_global_step_returns_none_when_unavailable(cx):
    assert global_step(cx.gt("relay.gt"), CommAction("q", "text", "p")) is None


# ---------------------------------------------------------------------------
# Exploration.

def test_explore_relay(cx):
    g = explore(cx.sess("relay.sess"))
    assert len(g.states) == 8 and len(g.edges) == 9
    assert g.initial == 0
    js = g.to_json()
    assert set(js) == {"initial", "states", "edges"}
    dot = g.to_dot()
    assert dot.startswith("digraph") and dot.count("->") >= len(g.edges)


def test_explore_state_count_bounded_by_node_product(cx):
    for name in cx.names(".sess"):
        M = cx.sess(name)
        graph = explore(M)
        product = 1
        for _, P in normalize_session(M).items():
            product *= _count_nodes(P)
        assert len(graph.states) <= max(product, 1)


def test_explore_honors_bound(cx):
    with pytest.raises(StateSpaceBoundExceeded):
        explore(cx.sess("right.sess"), bound=2)


def test_explore_reads_bound_from_environment(cx, monkeypatch):
    monkeypatch.setenv("MPST_STATE_BOUND", "2")
    with pytest.raises(StateSpaceBoundExceeded):
        explore(cx.sess("right.sess"))


# ---------------------------------------------------------------------------
# Subject reduction on the corpus.

@pytest.mark.parametrize("sess_name,gt_name", [
    ("relay.sess", "relay.gt"),
    ("right.sess", "right.gt"),
    ("right.sess", "right.gt"),
    ("composed.sess", "composed.gt"),
])
def test_subject_reduction_along_every_edge(cx, sess_name, gt_name):
    M, G = cx.sess(sess_name), cx.gt(gt_name)
    assert typecheck(M, G).ok
    seen = {}
    queue = [(normalize_session(M), G)]
    while queue:
        state, g = queue.pop()
        key = (state, g.nid)
        if key in seen:
            continue
        seen[key] = True
        for action, succ in session_enabled(state):
            gsucc = global_step(g, action)
            assert gsucc is not None, f"type cannot follow {action}"
            succ = normalize_session(succ)
            assert typecheck(succ, gsucc).ok
            queue.append((succ, gsucc))
    assert seen


# ---------------------------------------------------------------------------
# Lock-freedom.

def test_corpus_positive_sessions_are_lock_free(cx):
    for name in ("relay.sess", "right.sess", "right.sess", "composed.sess",
                 "crossed_left.sess", "crossed_right.sess"):
        assert lock_free(cx.sess(name)).ok, name


def test_crossed_forwarders_deadlock_immediately(cx):
    report = lock_free(cx.sess("crossed_forwarders.sess"))
    assert not report.ok
    assert report.deadlock_witness == []
    js = report.to_json()
    assert js["ok"] is False


def test_starvation_is_detected(store):
    M = parse_session(
        "p |> rec X . q!l . X || q |> rec X . p?l . X || r |> p?go . 0",
        store=store)
    report = lock_free(M)
    assert not report.ok
    assert report.deadlock_witness is None
    actions, starving = report.starvation_witness
    assert starving == "r"
    assert actions == []


def test_deadlock_witness_is_replayable(store):
    M = parse_session(
        "p |> q!a . q!b . 0 || q |> p?a . r?c . 0 || r |> 0", store=store)
    report = lock_free(M)
    assert not report.ok and report.deadlock_witness
    state = normalize_session(M)
    for action in report.deadlock_witness:
        state = normalize_session(session_step(state, action))
    assert session_enabled(state) == [] and len(state) > 0


# ---------------------------------------------------------------------------
# Simulation.

def test_simulation_is_deterministic(cx):
    M = cx.sess("right.sess")
    a = simulate(M, 40, seed=5)
    b = simulate(M, 40, seed=5)
    assert [str(x) for x in a.trace] == [str(x) for x in b.trace]
    assert a.status == b.status == "bound"
    assert print_session(a.final) == print_session(b.final)


def test_simulation_statuses(store, cx):
    done = simulate(parse_session("p |> q!l . 0 || q |> p?l . 0", store=store), 5)
    assert done.status == "final" and len(done.trace) == 1
    stuck = simulate(cx.sess("crossed_forwarders.sess"), 5)
    assert stuck.status == "stuck" and stuck.trace == []
    js = done.to_json()
    assert set(js) == {"trace", "final", "status"}


# ---------------------------------------------------------------------------
# Fidelity and the Plus-to-Standard witness.

def test_fidelity_holds_for_self_projection(cx):
    verdict = fidelity_harness(cx.sess("relay.sess"), cx.gt("relay.gt"))
    assert verdict.ok and verdict.divergence is None
    assert verdict.visited == len(explore(cx.sess("relay.sess")).states)


def test_fidelity_reports_width_divergence_in_plus_mode(cx):
    verdict = fidelity_harness(cx.sess("plus_only.sess"), cx.gt("plus_only.gt"),
                               Mode.Plus)
    assert not verdict.ok
    assert verdict.divergence["action"] == "p -l2-> q"
    assert "unmatched by the session" in verdict.divergence["kind"]


def test_fidelity_requires_a_typed_session(cx):
    with pytest.raises(ValueError):
        fidelity_harness(cx.sess("plus_only.sess"), cx.gt("plus_only.gt"))


def test_standard_witness_narrows_the_type(cx):
    W = standard_witness(cx.sess("plus_only.sess"), cx.gt("plus_only.gt"))
    assert W is parse_global("p -> q : l1 . end", store=cx.store)
    assert typecheck(cx.sess("plus_only.sess"), W).ok


def test_standard_witness_fixes_self_projections(cx):
    G = cx.gt("relay.gt")
    assert standard_witness(cx.sess("relay.sess"), G) is G


def test_standard_witness_requires_plus_typing(cx, store):
    M = parse_session("p |> q!zz . 0 || q |> p?zz . 0", store=cx.store)
    with pytest.raises(ValueError):
        standard_witness(M, cx.gt("relay.gt"))
