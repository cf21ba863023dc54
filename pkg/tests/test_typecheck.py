import random

import pytest

from mpst.core import NodeStore, PEnd, Session, bisim_process
from mpst.parser import parse_global, parse_process, print_process
from mpst.typecheck import (DepthValue, IllFormedGlobalType, Mode,
                            ProjectionError, ProjectionErrorKind, depth, leq,
                            leq_plus, project, typecheck, well_formed)

import randgen


# ---------------------------------------------------------------------------
# Depth.

def test_depth_values_on_running_example(cx):
    G = cx.gt("relay.gt")
    assert depth(G, "p") == DepthValue.finite(0)
    assert depth(G, "q") == DepthValue.finite(0)
    assert depth(G, "h") == DepthValue.finite(1)
    assert str(depth(G, "h")) == "1"


def test_depth_of_absent_participant_is_zero(cx):
    assert depth(cx.gt("relay.gt"), "zz") == DepthValue.finite(0)


def test_unbounded_depth(cx):
    G = cx.gt("unbounded.gt")
    d = depth(G, "r")
    assert not d.is_finite
    assert str(d) == "inf"
    assert DepthValue.finite(10 ** 9) < d


def test_depth_value_ordering():
    assert DepthValue.finite(1) < DepthValue.finite(2) < DepthValue.infinite()
    assert DepthValue.infinite() <= DepthValue.infinite()
    assert DepthValue.finite(3).to_json() == 3
    assert DepthValue.infinite().to_json() == "inf"


# ---------------------------------------------------------------------------
# Projection.

def test_projection_reproduces_golden_processes(cx):
    G = cx.gt("relay.gt")
    assert project(G, "p") is cx.proc("relay_p.proc")
    assert project(G, "q") is cx.proc("relay_q.proc")
    assert project(G, "h") is cx.proc("relay_h.proc")
    assert project(G, "zz") is cx.store.end_process


@pytest.mark.parametrize("text,who,kind", [
    ("p -> q : {l1 . r -> s : a . end, l2 . end}", "r",
     ProjectionErrorKind.MixedShapes),
    ("p -> q : {l1 . s -> r : a . end, l2 . t -> r : a . end}", "r",
     ProjectionErrorKind.DifferentInputSenders),
    ("p -> q : {l1 . s -> r : a . end, l2 . s -> r : {b . end, a . s -> r : c . end}}",
     "r", ProjectionErrorKind.OverlappingInputLabels),
    ("p -> q : {l1 . r -> s : a . end, l2 . r -> s : b . end}", "r",
     ProjectionErrorKind.UnequalContinuations),
    ("p -> q : {l1 . s -> r : a . end, l2 . s -> r : {a . s -> r : b . end}}",
     "r", ProjectionErrorKind.UnequalContinuations),
])
def test_projection_error_kinds(store, text, who, kind):
    G = parse_global(text, store=store)
    err = project(G, who)
    assert isinstance(err, ProjectionError)
    assert err.kind is kind
    assert who in str(err)
    assert err.to_json()["error"] == kind.value


def test_projection_merges_disjoint_inputs(store):
    G = parse_global(
        "p -> q : {l1 . s -> r : a . end, l2 . s -> r : b . end}", store=store)
    assert project(G, "r") is parse_process("s?{a . 0, b . 0}", store=store)


def test_projection_through_inflight_merge_cycle(store):
    # the merge for r feeds off cells that are still being projected; the
    # consistent reading resolves to a plain output loop
    G = parse_global("rec X . p -> q : {a . r -> q : m . X, b . X}",
                     store=store)
    P = project(G, "r")
    assert P is parse_process("rec X . q!m . X", store=store)
    assert not well_formed(G).ok  # the b-cycle never involves r


def test_projection_rejects_contradictory_merge_cycle(store):
    # regression: this used to crash the deferred-merge resolution
    G = parse_global("""
    h -> p : {a . q -> h : a . end,
              b . rec X0 . p -> h : {b . rec X1 .
                    p -> q : {a . X0, b . p -> q : a . X1, c . q -> h : a . end},
                  c . end}}
    """, store=store)
    err = project(G, "h")
    assert isinstance(err, ProjectionError)


def test_projection_never_crashes_on_arbitrary_types(store):
    rng = random.Random(12)
    for _ in range(500):
        G = randgen.random_global(rng, store, max_nodes=10)
        for who in ("p", "q", "h", "zz"):
            res = project(G, who)
            assert isinstance(res, (ProjectionError, PEnd)) or res.store is store


def test_projection_totality_on_well_formed_corpus(cx):
    for name in cx.names(".gt"):
        G = cx.gt(name)
        report = well_formed(G)
        if not report.ok:
            continue
        from mpst.core import participants_of_global
        for p in sorted(participants_of_global(G)) + ["fresh"]:
            assert not isinstance(project(G, p), ProjectionError)


def test_projection_commutes_with_unfolding(cx):
    # a fresh store re-interns the same regular tree; projections agree
    from mpst.core import participants_of_global
    for name in cx.names(".gt"):
        G = cx.gt(name)
        other = NodeStore()
        H = other.adopt(G)
        for p in participants_of_global(G):
            a, b = project(G, p), project(H, p)
            if isinstance(a, ProjectionError):
                assert isinstance(b, ProjectionError) and a.kind is b.kind
            else:
                assert bisim_process(a, b)


# ---------------------------------------------------------------------------
# Preorders.

def test_leq_examples(store):
    wide_in = parse_process("q?{a . 0, b . 0}", store=store)
    narrow_in = parse_process("q?a . 0", store=store)
    one_out = parse_process("q!a . 0", store=store)
    two_out = parse_process("q!{a . 0, b . 0}", store=store)
    assert leq(wide_in, narrow_in)
    assert not leq(narrow_in, wide_in)
    assert not leq(one_out, two_out)
    assert not leq(two_out, one_out)
    assert leq_plus(one_out, two_out)
    assert not leq_plus(two_out, one_out)
    assert leq(store.end_process, store.end_process)
    assert not leq(store.end_process, one_out)
    assert not leq(one_out, wide_in)


def test_leq_is_contained_in_leq_plus(store):
    rng = random.Random(13)
    for _ in range(300):
        P = randgen.random_process(rng, store)
        Q = randgen.weaken(rng, store, P)
        assert leq(P, Q) and leq_plus(P, Q)
        R = randgen.random_process(rng, store)
        if leq(P, R):
            assert leq_plus(P, R)


def test_leq_recurses_through_cycles(store):
    P = parse_process("rec X . q?{a . X, b . X}", store=store)
    Q = parse_process("rec X . q?a . X", store=store)
    assert leq(P, Q)
    assert not leq(Q, P)


# ---------------------------------------------------------------------------
# Well-formedness and typing.

def test_well_formed_reports(cx):
    good = well_formed(cx.gt("relay.gt"))
    assert good.ok and good.failures() == []
    bad = well_formed(cx.gt("unbounded.gt"))
    assert not bad.ok
    assert any(p == "r" and "depth" in cause for p, cause in bad.failures())
    js = bad.to_json()
    assert set(js) == {"ok", "depths", "projections", "failures"}
    assert js["depths"]["r"] == "inf"


def test_self_typing_of_corpus_pairs(cx):
    for sess_name, gt_name in (("relay.sess", "relay.gt"),
                               ("right.sess", "right.gt"),
                               ("right.sess", "right.gt"),
                               ("composed.sess", "composed.gt")):
        if not cx.path(sess_name).exists():
            continue
        report = typecheck(cx.sess(sess_name), cx.gt(gt_name))
        assert report.ok, (sess_name, report.failures, report.missing)


def test_typing_tolerates_finished_extras(cx):
    M = cx.sess("relay.sess").rebind({"z": cx.store.end_process})
    assert typecheck(M, cx.gt("relay.gt")).ok


def test_typing_reports_missing_participant(cx):
    M = cx.sess("relay.sess")
    smaller = Session({p: M[p] for p in M.participants if p != "h"})
    report = typecheck(smaller, cx.gt("relay.gt"))
    assert not report.ok
    assert report.missing == ["h"]


def test_typing_failure_lists_offender(cx, store):
    M = cx.sess("relay.sess")
    broken = M.rebind({"p": parse_process("q?zzz . 0", store=cx.store)})
    report = typecheck(broken, cx.gt("relay.gt"))
    assert not report.ok
    offenders = [p for p, _, _ in report.failures]
    assert offenders == ["p"]
    js = report.to_json()
    assert set(js) == {"ok", "mode", "failures", "missing"}


def test_typing_modes_differ_on_width_example(cx):
    M, G = cx.sess("plus_only.sess"), cx.gt("plus_only.gt")
    assert not typecheck(M, G, Mode.Standard).ok
    assert typecheck(M, G, Mode.Plus).ok


def test_typing_rejects_ill_formed_type(cx):
    with pytest.raises(IllFormedGlobalType) as info:
        typecheck(cx.sess("relay.sess"), cx.gt("unbounded.gt"))
    assert info.value.report.ok is False


def test_depth_decrease_under_root_steps(cx):
    # communications strictly lower the depth of uninvolved participants
    from mpst.core import participants_of_global
    G = cx.gt("relay.gt")
    for label, cont in G.branches:
        for r in participants_of_global(G) - {G.sender, G.receiver}:
            after = depth(cont, r) if not isinstance(cont, PEnd) else DepthValue.finite(0)
            assert depth(G, r) > after
