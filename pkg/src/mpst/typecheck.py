"""Projection, depth, well-formedness, the structural preorders, and typing.

Projection onto a participant follows four clauses, tried in order: absent
participants project to 0, the sender of the root communication to an output,
the receiver to an input, and any other root is projected branchwise and the
results merged.  The merge accepts either branches that all project to the
same process, or branches that all project to inputs from one common sender
with pairwise-disjoint label sets (combined into a single input).

The merge is computed corecursively over the global graph.  Each global node
gets a reserved draft; a branch whose projection is still being determined
contributes that draft as an undecided hole, and the affected merge decisions
are deferred until the holes fill in.  Decisions that assume two in-flight
projections equal are verified by bisimulation once the whole run is interned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import (
    GComm,
    GEnd,
    GlobalType,
    PEnd,
    PIn,
    POut,
    Process,
    Session,
    bisim_process,
    check_ident,
    coinductive_closure,
    node_labels,
    participants_of_global,
)
from .parser import print_process


# ---------------------------------------------------------------------------
# Depth: how many communications can precede a participant's first one.

@dataclass(frozen=True)
class DepthValue:
    """A path-prefix length; value None means the prefix is unbounded."""

    value: int | None

    @classmethod
    def finite(cls, n):
        return cls(n)

    @classmethod
    def infinite(cls):
        return cls(None)

    @property
    def is_finite(self):
        return self.value is not None

    def __str__(self):
        return "inf" if self.value is None else str(self.value)

    def _key(self):
        return float("inf") if self.value is None else self.value

    def __lt__(self, other):
        return self._key() < other._key()

    def __le__(self, other):
        return self._key() <= other._key()

    def __gt__(self, other):
        return self._key() > other._key()

    def __ge__(self, other):
        return self._key() >= other._key()

    def to_json(self):
        return "inf" if self.value is None else self.value


def depth(G, p):
    """Longest run of communications before p's first one, over all paths.

    Paths on which p never communicates contribute nothing; a cycle from
    which p stays reachable pumps the prefix without bound.
    """
    memo = G.store.memo("depth")
    key = (G.nid, p)
    if key not in memo:
        memo[key] = _depth_raw(G, p)
    return memo[key]


def _depth_raw(G, p):
    if isinstance(G, GEnd) or p not in participants_of_global(G):
        return DepthValue.finite(0)
    if p in (G.sender, G.receiver):
        return DepthValue.finite(0)
    # Communications reachable from G before p gets involved.
    interior = set()
    stack = [G]
    while stack:
        n = stack.pop()
        if n in interior:
            continue
        interior.add(n)
        for _, c in n.branches:
            if isinstance(c, GComm) and p not in (c.sender, c.receiver):
                stack.append(c)
    # Restrict to nodes from which some path still meets p.
    canreach = set()
    changed = True
    while changed:
        changed = False
        for n in interior:
            if n in canreach:
                continue
            for _, c in n.branches:
                if isinstance(c, GComm) and (p in (c.sender, c.receiver) or c in canreach):
                    canreach.add(n)
                    changed = True
                    break
    # A cycle that can still reach p makes the prefix unbounded.
    color = {}
    for start in canreach:
        if start in color:
            continue
        stack = [(start, iter(start.branches))]
        color[start] = 1
        while stack:
            n, it = stack[-1]
            advanced = False
            for _, c in it:
                if c not in canreach:
                    continue
                seen = color.get(c)
                if seen == 1:
                    return DepthValue.infinite()
                if seen is None:
                    color[c] = 1
                    stack.append((c, iter(c.branches)))
                    advanced = True
                    break
            if not advanced:
                color[n] = 2
                stack.pop()
    # Longest prefix in the remaining DAG.
    best = {}

    def longest(n):
        if n in best:
            return best[n]
        m = 0
        for _, c in n.branches:
            if isinstance(c, GComm) and p in (c.sender, c.receiver):
                m = max(m, 1)
            elif c in canreach:
                m = max(m, 1 + longest(c))
        best[n] = m
        return m

    return DepthValue.finite(longest(G))


# ---------------------------------------------------------------------------
# Projection.

class ProjectionErrorKind(Enum):
    MixedShapes = "MixedShapes"
    DifferentInputSenders = "DifferentInputSenders"
    OverlappingInputLabels = "OverlappingInputLabels"
    UnequalContinuations = "UnequalContinuations"


class ProjectionError(Exception):
    """Why the branchwise merge at a global node has no result."""

    def __init__(self, kind, node, participant, message):
        super().__init__(f"{kind.value}: {message}")
        self.kind = kind
        self.node = node
        self.participant = participant
        self.message = message

    def to_json(self):
        return {"error": self.kind.value, "message": self.message}


class _Reject(Exception):
    def __init__(self, err):
        super().__init__(str(err))
        self.err = err


class _Cell:
    __slots__ = ("draft", "state", "node", "members", "had_self")
    # state: "busy" while the clauses run, "deferred" while the merge waits
    # on other in-flight projections, "done" once the draft is filled.

    def __init__(self, draft, node):
        self.draft = draft
        self.state = "busy"
        self.node = node
        self.members = None
        self.had_self = False


def project(G, p):
    """Process the participant must run to follow G, or a ProjectionError."""
    check_ident(p, "participant")
    cache = G.store.memo("project")
    hit = cache.get((G.nid, p))
    if hit is not None:
        return hit
    try:
        return _project_run(G.store, G, p)
    except _Reject as r:
        cache[(G.nid, p)] = r.err
        return r.err


def _project_run(store, root, p):
    cache = store.memo("project")
    b = store.builder()
    cells = {}
    deferred = []
    checks = []  # (node, ref, ref): projections assumed equal, checked at the end

    def reject(kind, g, msg):
        err = ProjectionError(kind, g, p, msg)
        cache[(g.nid, p)] = err
        raise _Reject(err)

    def decide(cell):
        """Fill the cell's draft, or return False while members are holes."""
        shapes = []
        for m in cell.members:
            s = b.shape_of(m)
            if s is None:
                return False
            shapes.append(s)
        g, d, ms = cell.node, cell.draft, cell.members
        if not ms:
            raise AssertionError("empty merge despite the participant occurring")
        if len(ms) == 1:
            b.fill_copy(d, ms[0])
            return True
        kinds = {s[0] for s in shapes}
        if len(kinds) > 1:
            reject(ProjectionErrorKind.MixedShapes, g,
                   f"branches of {g!r} project onto {p!r} with different shapes "
                   f"({', '.join(sorted(kinds))})")
        kind = kinds.pop()
        if kind == "end":
            b.fill_copy(d, ms[0])
            return True
        if kind == "out":
            if len({(s[1], s[2]) for s in shapes}) > 1:
                reject(ProjectionErrorKind.UnequalContinuations, g,
                       f"branches of {g!r} project onto {p!r} as different outputs")
            b.fill_copy(d, ms[0])
            checks.extend((g, ms[0], m) for m in ms[1:])
            return True
        senders = {s[1] for s in shapes}
        if len(senders) > 1:
            reject(ProjectionErrorKind.DifferentInputSenders, g,
                   f"branches of {g!r} project onto {p!r} as inputs from "
                   f"{', '.join(sorted(senders))}")
        label_sets = [set(s[2]) for s in shapes]
        if all(ls == label_sets[0] for ls in label_sets):
            b.fill_copy(d, ms[0])
            checks.extend((g, ms[0], m) for m in ms[1:])
            return True
        if all(not (label_sets[i] & label_sets[j])
               for i in range(len(ms)) for j in range(i + 1, len(ms))):
            if cell.had_self:
                reject(ProjectionErrorKind.OverlappingInputLabels, g,
                       f"a branch of {g!r} projects onto {p!r} to the merged input "
                       f"itself, which cannot be disjoint from the union")
            combined = []
            for m in ms:
                combined.extend(b.branch_targets(m))
            b.fill_in(d, senders.pop(), combined)
            return True
        reject(ProjectionErrorKind.OverlappingInputLabels, g,
               f"branches of {g!r} project onto {p!r} as inputs whose label sets "
               f"overlap without being equal")

    def go(g):
        hit = cache.get((g.nid, p))
        if isinstance(hit, ProjectionError):
            raise _Reject(hit)
        if hit is not None:
            return hit
        cell = cells.get(g.nid)
        if cell is not None:
            return cell.draft
        if p not in store.participants(g):
            cache[(g.nid, p)] = store.end_process
            return store.end_process
        cell = _Cell(b.reserve(), g)
        cells[g.nid] = cell
        d = cell.draft
        if g.sender == p:
            b.fill_out(d, g.receiver, [(l, go(c)) for l, c in g.branches])
        elif g.receiver == p:
            b.fill_in(d, g.sender, [(l, go(c)) for l, c in g.branches])
        else:
            members = []
            for _, c in g.branches:
                m = go(c)
                if m == d:
                    cell.had_self = True
                elif m not in members:
                    members.append(m)
            cell.members = members
            if not decide(cell):
                cell.state = "deferred"
                deferred.append(cell)
                return d
        cell.state = "done"
        return d

    res = go(root)
    pending = [c for c in deferred if c.state != "done"]
    while pending:
        rest = []
        for cell in pending:
            if decide(cell):
                cell.state = "done"
            else:
                rest.append(cell)
        if len(rest) == len(pending):
            # The remaining merges wait on one another in a cycle.  A cyclic
            # union has no consistent label set, so the only reading left is
            # that each such merge equals its members; pick the first member
            # whose shape is known and leave the equalities to the checks.
            # Cells whose members are all still holes unblock on a later
            # sweep once a neighbour is filled.
            progressed = False
            for cell in rest:
                known = [m for m in cell.members if b.shape_of(m) is not None]
                if not known:
                    continue
                b.fill_copy(cell.draft, known[0])
                checks.extend((cell.node, known[0], m)
                              for m in cell.members if m != known[0])
                cell.state = "done"
                progressed = True
            if not progressed:
                raise AssertionError("merge cycle with no resolved member")
            rest = [cell for cell in rest if cell.state != "done"]
        pending = rest

    targets = [cell.draft for cell in cells.values()]
    for _, a, c in checks:
        targets.extend((a, c))
    if not isinstance(res, int):
        final = {}
        nodes = []
    else:
        nodes = b.intern(targets)
        final = dict(zip(targets, nodes))
    at = len(cells)
    for g, a, c in checks:
        fa, fc = nodes[at], nodes[at + 1]
        at += 2
        if not bisim_process(fa, fc):
            reject(ProjectionErrorKind.UnequalContinuations, g,
                   f"branches of {g!r} project onto {p!r} differently "
                   f"({print_process(fa)} vs {print_process(fc)})")
    for nid, cell in cells.items():
        cache[(nid, p)] = final[cell.draft]
    return final[res] if isinstance(res, int) else res


# ---------------------------------------------------------------------------
# Structural preorders.

def _leq_step(x, y):
    if isinstance(x, PEnd) and isinstance(y, PEnd):
        return ()
    if isinstance(x, PIn) and isinstance(y, PIn) and x.peer == y.peer:
        # the smaller process may accept extra labels
        mine = dict(x.branches)
        pairs = []
        for l, yc in y.branches:
            xc = mine.get(l)
            if xc is None:
                return None
            pairs.append((xc, yc))
        return pairs
    if isinstance(x, POut) and isinstance(y, POut) and x.peer == y.peer:
        if node_labels(x) != node_labels(y):
            return None
        return [(xc, yc) for (_, xc), (_, yc) in zip(x.branches, y.branches)]
    return None


def _leq_plus_step(x, y):
    if isinstance(x, POut) and isinstance(y, POut) and x.peer == y.peer:
        # the smaller process may offer fewer labels
        theirs = dict(y.branches)
        pairs = []
        for l, xc in x.branches:
            yc = theirs.get(l)
            if yc is None:
                return None
            pairs.append((xc, yc))
        return pairs
    if isinstance(x, POut) or isinstance(y, POut):
        return None
    return _leq_step(x, y)


def leq(P, Q):
    """Structural preorder: inputs may widen leftward, outputs must match."""
    return coinductive_closure("leq", P, Q, _leq_step, reflexive=True)


def leq_plus(P, Q):
    """Variant preorder that lets the smaller process offer fewer outputs."""
    return coinductive_closure("leq+", P, Q, _leq_plus_step, reflexive=True)


# ---------------------------------------------------------------------------
# Well-formedness and typing.

class Mode(Enum):
    Standard = "standard"
    Plus = "plus"


class IllFormedGlobalType(Exception):
    def __init__(self, G, report):
        failing = ", ".join(p for p, _ in report.failures())
        super().__init__(f"global type is not well formed (offending: {failing})")
        self.global_type = G
        self.report = report


@dataclass
class WellFormedReport:
    ok: bool
    depths: dict
    projections: dict

    def failures(self):
        out = []
        for p in self.depths:
            causes = []
            if not self.depths[p].is_finite:
                causes.append("unbounded depth")
            if isinstance(self.projections[p], ProjectionError):
                causes.append(str(self.projections[p]))
            if causes:
                out.append((p, "; ".join(causes)))
        return out

    def to_json(self):
        return {
            "ok": self.ok,
            "depths": {p: d.to_json() for p, d in self.depths.items()},
            "projections": {
                p: v.to_json() if isinstance(v, ProjectionError) else print_process(v)
                for p, v in self.projections.items()
            },
            "failures": [{"participant": p, "cause": c} for p, c in self.failures()],
        }


def well_formed(G):
    """Every participant has finite depth and a defined projection."""
    pts = sorted(participants_of_global(G))
    depths = {p: depth(G, p) for p in pts}
    projections = {p: project(G, p) for p in pts}
    ok = all(d.is_finite for d in depths.values()) and not any(
        isinstance(v, ProjectionError) for v in projections.values())
    return WellFormedReport(ok, depths, projections)


@dataclass
class TypingReport:
    ok: bool
    failures: list = field(default_factory=list)  # (participant, expected, actual)
    missing: list = field(default_factory=list)
    mode: Mode = Mode.Standard

    def to_json(self):
        return {
            "ok": self.ok,
            "mode": self.mode.value,
            "failures": [
                {"participant": p, "expected": print_process(e), "actual": print_process(a)}
                for p, e, a in self.failures
            ],
            "missing": list(self.missing),
        }


def typecheck(M, G, mode=Mode.Standard, require_wf=True):
    """Does every bound process follow its projection of G?

    A process may be structurally smaller than its projection; participants
    of G missing from the session are reported.  Raises IllFormedGlobalType
    when some projection is undefined or some depth unbounded.  Stepping a
    well-formed type can unbound the depth of a participant involved in the
    step while keeping every projection defined, so checks that follow
    reductions pass require_wf=False to relax the depth half only.
    """
    if not isinstance(M, Session):
        raise TypeError(f"expected a Session, got {M!r}")
    wf = well_formed(G)
    if not wf.ok:
        undefined = any(isinstance(v, ProjectionError)
                        for v in wf.projections.values())
        if require_wf or undefined:
            raise IllFormedGlobalType(G, wf)
    rel = leq if mode is Mode.Standard else leq_plus
    end = G.store.end_process
    failures = []
    for p, P in M.items():
        expected = wf.projections.get(p, end)
        if not rel(P, expected):
            failures.append((p, expected, P))
    missing = [p for p in wf.depths if p not in M]
    return TypingReport(not failures and not missing, failures, missing, mode)
