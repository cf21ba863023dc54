"""Connecting sessions and global types through gateway forwarders.

Two systems that each expose an interface participant can be joined by
turning those two participants into forwarders: every message an interface
process used to receive is passed on to the opposite forwarder, and every
message it used to send is first requested from it.  Compatibility (the two
interface processes offer dual communications and every input label set is
covered by the facing output label set) is exactly the condition that makes
the rewiring sound.

The same construction lifts to global types: `connect_globals` interleaves
the two types, splicing an h->k (or k->h) forwarding step between each
communication that used to terminate at one interface and the matching one
that used to originate at the other.  `verify_connection` runs both
constructions and checks the composed session against the composed type.
"""

from dataclasses import dataclass

from .core import (
    GEnd,
    GComm,
    PEnd,
    PIn,
    POut,
    Session,
    coinductive_closure,
    participants_of_global,
    participants_of_process,
)
from .typecheck import IllFormedGlobalType, Mode, leq, project, typecheck, well_formed


class ParticipantCollision(Exception):
    """The forwarding target already occurs inside the process."""


class IncompatibleSessions(Exception):
    """The sessions cannot be connected through the requested participants."""


# ---------------------------------------------------------------------------
# Process compatibility.

def _labels(node):
    return frozenset(l for l, _ in node.branches)


def _compatible_step(P, Q):
    if isinstance(P, PEnd) and isinstance(Q, PEnd):
        return []
    if isinstance(P, PIn) and isinstance(Q, POut):
        P, Q = Q, P
    if isinstance(P, POut) and isinstance(Q, PIn):
        # Peers are irrelevant; the input labels must all be offered by the
        # output, and the paired continuations must stay compatible.
        if not _labels(Q) <= _labels(P):
            return None
        out = dict(P.branches)
        return [(out[l], cont) for l, cont in Q.branches]
    return None


def compatible(P, Q):
    """Decide interface compatibility of two processes."""
    Q = P.store.adopt(Q)
    return coinductive_closure("compatible", P, Q, _compatible_step,
                               reflexive=False)


# ---------------------------------------------------------------------------
# Gateway synthesis.

def gateway(P, h):
    """Turn P into a forwarder that relays every exchange through h.

    Inputs are kept and re-sent to h; outputs are first requested from h and
    then delivered to the original peer.
    """
    if h in participants_of_process(P):
        raise ParticipantCollision(f"{h!r} already occurs in the process")
    store = P.store
    cache = store.memo("gateway")
    hit = cache.get((P.nid, h))
    if hit is not None:
        return hit
    b = store.builder()
    seen = {}

    def go(n):
        if isinstance(n, PEnd):
            return store.end_process
        d = seen.get(n.nid)
        if d is not None:
            return d
        d = seen[n.nid] = b.reserve()
        relay = h if isinstance(n, PIn) else n.peer
        source = n.peer if isinstance(n, PIn) else h
        branches = [(l, b.add_out(relay, [(l, go(cont))])) for l, cont in n.branches]
        b.fill_in(d, source, branches)
        return d

    root = go(P)
    result = b.intern([root])[0] if isinstance(root, int) else root
    cache[(P.nid, h)] = result
    return result


# ---------------------------------------------------------------------------
# Session connection.

def compatible_sessions(M, h, M_prime, k):
    """Disjoint bindings, h and k bound, and their processes compatible."""
    if set(M.participants) & set(M_prime.participants):
        return False
    if h not in M or k not in M_prime:
        return False
    return compatible(M[h], M_prime[k])


def connect_sessions(M, h, M_prime, k):
    """Join two sessions, replacing h and k with mutual forwarders."""
    if not compatible_sessions(M, h, M_prime, k):
        raise IncompatibleSessions(
            f"sessions are not compatible via {h!r} and {k!r}")
    store = M[h].store
    bindings = {p: proc for p, proc in M.items() if p != h}
    for q, proc in M_prime.items():
        if q != k:
            bindings[q] = store.adopt(proc)
    bindings[h] = gateway(M[h], k)
    bindings[k] = gateway(store.adopt(M_prime[k]), h)
    return Session(bindings)


# ---------------------------------------------------------------------------
# Global-type connection.

@dataclass(frozen=True)
class StarMarker:
    """Routing state threaded through the connection clauses.

    "hash" means any interaction may come next; "fwd" (resp. "bwd") means the
    first (resp. second) forwarder owes the other a delivery of `label`.
    """
    kind: str
    label: str = None

    def __post_init__(self):
        if self.kind not in ("hash", "fwd", "bwd"):
            raise ValueError(f"unknown marker kind {self.kind!r}")
        if (self.label is None) != (self.kind == "hash"):
            raise ValueError("directed markers carry exactly one label")

    def __str__(self):
        if self.kind == "hash":
            return "#"
        return f"{self.label}->" if self.kind == "fwd" else f"<-{self.label}"


HASH = StarMarker("hash")


@dataclass(frozen=True)
class CnKey:
    """Identity of one connection call; also the memo key tying cycles."""
    h: str
    k: str
    star: StarMarker
    left: int
    right: int
    swapped: bool

    def __str__(self):
        side = " (swapped)" if self.swapped else ""
        return (f"connect({self.h}, {self.k}, {self.star}, "
                f"node {self.left}, node {self.right}){side}")


class NoClauseApplies(Exception):
    """No connection clause matched; unreachable for compatible inputs."""

    def __init__(self, key):
        super().__init__(f"no connection clause applies at {key}")
        self.key = key


def _projection_or_raise(G, p):
    proc = project(G, p)
    if not isinstance(proc, (PEnd, PIn, POut)):
        raise IllFormedGlobalType(G, well_formed(G))
    return proc


def compatible_globals(G, h, G_prime, k):
    """Disjoint participants and compatible h/k projections."""
    if participants_of_global(G) & participants_of_global(G_prime):
        return False
    return compatible(_projection_or_raise(G, h),
                      _projection_or_raise(G_prime, k))


def connect_globals(G, h, G_prime, k):
    """Interleave two global types, wiring h and k as paired forwarders.

    Communications that used to terminate at h (resp. originate at k) are
    spliced with the forwarding steps h->k (resp. k->h); everything else is
    interleaved unchanged, alternating sides so neither type's independent
    interactions pile up before the other's.

    The left type progresses until it ends or blocks on an output of h; only
    then does the right type move.  Callers must supply compatible types
    (disjoint participants, compatible h/k projections): on other inputs the
    dispatch below can reach a dead end and raises NoClauseApplies.
    """
    store = G.store
    G_prime = store.adopt(G_prime)
    b = store.builder()
    cells = {}

    def cn(h, k, star, L, R, swapped):
        key = CnKey(h, k, star, L.nid, R.nid, swapped)
        hit = cells.get(key)
        if hit is not None:
            return hit
        if star.kind == "hash" and isinstance(L, GEnd):
            cells[key] = R
            return R
        d = cells[key] = b.reserve()
        if star.kind == "hash":
            if isinstance(L, GComm) and L.receiver == h:
                b.fill_comm(d, L.sender, h,
                            [(l, cn(h, k, StarMarker("fwd", l), cont, R, swapped))
                             for l, cont in L.branches])
            elif isinstance(L, GComm) and h not in (L.sender, L.receiver):
                b.fill_comm(d, L.sender, L.receiver,
                            [(l, cn(k, h, HASH, R, cont, not swapped))
                             for l, cont in L.branches])
            elif isinstance(R, GComm) and R.receiver == k:
                b.fill_comm(d, R.sender, k,
                            [(l, cn(h, k, StarMarker("bwd", l), L, cont, swapped))
                             for l, cont in R.branches])
            elif isinstance(R, GComm) and k not in (R.sender, R.receiver):
                b.fill_comm(d, R.sender, R.receiver,
                            [(l, cn(k, h, HASH, cont, L, not swapped))
                             for l, cont in R.branches])
            else:
                raise NoClauseApplies(key)
        elif star.kind == "fwd":
            # h holds a message for k; the second type must route it onward.
            if isinstance(R, GComm) and R.sender == k:
                cont = dict(R.branches).get(star.label)
                if cont is None:
                    raise NoClauseApplies(key)
                inner = b.add_comm(k, R.receiver,
                                   [(star.label, cn(h, k, HASH, L, cont, swapped))])
                b.fill_comm(d, h, k, [(star.label, inner)])
            elif isinstance(R, GComm) and R.receiver != k:
                b.fill_comm(d, R.sender, R.receiver,
                            [(l, cn(h, k, star, L, cont, swapped))
                             for l, cont in R.branches])
            else:
                raise NoClauseApplies(key)
        else:
            # k holds a message for h; the first type must route it onward.
            if isinstance(L, GComm) and L.sender == h:
                cont = dict(L.branches).get(star.label)
                if cont is None:
                    raise NoClauseApplies(key)
                inner = b.add_comm(h, L.receiver,
                                   [(star.label, cn(h, k, HASH, cont, R, swapped))])
                b.fill_comm(d, k, h, [(star.label, inner)])
            elif isinstance(L, GComm) and L.receiver != h:
                b.fill_comm(d, L.sender, L.receiver,
                            [(l, cn(h, k, star, cont, R, swapped))
                             for l, cont in L.branches])
            else:
                raise NoClauseApplies(key)
        return d

    root = cn(h, k, HASH, G, G_prime, False)
    return b.intern([root])[0] if isinstance(root, int) else root


# ---------------------------------------------------------------------------
# End-to-end verification.

@dataclass
class ConnectionReport:
    """Everything produced while connecting two typed sessions."""
    composed_session: object
    composed_global: object
    typing: object
    projection_checks: list

    @property
    def ok(self):
        return self.typing.ok and all(holds for _, holds in self.projection_checks)

    def to_json(self):
        from .parser import print_global, print_session
        return {
            "composed_session": print_session(self.composed_session),
            "composed_global": print_global(self.composed_global),
            "typing": self.typing.to_json(),
            "projection_checks": [
                {"participant": p, "holds": holds}
                for p, holds in self.projection_checks
            ],
        }


def verify_connection(M, G, M_prime, G_prime, h, k, mode=Mode.Standard):
    """Connect two typed sessions and check the result against its type.

    Besides typechecking the composed session, every participant's projection
    is compared against what it was promised: the forwarders must refine the
    gateway transforms of the old interface projections, and everyone else
    must refine their old projection unchanged.
    """
    if not typecheck(M, G, mode).ok:
        raise ValueError("left session does not typecheck against its type")
    if not typecheck(M_prime, G_prime, mode).ok:
        raise ValueError("right session does not typecheck against its type")
    composed_session = connect_sessions(M, h, M_prime, k)
    store = G.store
    G_prime = store.adopt(G_prime)
    composed_global = connect_globals(G, h, G_prime, k)
    typing = typecheck(composed_session, composed_global, mode)

    def projected(T, p):
        proc = project(T, p)
        return proc if isinstance(proc, (PEnd, PIn, POut)) else None

    checks = []
    for p in sorted(participants_of_global(G) | participants_of_global(G_prime)
                    | {h, k}):
        target = projected(composed_global, p)
        if p == h:
            expected = gateway(projected(G, h), k)
        elif p == k:
            expected = gateway(projected(G_prime, k), h)
        else:
            origin = G if p in participants_of_global(G) else G_prime
            expected = projected(origin, p)
        holds = (expected is not None and target is not None
                 and leq(expected, target))
        checks.append((p, holds))
    return ConnectionReport(composed_session, composed_global, typing, checks)
