"""Canonical graph representations of processes, global types, and sessions.

Behaviours here are regular trees: possibly infinite trees with finitely many
distinct subtrees, encoded as finite node graphs with back-edges.  A NodeStore
interns every node it hands out: the incoming graph is minimized up to
bisimulation and each equivalence class is keyed by an intrinsic serialization
of its minimal automaton.  Two nodes obtained from the same store are therefore
bisimilar exactly when they are the same object, and all the structural
algorithms in the package lean on that identity.
"""

from __future__ import annotations

import re

Label = str
Participant = str

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_KEYWORDS = frozenset({"rec", "let", "end"})


class TermError(ValueError):
    """A term violates a structural invariant."""


class UnboundVariable(TermError):
    def __init__(self, name):
        super().__init__(f"unbound recursion variable {name!r}")
        self.name = name


class UnguardedRecursion(TermError):
    def __init__(self, name):
        super().__init__(f"recursion on {name!r} never passes an input or output prefix")
        self.name = name


def check_ident(name, what="identifier"):
    if not isinstance(name, str) or not _IDENT_RE.match(name) or name in _KEYWORDS:
        raise TermError(f"{what} must be an identifier, got {name!r}")
    return name


# ---------------------------------------------------------------------------
# Nodes.  Plain classes with identity semantics; instances are created by the
# store only and are immutable afterwards by convention.

class Node:
    __slots__ = ("store", "nid")

    def __hash__(self):
        return object.__hash__(self)

    def __eq__(self, other):
        return self is other


class Process(Node):
    __slots__ = ()


class PEnd(Process):
    __slots__ = ()

    def __repr__(self):
        return "<proc 0>"


class PIn(Process):
    __slots__ = ("peer", "branches")

    def __repr__(self):
        return f"<proc {self.peer}?{{{','.join(l for l, _ in self.branches)}}}#{self.nid}>"


class POut(Process):
    __slots__ = ("peer", "branches")

    def __repr__(self):
        return f"<proc {self.peer}!{{{','.join(l for l, _ in self.branches)}}}#{self.nid}>"


class GlobalType(Node):
    __slots__ = ()


class GEnd(GlobalType):
    __slots__ = ()

    def __repr__(self):
        return "<global end>"


class GComm(GlobalType):
    __slots__ = ("sender", "receiver", "branches")

    def __repr__(self):
        labels = ",".join(l for l, _ in self.branches)
        return f"<global {self.sender}->{self.receiver}:{{{labels}}}#{self.nid}>"


def node_labels(n):
    return tuple(l for l, _ in n.branches)


def node_branch(n, label):
    for l, child in n.branches:
        if l == label:
            return child
    raise KeyError(label)


def _desc_shape(n):
    """Shape of a node excluding children, as a hashable tuple."""
    if isinstance(n, PEnd):
        return ("pend",)
    if isinstance(n, PIn):
        return ("pin", n.peer, node_labels(n))
    if isinstance(n, POut):
        return ("pout", n.peer, node_labels(n))
    if isinstance(n, GEnd):
        return ("gend",)
    if isinstance(n, GComm):
        return ("gcomm", n.sender, n.receiver, node_labels(n))
    raise TypeError(n)


def _node_children(n):
    if isinstance(n, (PEnd, GEnd)):
        return ()
    return tuple(child for _, child in n.branches)


# ---------------------------------------------------------------------------
# Store and interning.

class NodeStore:
    """Interning arena for process and global-type nodes.

    Built by a single owner; safe to read from many threads afterwards.  The
    store also hosts memo tables for the coinductive relations and for
    analyses keyed by node identity.
    """

    def __init__(self):
        self._canon = {}          # intrinsic key -> node
        self._count = 0
        self._pt = {}             # nid -> frozenset of participants
        self._rel_true = set()    # (rel, nid, nid) proven pairs
        self._rel_false = set()
        self._memos = {}
        self.end_process = self._intern([("pend",)], [("d", 0)])[0]
        self.end_global = self._intern([("gend",)], [("d", 0)])[0]

    def memo(self, name):
        """A named per-store memo table (used by the analyses)."""
        return self._memos.setdefault(name, {})

    def builder(self):
        return GraphBuilder(self)

    # one-shot constructors (children must already be nodes)
    def process_in(self, peer, branches):
        b = self.builder()
        return b.intern([b.add_in(peer, branches)])[0]

    def process_out(self, peer, branches):
        b = self.builder()
        return b.intern([b.add_out(peer, branches)])[0]

    def comm(self, sender, receiver, branches):
        b = self.builder()
        return b.intern([b.add_comm(sender, receiver, branches)])[0]

    def adopt(self, node):
        """Re-intern a node from another store into this one."""
        if node.store is self:
            return node
        b = self.builder()
        return b.intern([node])[0]

    # -- interning pipeline -------------------------------------------------

    def _intern(self, drafts, roots):
        """Intern a draft graph; returns the canonical node for each root.

        drafts: list of shape tuples whose branch targets are ("d", i) or
        ("n", node); roots: list of such references.
        """
        units = []
        index = {}

        def unit_of(ref):
            if ref in index:
                return index[ref]
            index[ref] = len(units)
            units.append(ref)
            return index[ref]

        def raw(ref):
            if ref[0] == "d":
                d = drafts[ref[1]]
                if d is None:
                    raise RuntimeError("interning a reserved but unfilled draft node")
                return d
            n = ref[1]
            shape = _desc_shape(n)
            if isinstance(n, (PEnd, GEnd)):
                return shape
            return (shape[0], *shape[1:-1], tuple((l, ("n", c)) for l, c in n.branches))

        # closure over reachable units
        work = [unit_of(r) for r in roots]
        seen = set(work)
        while work:
            u = work.pop()
            d = raw(units[u])
            if d[0] in ("pend", "gend"):
                continue
            for _, target in d[-1]:
                v = unit_of(target)
                if v not in seen:
                    seen.add(v)
                    work.append(v)
        # normalized shape + child unit ids, in label order
        shapes = [None] * len(units)
        children = [None] * len(units)
        for u, ref in enumerate(units):
            d = raw(ref)
            if d[0] == "pend":
                shapes[u] = ("pend",)
                children[u] = ()
            elif d[0] == "gend":
                shapes[u] = ("gend",)
                children[u] = ()
            elif d[0] in ("pin", "pout"):
                shapes[u] = (d[0], d[1], tuple(l for l, _ in d[2]))
                children[u] = tuple(index[t] for _, t in d[2])
            else:
                shapes[u] = ("gcomm", d[1], d[2], tuple(l for l, _ in d[3]))
                children[u] = tuple(index[t] for _, t in d[3])

        # partition refinement to bisimulation classes
        block = {}
        groups = {}
        for u in range(len(units)):
            groups.setdefault(shapes[u], []).append(u)
        for i, g in enumerate(groups.values()):
            for u in g:
                block[u] = i
        while True:
            sigs = {}
            for u in range(len(units)):
                sig = (block[u], tuple(block[c] for c in children[u]))
                sigs.setdefault(sig, []).append(u)
            if len(sigs) == len(set(block.values())):
                break
            for i, g in enumerate(sigs.values()):
                for u in g:
                    block[u] = i

        classes = {}
        for u in range(len(units)):
            classes.setdefault(block[u], []).append(u)

        def class_node(cls):
            for u in classes[cls]:
                if units[u][0] == "n":
                    return units[u][1]
            return None

        def class_children(cls):
            u = classes[cls][0]
            return tuple(block[c] for c in children[u])

        def class_shape(cls):
            return shapes[classes[cls][0]]

        def serialize(root_cls):
            visit = {}

            def emit(cls):
                if cls in visit:
                    return ("#", visit[cls])
                visit[cls] = len(visit)
                return (class_shape(cls), tuple(emit(c) for c in class_children(cls)))

            return emit(root_cls)

        mapped = {}

        def materialize(cls):
            if cls in mapped:
                return mapped[cls]
            existing = class_node(cls)
            if existing is not None:
                mapped[cls] = existing
                return existing
            key = serialize(cls)
            hit = self._canon.get(key)
            if hit is not None:
                mapped[cls] = hit
                return hit
            shape = class_shape(cls)
            kinds = {"pend": PEnd, "pin": PIn, "pout": POut, "gend": GEnd, "gcomm": GComm}
            node = object.__new__(kinds[shape[0]])
            node.store = self
            node.nid = self._count
            self._count += 1
            self._canon[key] = node
            mapped[cls] = node
            labels = shape[-1] if shape[0] in ("pin", "pout", "gcomm") else ()
            kids = tuple(materialize(c) for c in class_children(cls))
            if shape[0] in ("pin", "pout"):
                node.peer = shape[1]
                node.branches = tuple(zip(labels, kids))
            elif shape[0] == "gcomm":
                node.sender = shape[1]
                node.receiver = shape[2]
                node.branches = tuple(zip(labels, kids))
            return node

        return [materialize(block[index[r]]) for r in roots]

    # -- participants -------------------------------------------------------

    def participants(self, node):
        cached = self._pt.get(node.nid)
        if cached is not None:
            return cached
        reach = []
        seen = set()
        stack = [node]
        while stack:
            n = stack.pop()
            if n.nid in seen:
                continue
            seen.add(n.nid)
            reach.append(n)
            for c in _node_children(n):
                if c.nid not in seen:
                    stack.append(c)
        own = {}
        for n in reach:
            if isinstance(n, (PIn, POut)):
                own[n.nid] = {n.peer}
            elif isinstance(n, GComm):
                own[n.nid] = {n.sender, n.receiver}
            else:
                own[n.nid] = set()
        # fixpoint over the reachable component; cached nodes act as constants
        changed = True
        while changed:
            changed = False
            for n in reach:
                acc = own[n.nid]
                before = len(acc)
                for c in _node_children(n):
                    cached_child = self._pt.get(c.nid)
                    acc |= cached_child if cached_child is not None else own[c.nid]
                if len(acc) != before:
                    changed = True
        for n in reach:
            if n.nid not in self._pt:
                self._pt[n.nid] = frozenset(own[n.nid])
        return self._pt[node.nid]


class GraphBuilder:
    """Accumulates a draft node graph, then interns it in one batch.

    Branch targets may be draft indices (for cycles), nodes of the target
    store, or nodes of a foreign store (copied in transparently).
    """

    def __init__(self, store):
        self.store = store
        self._drafts = []
        self._foreign = {}

    def reserve(self):
        self._drafts.append(None)
        return len(self._drafts) - 1

    def _ref(self, target):
        if isinstance(target, int):
            if not 0 <= target < len(self._drafts):
                raise TermError(f"draft reference {target} out of range")
            return ("d", target)
        if isinstance(target, Node):
            if target.store is self.store:
                return ("n", target)
            return ("d", self._copy_foreign(target))
        raise TypeError(f"branch target must be a draft index or node, got {target!r}")

    def _copy_foreign(self, node):
        if node in self._foreign:
            return self._foreign[node]
        i = self.reserve()
        self._foreign[node] = i
        if isinstance(node, PEnd):
            self._drafts[i] = ("pend",)
        elif isinstance(node, GEnd):
            self._drafts[i] = ("gend",)
        elif isinstance(node, PIn):
            self.fill_in(i, node.peer, [(l, c) for l, c in node.branches])
        elif isinstance(node, POut):
            self.fill_out(i, node.peer, [(l, c) for l, c in node.branches])
        else:
            self.fill_comm(i, node.sender, node.receiver, [(l, c) for l, c in node.branches])
        return i

    def _branches(self, branches, proc):
        out = []
        seen = set()
        for label, target in branches:
            check_ident(label, "label")
            if label in seen:
                raise TermError(f"duplicate branch label {label!r}")
            seen.add(label)
            ref = self._ref(target)
            if ref[0] == "n":
                want = Process if proc else GlobalType
                if not isinstance(ref[1], want):
                    raise TermError(f"branch {label!r} targets a node of the wrong kind")
            out.append((label, ref))
        if not out:
            raise TermError("a choice needs at least one branch")
        out.sort(key=lambda item: item[0])
        return tuple(out)

    def fill_in(self, i, peer, branches):
        check_ident(peer, "participant")
        self._drafts[i] = ("pin", peer, self._branches(branches, proc=True))
        return i

    def fill_out(self, i, peer, branches):
        check_ident(peer, "participant")
        self._drafts[i] = ("pout", peer, self._branches(branches, proc=True))
        return i

    def fill_comm(self, i, sender, receiver, branches):
        check_ident(sender, "participant")
        check_ident(receiver, "participant")
        if sender == receiver:
            raise TermError(f"{sender!r} cannot communicate with itself")
        self._drafts[i] = ("gcomm", sender, receiver, self._branches(branches, proc=False))
        return i

    def fill_copy(self, i, target):
        """Give draft i the same description as another draft or node."""
        ref = self._ref(target)
        if ref[0] == "d":
            desc = self._drafts[ref[1]]
            if desc is None:
                raise TermError("cannot copy an unfilled draft")
            self._drafts[i] = desc
        else:
            n = ref[1]
            if isinstance(n, PEnd):
                self._drafts[i] = ("pend",)
            elif isinstance(n, GEnd):
                self._drafts[i] = ("gend",)
            elif isinstance(n, PIn):
                self.fill_in(i, n.peer, list(n.branches))
            elif isinstance(n, POut):
                self.fill_out(i, n.peer, list(n.branches))
            else:
                self.fill_comm(i, n.sender, n.receiver, list(n.branches))
        return i

    def shape_of(self, target):
        """(kind, peer, labels) of a draft or node; None while still unfilled.

        kind is "end", "in", "out", or "comm"; peer is the other participant
        ((sender, receiver) for comm); labels the tuple of branch labels.
        """
        ref = self._ref(target)
        if ref[0] == "d":
            desc = self._drafts[ref[1]]
            if desc is None:
                return None
            tag = desc[0]
            if tag in ("pend", "gend"):
                return ("end", None, ())
            if tag == "gcomm":
                return ("comm", (desc[1], desc[2]), tuple(l for l, _ in desc[3]))
            return ("in" if tag == "pin" else "out",
                    desc[1], tuple(l for l, _ in desc[2]))
        n = ref[1]
        if isinstance(n, (PEnd, GEnd)):
            return ("end", None, ())
        if isinstance(n, GComm):
            return ("comm", (n.sender, n.receiver), node_labels(n))
        return ("in" if isinstance(n, PIn) else "out", n.peer, node_labels(n))

    def branch_targets(self, target):
        """[(label, draft index or node)] of a filled draft or node."""
        ref = self._ref(target)
        if ref[0] == "n":
            return list(ref[1].branches)
        desc = self._drafts[ref[1]]
        if desc is None or desc[0] in ("pend", "gend"):
            raise TermError("target has no branches")
        return [(l, r[1]) for l, r in desc[-1]]

    def add_in(self, peer, branches):
        return self.fill_in(self.reserve(), peer, branches)

    def add_out(self, peer, branches):
        return self.fill_out(self.reserve(), peer, branches)

    def add_comm(self, sender, receiver, branches):
        return self.fill_comm(self.reserve(), sender, receiver, branches)

    def intern(self, roots):
        return self.store._intern(self._drafts, [self._ref(r) for r in roots])


# ---------------------------------------------------------------------------
# Terms -> nodes.  Surface terms are nested tuples:
#   ("end",) | ("var", name) | ("rec", name, body)
#   | ("in", peer, [(label, term), ...]) | ("out", peer, [(label, term), ...])
#   | ("comm", sender, receiver, [(label, term), ...])
# `defs` supplies mutually recursive named equations (the `let` form).

class _Slot:
    __slots__ = ("draft", "state", "alias")
    # state: 0 = pending, 1 = resolving, 2 = done

    def __init__(self, draft):
        self.draft = draft
        self.state = 0
        self.alias = None


def _intern_term(store, term, defs, proc):
    b = store.builder()
    slots = {}
    if defs:
        for name in defs:
            check_ident(name, "definition name")
            slots[name] = _Slot(b.reserve())

    end_node = store.end_process if proc else store.end_global

    def resolve(t, env, guarded):
        tag = t[0]
        if tag == "end":
            return end_node
        if tag == "var":
            name = t[1]
            slot = env.get(name)
            if slot is None:
                raise UnboundVariable(name)
            if slot.state == 2:
                return slot.alias if slot.alias is not None else slot.draft
            if not guarded:
                # a cycle of bare aliases never produces a prefix
                if slot.state == 1:
                    raise UnguardedRecursion(name)
                return ("alias", name, slot)
            return slot.draft
        if tag == "rec":
            _, name, body = t
            slot = _Slot(b.reserve())
            inner = dict(env)
            inner[name] = slot
            define(name, slot, body, inner)
            return slot.alias if slot.alias is not None else slot.draft
        if tag == "in" and proc:
            return b.add_in(t[1], [(l, subref(c, env)) for l, c in t[2]])
        if tag == "out" and proc:
            return b.add_out(t[1], [(l, subref(c, env)) for l, c in t[2]])
        if tag == "comm" and not proc:
            return b.add_comm(t[1], t[2], [(l, subref(c, env)) for l, c in t[3]])
        raise TermError(f"unexpected term {t!r}")

    def subref(t, env):
        r = resolve(t, env, guarded=True)
        if isinstance(r, tuple) and r and r[0] == "alias":
            # guarded position: the slot's draft stands in for the value
            return r[2].draft
        return r

    def define(name, slot, body, env):
        slot.state = 1
        r = resolve(body, env, guarded=False)
        if isinstance(r, tuple) and r and r[0] == "alias":
            slot.alias = r
            slot.state = 2
            return
        _assign(slot, r)

    def _assign(slot, r):
        if isinstance(r, Node):
            if isinstance(r, (PEnd, GEnd)):
                b._drafts[slot.draft] = ("pend",) if proc else ("gend",)
            else:
                b._drafts[slot.draft] = b._drafts[b._copy_foreign(r)] if r.store is not store \
                    else _desc_of(r)
        else:
            b._drafts[slot.draft] = b._drafts[r]
        slot.alias = None
        slot.state = 2

    def _desc_of(n):
        shape = _desc_shape(n)
        if shape[0] in ("pend", "gend"):
            return shape
        return (shape[0], *shape[1:-1], tuple((l, ("n", c)) for l, c in n.branches))

    if defs:
        for name, body in defs.items():
            slot = slots[name]
            if slot.state == 0:
                define(name, slot, body, slots)
        # chase alias chains left by definitions like `let A = B`
        for name, slot in slots.items():
            if slot.alias is not None:
                seen = {name}
                cur = slot.alias
                while True:
                    _, target_name, target = cur
                    if target.alias is None:
                        _assign(slot, target.draft)
                        break
                    if target_name in seen:
                        raise UnguardedRecursion(target_name)
                    seen.add(target_name)
                    cur = target.alias

    root = resolve(term, slots, guarded=False)
    if isinstance(root, tuple) and root and root[0] == "alias":
        slot = root[2]
        if slot.alias is not None:
            raise UnguardedRecursion(root[1])
        root = slot.draft
    return b.intern([root])[0]


def intern_process(store, term, defs=None):
    """Tie a surface term (with optional named equations) into a canonical graph."""
    return _intern_term(store, term, defs or {}, proc=True)


def intern_global(store, term, defs=None):
    return _intern_term(store, term, defs or {}, proc=False)


# ---------------------------------------------------------------------------
# Participants and bisimulation.

def participants_of_process(P):
    return P.store.participants(P)


def participants_of_global(G):
    return G.store.participants(G)


def coinductive_closure(rel, a, b, step, reflexive):
    """Decide a coinductive binary relation on nodes.

    `step(x, y)` returns the child pairs a pair requires, or None if the pair
    fails its structural side conditions.  The required pairs of a pair are
    unique, so membership in the greatest fixpoint is equivalent to local
    consistency of the requirement closure.  Results are cached on the store
    when both nodes live in the same one.
    """
    seen = {(a, b)}
    work = [(a, b)]
    failed = None
    while work:
        x, y = work.pop()
        if reflexive and x is y:
            continue
        same = x.store is y.store
        if same:
            key = (rel, x.nid, y.nid)
            if key in x.store._rel_true:
                continue
            if key in x.store._rel_false:
                failed = (x, y)
                break
        reqs = step(x, y)
        if reqs is None:
            failed = (x, y)
            break
        for pair in reqs:
            if pair not in seen:
                seen.add(pair)
                work.append(pair)
    if failed is not None:
        for x, y in (failed, (a, b)):
            if x.store is y.store:
                x.store._rel_false.add((rel, x.nid, y.nid))
        return False
    for x, y in seen:
        if x.store is y.store:
            x.store._rel_true.add((rel, x.nid, y.nid))
    return True


def _bisim_step(x, y):
    if type(x) is not type(y):
        return None
    if isinstance(x, (PEnd, GEnd)):
        return ()
    if isinstance(x, (PIn, POut)):
        if x.peer != y.peer or node_labels(x) != node_labels(y):
            return None
    else:
        if x.sender != y.sender or x.receiver != y.receiver or node_labels(x) != node_labels(y):
            return None
    return tuple((cx, cy) for (_, cx), (_, cy) in zip(x.branches, y.branches))


def bisim_process(P, Q):
    """True iff the infinite tree unfoldings of P and Q are identical."""
    return coinductive_closure("bisim", P, Q, _bisim_step, reflexive=True)


def bisim_global(G, H):
    return coinductive_closure("bisim", G, H, _bisim_step, reflexive=True)


# ---------------------------------------------------------------------------
# Sessions.

class Session:
    """Finite map from participants to processes (a parallel composition)."""

    __slots__ = ("_bindings",)

    def __init__(self, bindings):
        items = dict(bindings)
        for p, proc in items.items():
            check_ident(p, "participant")
            if not isinstance(proc, Process):
                raise TermError(f"binding for {p!r} is not a process")
            if p in participants_of_process(proc):
                raise TermError(f"participant {p!r} communicates with itself")
        self._bindings = dict(sorted(items.items()))

    @property
    def participants(self):
        return tuple(self._bindings)

    def items(self):
        return tuple(self._bindings.items())

    def __getitem__(self, p):
        return self._bindings[p]

    def get(self, p, default=None):
        return self._bindings.get(p, default)

    def __contains__(self, p):
        return p in self._bindings

    def __len__(self):
        return len(self._bindings)

    def __iter__(self):
        return iter(self._bindings)

    def __eq__(self, other):
        return isinstance(other, Session) and self.items() == other.items()

    def __hash__(self):
        return hash(self.items())

    def __repr__(self):
        inner = " || ".join(f"{p}[{proc!r}]" for p, proc in self.items())
        return f"<session {inner}>"

    def mentioned(self):
        """All participants occurring in the session, bound or as peers."""
        out = set(self._bindings)
        for proc in self._bindings.values():
            out |= participants_of_process(proc)
        return frozenset(out)

    def is_final(self):
        return all(isinstance(p, PEnd) for p in self._bindings.values())

    def rebind(self, updates):
        merged = dict(self._bindings)
        merged.update(updates)
        return Session(merged)


def normalize_session(M):
    """Drop terminated bindings; the result is congruent to the input."""
    return Session((p, proc) for p, proc in M.items() if not isinstance(proc, PEnd))


def sessions_bisimilar(M, N):
    """Equal domains and pairwise bisimilar processes."""
    if M.participants != N.participants:
        return False
    return all(bisim_process(M[p], N[p]) for p in M.participants)
