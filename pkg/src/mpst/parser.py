"""Surface syntax for processes, global types, and sessions.

Grammar (ASCII, one definition per file, optional shared equations):

    file     ::= ("let" ident "=" term)* term
    process  ::= "0" | "rec" ident "." process | ident "!" branches
               | ident "?" branches | ident
    global   ::= "end" | "rec" ident "." global
               | ident "->" ident ":" gbranches | ident
    branches ::= branch | "{" branch ("," branch)* "}"
    branch   ::= ident ["." term]          -- omitted continuation means 0/end
    session  ::= ident "|>" process ("||" ident "|>" process)*

Pretty-printers introduce `rec X0 . ...` binders at back-edge targets and list
branches in label order, so output always reparses to a bisimilar value.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import (
    GEnd,
    GlobalType,
    PEnd,
    Process,
    NodeStore,
    Session,
    TermError,
    UnboundVariable,
    UnguardedRecursion,
    intern_global,
    intern_process,
    participants_of_process,
)


class DiagKind(Enum):
    Syntax = "Syntax"
    UnboundVar = "UnboundVar"
    UnguardedRec = "UnguardedRec"
    DuplicateLabel = "DuplicateLabel"
    SelfCommunication = "SelfCommunication"
    DuplicateParticipant = "DuplicateParticipant"


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    span: SourceSpan
    kind: DiagKind
    message: str
    subject: str | None = None  # offending label or participant, when applicable

    def __str__(self):
        return f"{self.span}: {self.kind.value}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


_PUNCT = ("->", "|>", "||", "!", "?", "{", "}", ".", ",", ":", "=", "0")


class _Lexer:
    def __init__(self, text, filename):
        self.text = text
        self.filename = filename
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens = []
        self._scan()
        self.at = 0

    def span(self, line=None, col=None):
        return SourceSpan(self.filename, line or self.line, col or self.col)

    def _fail(self, message, line, col):
        raise ParseError(ParseDiagnostic(self.span(line, col), DiagKind.Syntax, message))

    def _scan(self):
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == "\n":
                self.pos += 1
                self.line += 1
                self.col = 1
                continue
            if ch in " \t\r":
                self.pos += 1
                self.col += 1
                continue
            if ch == "#":  # comment to end of line
                while self.pos < len(text) and text[self.pos] != "\n":
                    self.pos += 1
                continue
            start_line, start_col = self.line, self.col
            if ch.isalpha() or ch == "_":
                end = self.pos
                while end < len(text) and (text[end].isalnum() or text[end] == "_"):
                    end += 1
                word = text[self.pos:end]
                self.tokens.append((word if word in ("rec", "let", "end") else "ident",
                                    word, start_line, start_col))
                self.col += end - self.pos
                self.pos = end
                continue
            for p in _PUNCT:
                if text.startswith(p, self.pos):
                    self.tokens.append((p, p, start_line, start_col))
                    self.pos += len(p)
                    self.col += len(p)
                    break
            else:
                self._fail(f"unexpected character {ch!r}", start_line, start_col)
        self.tokens.append(("eof", "", self.line, self.col))

    def peek(self):
        return self.tokens[self.at]

    def next(self):
        tok = self.tokens[self.at]
        if tok[0] != "eof":
            self.at += 1
        return tok

    def expect(self, kind, what=None):
        tok = self.peek()
        if tok[0] != kind:
            got = tok[1] or "end of input"
            raise ParseError(ParseDiagnostic(
                SourceSpan(self.filename, tok[2], tok[3]), DiagKind.Syntax,
                f"expected {what or kind!r}, got {got!r}"))
        return self.next()


class _Parser:
    def __init__(self, text, filename, glob):
        self.lx = _Lexer(text, filename)
        self.glob = glob
        self.binder_spans = {}
        self.var_spans = {}

    def _diag(self, span, kind, message, subject=None):
        raise ParseError(ParseDiagnostic(span, kind, message, subject))

    def _tok_span(self, tok):
        return SourceSpan(self.lx.filename, tok[2], tok[3])

    def parse_defs(self):
        defs = {}
        while self.lx.peek()[0] == "let":
            self.lx.next()
            name_tok = self.lx.expect("ident", "definition name")
            if name_tok[1] in defs:
                self._diag(self._tok_span(name_tok), DiagKind.Syntax,
                           f"duplicate definition of {name_tok[1]!r}")
            self.binder_spans.setdefault(name_tok[1], self._tok_span(name_tok))
            self.lx.expect("=")
            defs[name_tok[1]] = self.term()
        return defs

    def term(self):
        tok = self.lx.peek()
        if not self.glob and tok[0] == "0":
            self.lx.next()
            return ("end",)
        if self.glob and tok[0] == "end":
            self.lx.next()
            return ("end",)
        if tok[0] == "rec":
            self.lx.next()
            name_tok = self.lx.expect("ident", "recursion variable")
            self.binder_spans.setdefault(name_tok[1], self._tok_span(name_tok))
            self.lx.expect(".")
            return ("rec", name_tok[1], self.term())
        if tok[0] == "ident":
            self.lx.next()
            nxt = self.lx.peek()
            if self.glob and nxt[0] == "->":
                self.lx.next()
                recv_tok = self.lx.expect("ident", "receiver")
                if recv_tok[1] == tok[1]:
                    self._diag(self._tok_span(recv_tok), DiagKind.SelfCommunication,
                               f"participant {tok[1]!r} sends to itself", subject=tok[1])
                self.lx.expect(":")
                return ("comm", tok[1], recv_tok[1], self.branches())
            if not self.glob and nxt[0] in ("!", "?"):
                self.lx.next()
                branches = self.branches()
                return ("out" if nxt[0] == "!" else "in", tok[1], branches)
            self.var_spans.setdefault(tok[1], self._tok_span(tok))
            return ("var", tok[1])
        got = tok[1] or "end of input"
        self._diag(self._tok_span(tok), DiagKind.Syntax, f"expected a term, got {got!r}")

    def branches(self):
        if self.lx.peek()[0] != "{":
            label, term, _ = self.branch()
            return [(label, term)]
        self.lx.next()
        out = [self.branch()]
        labels = {out[0][0]}
        while self.lx.peek()[0] == ",":
            self.lx.next()
            br = self.branch()
            if br[0] in labels:
                self._diag(br[2], DiagKind.DuplicateLabel,
                           f"branch label {br[0]!r} repeated", subject=br[0])
            labels.add(br[0])
            out.append(br)
        self.lx.expect("}")
        return [(l, t) for l, t, _ in out]

    def branch(self):
        label_tok = self.lx.expect("ident", "branch label")
        span = self._tok_span(label_tok)
        if self.lx.peek()[0] == ".":
            self.lx.next()
            return (label_tok[1], self.term(), span)
        return (label_tok[1], ("end",), span)


def _intern(parser, store, term, defs, glob):
    try:
        if glob:
            return intern_global(store, term, defs)
        return intern_process(store, term, defs)
    except UnboundVariable as e:
        span = parser.var_spans.get(e.name) or SourceSpan(parser.lx.filename, 1, 1)
        raise ParseError(ParseDiagnostic(span, DiagKind.UnboundVar, str(e), e.name)) from e
    except UnguardedRecursion as e:
        span = parser.binder_spans.get(e.name) or SourceSpan(parser.lx.filename, 1, 1)
        raise ParseError(ParseDiagnostic(span, DiagKind.UnguardedRec, str(e), e.name)) from e
    except TermError as e:
        raise ParseError(ParseDiagnostic(SourceSpan(parser.lx.filename, 1, 1),
                                         DiagKind.Syntax, str(e))) from e


def parse_process(text, store=None, filename="<proc>"):
    store = store or NodeStore()
    p = _Parser(text, filename, glob=False)
    defs = p.parse_defs()
    term = p.term()
    p.lx.expect("eof", "end of input")
    return _intern(p, store, term, defs, glob=False)


def parse_global(text, store=None, filename="<gt>"):
    store = store or NodeStore()
    p = _Parser(text, filename, glob=True)
    defs = p.parse_defs()
    term = p.term()
    p.lx.expect("eof", "end of input")
    return _intern(p, store, term, defs, glob=True)


def parse_session(text, store=None, filename="<sess>"):
    store = store or NodeStore()
    p = _Parser(text, filename, glob=False)
    defs = p.parse_defs()
    bindings = []
    spans = {}
    while True:
        part_tok = p.lx.expect("ident", "participant")
        p.lx.expect("|>")
        term = p.term()
        if part_tok[1] in spans:
            raise ParseError(ParseDiagnostic(
                p._tok_span(part_tok), DiagKind.DuplicateParticipant,
                f"participant {part_tok[1]!r} bound twice", part_tok[1]))
        spans[part_tok[1]] = p._tok_span(part_tok)
        bindings.append((part_tok[1], term))
        if p.lx.peek()[0] != "||":
            break
        p.lx.next()
    p.lx.expect("eof", "end of input")
    resolved = [(part, _intern(p, store, term, defs, glob=False))
                for part, term in bindings]
    for part, proc in resolved:
        if part in participants_of_process(proc):
            raise ParseError(ParseDiagnostic(
                spans[part], DiagKind.SelfCommunication,
                f"participant {part!r} communicates with itself", part))
    return Session(resolved)


# ---------------------------------------------------------------------------
# Printers.

def _print_node(root, glob):
    counter = [0]
    end_text = "end" if glob else "0"

    def go(n, stack):
        if isinstance(n, (PEnd, GEnd)):
            return end_text
        if n in stack:
            if stack[n] is None:
                stack[n] = f"X{counter[0]}"
                counter[0] += 1
            return stack[n]
        stack[n] = None
        parts = [f"{label} . {go(child, stack)}" for label, child in n.branches]
        if len(parts) == 1:
            body_branches = parts[0]
        else:
            body_branches = "{" + ", ".join(parts) + "}"
        if glob:
            body = f"{n.sender} -> {n.receiver} : {body_branches}"
        else:
            op = "?" if type(n).__name__ == "PIn" else "!"
            body = f"{n.peer}{op}{body_branches}"
        name = stack.pop(n)
        if name is not None:
            body = f"rec {name} . {body}"
        return body

    return go(root, {})


def print_process(P):
    return _print_node(P, glob=False)


def print_global(G):
    return _print_node(G, glob=True)


def print_session(M):
    return " || ".join(f"{p} |> {print_process(proc)}" for p, proc in M.items())
