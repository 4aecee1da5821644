"""Lexer, parser, and canonical printer for the probabilistic rule language.

The language covers annotated disjunctions over ground-able atoms, with
optional probability scaling through ``is`` bindings, plus ``query`` and
``evidence`` directives.  A ``.plx`` file is a sequence of statements::

    0.10::salivation(X,decreased); 0.10::salivation(X,increased); 0.80::salivation(X,usual).
    4*P::diagnosis(X,a); P::diagnosis(X,b) :- finding(X,v), P is 0.2.
    diagnosis(X,c) :- finding(X,v1), finding(X,v2).
    query(diagnosis(pt,a)).
    evidence(finding(pt,v), true).

The full grammar is documented in ``docs/rulelang.md``.  Parsing is pure:
the same text always yields the same `Program`, and any malformed input
raises `ParseError` (never crashes).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class ParseError(Exception):
    """Raised for lexical and syntactic errors, with source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")


class SemanticError(ParseError):
    """A structurally valid statement that violates a program invariant."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Constant | Variable


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class ConstProb:
    value: float

    def __str__(self) -> str:
        return _fmt_num(self.value)


@dataclass(frozen=True)
class ScaledProb:
    coefficient: float
    var: Variable

    def __str__(self) -> str:
        if self.coefficient == 1.0:
            return self.var.name
        return f"{_fmt_num(self.coefficient)}*{self.var.name}"


ProbExpr = ConstProb | ScaledProb


@dataclass(frozen=True)
class Binding:
    """A ``Var is value`` literal binding a probability variable."""

    var: Variable
    value: float

    def __str__(self) -> str:
        return f"{self.var.name} is {_fmt_num(self.value)}"


@dataclass(frozen=True)
class Clause:
    head: tuple[tuple[ProbExpr, Atom], ...]
    body: tuple[Atom | Binding, ...]
    deterministic: bool

    def head_atoms(self) -> tuple[Atom, ...]:
        return tuple(a for _, a in self.head)

    def body_atoms(self) -> tuple[Atom, ...]:
        return tuple(lit for lit in self.body if isinstance(lit, Atom))

    def bindings(self) -> tuple[Binding, ...]:
        return tuple(lit for lit in self.body if isinstance(lit, Binding))

    def is_prior_group(self) -> bool:
        """Annotated disjunction with no body atoms (an unconditioned choice)."""
        return not self.deterministic and not self.body_atoms()

    def __str__(self) -> str:
        return format_clause(self)


@dataclass(frozen=True)
class Program:
    clauses: tuple[Clause, ...]
    queries: tuple[Atom, ...] = ()
    evidence: tuple[tuple[Atom, bool], ...] = ()


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

SYM = "SYM"
VAR = "VAR"
NUM = "NUM"
COLONCOLON = "::"
IMPLIES = ":-"
SEMI = ";"
COMMA = ","
DOT = "."
LPAREN = "("
RPAREN = ")"
STAR = "*"
IS = "is"
EOF = "EOF"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    value: float | None
    line: int
    column: int

    def __str__(self) -> str:
        return self.text or self.kind


_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>%[^\n]*)
    | (?P<num>\d+(?:\.\d+)?)
    | (?P<sym>[a-z][A-Za-z0-9_]*)
    | (?P<var>[A-Z][A-Za-z0-9_]*)
    | (?P<coloncolon>::)
    | (?P<implies>:-)
    | (?P<semi>;)
    | (?P<comma>,)
    | (?P<dot>\.)
    | (?P<lparen>\()
    | (?P<rparen>\))
    | (?P<star>\*)
    """,
    re.VERBOSE,
)

_GROUP_KIND = {
    "num": NUM,
    "sym": SYM,
    "var": VAR,
    "coloncolon": COLONCOLON,
    "implies": IMPLIES,
    "semi": SEMI,
    "comma": COMMA,
    "dot": DOT,
    "lparen": LPAREN,
    "rparen": RPAREN,
    "star": STAR,
}


def tokenize(source: str) -> list[Token]:
    """Scan rule-language text into a token list.

    Comments (``%`` to end of line) and whitespace are skipped.  Any other
    character raises `ParseError` with its line and column.
    """
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            col = pos - line_start + 1
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "ws" or kind == "comment":
            pass
        elif kind == "num":
            tokens.append(Token(NUM, text, float(text), line, col))
        elif kind == "sym" and text == "is":
            tokens.append(Token(IS, text, None, line, col))
        else:
            tokens.append(Token(_GROUP_KIND[kind], text, None, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_PROB_SUM_TOL = 1e-9

_DIRECTIVES = ("query", "evidence")


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = list(tokens)
        self.tokens.append(Token(EOF, "", None, -1, -1))
        self.pos = 0

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or tok.kind!r}",
                             tok.line, tok.column)
        return self.advance()

    # -- grammar ------------------------------------------------------------

    def parse_program(self) -> Program:
        clauses: list[Clause] = []
        queries: list[Atom] = []
        evidence: list[tuple[Atom, bool]] = []
        while self.peek().kind != EOF:
            tok = self.peek()
            if tok.kind == SYM and tok.text in _DIRECTIVES and self.peek(1).kind == LPAREN:
                self.parse_directive(queries, evidence)
            else:
                clauses.append(self.parse_clause(len(clauses)))
        program = Program(tuple(clauses), tuple(queries), tuple(evidence))
        _check_program(program)
        return program

    def parse_directive(self, queries: list, evidence: list) -> None:
        name = self.expect(SYM)
        self.expect(LPAREN)
        atom = self.parse_atom()
        _require_ground(atom, name)
        if name.text == "query":
            queries.append(atom)
        else:
            truth = True
            if self.peek().kind == COMMA:
                self.advance()
                flag = self.expect(SYM)
                if flag.text not in ("true", "false"):
                    raise ParseError("evidence truth value must be 'true' or 'false'",
                                     flag.line, flag.column)
                truth = flag.text == "true"
            evidence.append((atom, truth))
        self.expect(RPAREN)
        self.expect(DOT)

    def parse_clause(self, index: int) -> Clause:
        start = self.peek()
        head: list[tuple[ProbExpr | None, Atom]] = [self.parse_annotated_atom()]
        while self.peek().kind == SEMI:
            self.advance()
            head.append(self.parse_annotated_atom())
        body: list[Atom | Binding] = []
        if self.peek().kind == IMPLIES:
            self.advance()
            body.append(self.parse_literal())
            while self.peek().kind == COMMA:
                self.advance()
                body.append(self.parse_literal())
        self.expect(DOT)
        deterministic = len(head) == 1 and head[0][0] is None
        resolved = tuple((p if p is not None else ConstProb(1.0), a) for p, a in head)
        clause = Clause(resolved, tuple(body), deterministic)
        _check_clause(clause, index, start)
        return clause

    def parse_annotated_atom(self) -> tuple[ProbExpr | None, Atom]:
        tok = self.peek()
        if tok.kind == NUM:
            self.advance()
            if self.peek().kind == STAR:
                self.advance()
                var = self.expect(VAR)
                self.expect(COLONCOLON)
                if tok.value <= 0:
                    raise SemanticError("scaling coefficient must be positive",
                                        tok.line, tok.column)
                return ScaledProb(tok.value, Variable(var.text)), self.parse_atom()
            self.expect(COLONCOLON)
            if not 0.0 <= tok.value <= 1.0:
                raise SemanticError(f"probability {tok.text} outside [0, 1]",
                                    tok.line, tok.column)
            return ConstProb(tok.value), self.parse_atom()
        if tok.kind == VAR:
            self.advance()
            self.expect(COLONCOLON)
            return ScaledProb(1.0, Variable(tok.text)), self.parse_atom()
        return None, self.parse_atom()

    def parse_literal(self) -> Atom | Binding:
        tok = self.peek()
        if tok.kind == VAR:
            self.advance()
            self.expect(IS)
            num = self.expect(NUM)
            return Binding(Variable(tok.text), num.value)
        return self.parse_atom()

    def parse_atom(self) -> Atom:
        name = self.expect(SYM)
        args: list[Term] = []
        if self.peek().kind == LPAREN:
            self.advance()
            args.append(self.parse_term())
            while self.peek().kind == COMMA:
                self.advance()
                args.append(self.parse_term())
            self.expect(RPAREN)
        return Atom(name.text, tuple(args))

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == SYM:
            self.advance()
            return Constant(tok.text)
        if tok.kind == VAR:
            self.advance()
            return Variable(tok.text)
        raise ParseError(f"expected a constant or variable, found {tok.text or tok.kind!r}",
                         tok.line, tok.column)


def _require_ground(atom: Atom, tok: Token) -> None:
    if any(isinstance(a, Variable) for a in atom.args):
        raise SemanticError(f"{tok.text} directive requires a ground atom, got {atom}",
                            tok.line, tok.column)


def _check_clause(clause: Clause, index: int, start: Token) -> None:
    label = f"clause {index + 1} (`{format_clause(clause)}`)"
    bindings = clause.bindings()
    bound: dict[Variable, int] = {}
    for b in bindings:
        bound[b.var] = bound.get(b.var, 0) + 1
    for var, count in bound.items():
        if count > 1:
            raise SemanticError(f"{label}: variable {var} bound {count} times",
                                start.line, start.column)
    for prob, _ in clause.head:
        if isinstance(prob, ScaledProb) and prob.var not in bound:
            raise SemanticError(f"{label}: probability variable {prob.var} is never bound",
                                start.line, start.column)
    atom_vars = {t for a in clause.head_atoms() + clause.body_atoms()
                 for t in a.args if isinstance(t, Variable)}
    for var in bound:
        if var in atom_vars:
            raise SemanticError(f"{label}: bound variable {var} may not appear as an "
                                "atom argument", start.line, start.column)
    heads = clause.head_atoms()
    if len(set(heads)) != len(heads):
        raise SemanticError(f"{label}: head atoms must be pairwise distinct",
                            start.line, start.column)
    if all(isinstance(p, ConstProb) for p, _ in clause.head):
        total = sum(p.value for p, _ in clause.head)
        if not clause.deterministic and total > 1.0 + _PROB_SUM_TOL:
            raise SemanticError(f"{label}: head probabilities sum to {total:g} > 1",
                                start.line, start.column)


def _check_program(program: Program) -> None:
    arities: dict[str, tuple[int, int]] = {}

    def note(atom: Atom, where: int) -> None:
        seen = arities.get(atom.predicate)
        if seen is None:
            arities[atom.predicate] = (len(atom.args), where)
        elif seen[0] != len(atom.args):
            raise SemanticError(
                f"predicate {atom.predicate}/{len(atom.args)} at clause {where} "
                f"clashes with {atom.predicate}/{seen[0]} first used at clause {seen[1]}")

    for i, clause in enumerate(program.clauses, start=1):
        for atom in clause.head_atoms() + clause.body_atoms():
            note(atom, i)
    for atom in program.queries + tuple(a for a, _ in program.evidence):
        note(atom, len(program.clauses))

    deterministic_heads = {a.predicate for c in program.clauses if c.deterministic
                           for a in c.head_atoms()}
    for i, clause in enumerate(program.clauses, start=1):
        if clause.is_prior_group():
            for atom in clause.head_atoms():
                if atom.predicate in deterministic_heads:
                    raise SemanticError(
                        f"clause {i}: predicate {atom.predicate} heads both a prior "
                        "choice group and a deterministic rule")


def parse_program(tokens: list[Token]) -> Program:
    """Parse a token stream (from `tokenize`) into a validated `Program`."""
    return _Parser(tokens).parse_program()


def parse_text(source: str) -> Program:
    """Convenience wrapper: tokenize and parse in one step."""
    return parse_program(tokenize(source))


def parse_file(path) -> Program:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_text(fh.read())


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def _fmt_num(value: float) -> str:
    # repr keeps the exact float so parse(print(p)) is an identity
    return repr(value) if value != int(value) else str(int(value)) + ".0"


def format_clause(clause: Clause) -> str:
    if clause.deterministic:
        head = str(clause.head[0][1])
    else:
        head = "; ".join(f"{prob}::{atom}" for prob, atom in clause.head)
    if clause.body:
        body = ", ".join(str(lit) for lit in clause.body)
        return f"{head} :- {body}."
    return f"{head}."


def print_program(program: Program) -> str:
    """Emit canonical text such that ``parse_text(print_program(p))`` equals ``p``."""
    lines = [format_clause(c) for c in program.clauses]
    lines.extend(f"query({q})." for q in program.queries)
    lines.extend(f"evidence({a}, {'true' if t else 'false'})." for a, t in program.evidence)
    return "\n".join(lines) + ("\n" if lines else "")
