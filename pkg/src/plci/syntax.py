"""Concrete syntax for program structures, external databases, parameters and queries.

The surface language is Prolog-flavoured::

    random opens/2.
    _ :: opens(E,T) :- employee(E), tank(T).
    0.1 :: leaks(T) :- employee(E), tank(T), opens(E,T).
    connected(R,R) :- room(R).
    :- tank(T), stores(T,L1), stores(T,L2), L1 \\= L2.

Random clauses carry a probability (a decimal, a fraction ``n/d`` or ``_`` for
unspecified).  Predicates declared ``random`` are random, heads of ordinary
clauses are internal, and every other predicate is external.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Union

EQUALS = "="
NOT_EQUALS = "\\="
BUILTINS = (EQUALS, NOT_EQUALS)


class PlciError(Exception):
    """Base class for all input errors raised by this package."""


class ParseError(PlciError):
    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class ValidationError(PlciError):
    pass


# ---------------------------------------------------------------------------
# Terms, atoms, literals


def _term_key(name: str):
    # numerals sort numerically and before symbolic constants
    return (0, int(name), "") if name.isdigit() else (1, 0, name)


@dataclass(frozen=True)
class Term:
    kind: str  # "const" or "var"
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("term name must be non-empty")
        if self.kind == "var":
            if not (self.name[0].isupper() or self.name[0] == "_"):
                raise ValueError(f"variable {self.name!r} must start with an uppercase letter or '_'")
        elif self.kind == "const":
            if not (self.name[0].islower() or self.name.isdigit()):
                raise ValueError(f"constant {self.name!r} must start with a lowercase letter or be a numeral")
        else:
            raise ValueError(f"unknown term kind {self.kind!r}")

    @property
    def is_var(self) -> bool:
        return self.kind == "var"

    def __str__(self) -> str:
        return self.name


def const(name) -> Term:
    return Term("const", str(name))


def var(name: str) -> Term:
    return Term("var", name)


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple = ()
    builtin: Optional[str] = None

    def __post_init__(self):
        if self.builtin is not None:
            if self.builtin not in BUILTINS:
                raise ValueError(f"unknown builtin {self.builtin!r}")
            if len(self.args) != 2:
                raise ValueError("builtin atoms take exactly two arguments")

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_ground(self) -> bool:
        return not any(t.is_var for t in self.args)

    def variables(self) -> list:
        return [t.name for t in self.args if t.is_var]

    def substitute(self, binding: Mapping[str, str]) -> "Atom":
        args = tuple(const(binding[t.name]) if t.is_var and t.name in binding else t for t in self.args)
        return Atom(self.predicate, args, self.builtin)

    def values(self) -> tuple:
        """Argument names as a plain tuple (meaningful for ground atoms)."""
        return tuple(t.name for t in self.args)

    def sort_key(self):
        return (self.predicate, tuple(_term_key(t.name) for t in self.args))

    def __lt__(self, other: "Atom") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        if self.builtin is not None:
            return f"{self.args[0]} {self.builtin} {self.args[1]}"
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(t.name for t in self.args)})"


def ground_atom(predicate: str, *values) -> Atom:
    return Atom(predicate, tuple(const(v) for v in values))


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def variables(self) -> list:
        return self.atom.variables()

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"\\+{self.atom}"


@dataclass(frozen=True)
class Conj:
    items: tuple = ()


@dataclass(frozen=True)
class Disj:
    items: tuple = ()


Formula = Union[Literal, Conj, Disj]


def formula_literals(formula: Formula) -> Iterator[Literal]:
    if isinstance(formula, Literal):
        yield formula
    else:
        for item in formula.items:
            yield from formula_literals(item)


def formula_variables(formula: Formula) -> list:
    seen: dict = {}
    for lit in formula_literals(formula):
        for v in lit.variables():
            seen.setdefault(v, None)
    return list(seen)


def format_formula(formula: Formula, top: bool = True) -> str:
    if isinstance(formula, Literal):
        return str(formula)
    if isinstance(formula, Conj):
        return ", ".join(format_formula(item, top=False) for item in formula.items)
    text = "; ".join(format_formula(item, top=False) for item in formula.items)
    return f"({text})"


# ---------------------------------------------------------------------------
# Clauses and programs


def format_probability(p: Optional[Fraction]) -> str:
    if p is None:
        return "_"
    den = p.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{p.numerator}/{p.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(p.numerator)
    text = f"{p.numerator * 10 ** digits // p.denominator:0{digits + 1}d}"
    return f"{text[:-digits]}.{text[-digits:]}"


@dataclass(frozen=True)
class RandomClause:
    clause_id: int
    effect: Atom
    causes: tuple = ()
    condition: Conj = Conj()
    probability: Optional[Fraction] = None

    @property
    def variables(self) -> tuple:
        """Clause variables in first-occurrence order over effect, causes, condition."""
        seen: dict = {}
        for v in self.effect.variables():
            seen.setdefault(v, None)
        for lit in self.causes:
            for v in lit.variables():
                seen.setdefault(v, None)
        for v in formula_variables(self.condition):
            seen.setdefault(v, None)
        return tuple(seen)

    @property
    def is_positive(self) -> bool:
        return all(c.positive for c in self.causes)

    def __str__(self) -> str:
        body = [format_formula(item, top=False) for item in self.condition.items]
        body += [str(c) for c in self.causes]
        head = f"{format_probability(self.probability)} :: {self.effect}"
        return f"{head} :- {', '.join(body)}." if body else f"{head}."


@dataclass(frozen=True)
class InternalClause:
    head: Atom
    body: tuple = ()

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class Constraint:
    body: tuple = ()

    def __str__(self) -> str:
        return f":- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class VocabularyDecl:
    random: Mapping[str, int] = field(default_factory=dict)
    external: Mapping[str, int] = field(default_factory=dict)
    internal: Mapping[str, int] = field(default_factory=dict)

    def kind(self, predicate: str) -> Optional[str]:
        for name in ("random", "internal", "external"):
            if predicate in getattr(self, name):
                return name
        return None

    def arity(self, predicate: str) -> Optional[int]:
        for table in (self.random, self.internal, self.external):
            if predicate in table:
                return table[predicate]
        return None


@dataclass(frozen=True)
class ProgramStructure:
    decls: VocabularyDecl = field(default_factory=VocabularyDecl)
    random_part: tuple = ()
    internal_part: tuple = ()
    constraints: tuple = ()

    def constants(self) -> set:
        found = set()
        for rc in self.random_part:
            atoms = [rc.effect] + [c.atom for c in rc.causes]
            atoms += [lit.atom for lit in formula_literals(rc.condition)]
            found.update(t.name for a in atoms for t in a.args if not t.is_var)
        for clause in self.internal_part:
            atoms = [clause.head] + [lit.atom for lit in clause.body]
            found.update(t.name for a in atoms for t in a.args if not t.is_var)
        for c in self.constraints:
            found.update(t.name for lit in c.body for t in lit.atom.args if not t.is_var)
        return found

    def clause(self, clause_id: int) -> RandomClause:
        for rc in self.random_part:
            if rc.clause_id == clause_id:
                return rc
        raise KeyError(clause_id)

    def __str__(self) -> str:
        return format_program(self)


def format_program(program: ProgramStructure) -> str:
    lines = [f"random {name}/{arity}." for name, arity in program.decls.random.items()]
    lines += [str(rc) for rc in program.random_part]
    lines += [str(c) for c in program.internal_part]
    lines += [str(c) for c in program.constraints]
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class ExternalDatabase:
    facts: frozenset = frozenset()
    constants: frozenset = frozenset()

    def relations(self) -> dict:
        rels: dict = {}
        for fact in self.facts:
            rels.setdefault(fact.predicate, set()).add(fact.values())
        return rels

    def __len__(self) -> int:
        return len(self.facts)

    def __str__(self) -> str:
        return "".join(f"{fact}.\n" for fact in sorted(self.facts))


@dataclass(frozen=True)
class ParameterSpec:
    """Contents of a ``.params`` file before it is resolved against a program."""

    explicit: Mapping[int, Fraction] = field(default_factory=dict)
    default: Optional[Fraction] = None


@dataclass(frozen=True)
class CIQuery:
    a: Atom
    b: Atom
    observations: frozenset = frozenset()

    def __str__(self) -> str:
        obs = ", ".join(str(z) for z in sorted(self.observations))
        return f"indep({self.a}, {self.b}, [{obs}])"


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<op>::|:-|\\\+|\\==|\\=|=|\(|\)|,|;|\.|\[|\]|/)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "op" and chunk == "\\==":
                chunk = NOT_EQUALS
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self._anon = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.kind == "op" and tok.text == text

    def advance(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"syntax error: {message}, found {found}", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.peek().kind != kind:
            self.error(f"expected {what}")
        return self.advance()

    # terms and atoms

    def term(self) -> Term:
        tok = self.peek()
        if tok.kind == "var":
            self.advance()
            if tok.text == "_":
                self._anon += 1
                return var(f"_A{self._anon}")
            return var(tok.text)
        if tok.kind == "name":
            self.advance()
            return const(tok.text)
        if tok.kind == "number" and tok.text.isdigit():
            self.advance()
            return const(tok.text)
        self.error("expected a constant or variable")

    def atom(self) -> Atom:
        name = self.expect_kind("name", "a predicate name").text
        args: list = []
        if self.at("("):
            self.advance()
            args.append(self.term())
            while self.at(","):
                self.advance()
                args.append(self.term())
            self.expect(")")
        return Atom(name, tuple(args))

    def literal(self) -> Literal:
        if self.at("\\+"):
            self.advance()
            if self.at("("):
                self.advance()
                inner = self.literal()
                self.expect(")")
            else:
                inner = self.literal()
            return Literal(inner.atom, not inner.positive)
        tok = self.peek()
        if tok.kind == "name" and not self.at("(", 1) and (self.at("=", 1) or self.at(NOT_EQUALS, 1)):
            return self._builtin()
        if tok.kind in ("var", "number"):
            return self._builtin()
        return Literal(self.atom())

    def _builtin(self) -> Literal:
        left = self.term()
        tok = self.peek()
        if not (self.at("=") or self.at(NOT_EQUALS)):
            self.error("expected '=' or '\\=' after a term")
        self.advance()
        right = self.term()
        return Literal(Atom(tok.text, (left, right), builtin=tok.text))

    # formulas

    def disjunction(self) -> Formula:
        branches = [self.conjunction()]
        while self.at(";"):
            self.advance()
            branches.append(self.conjunction())
        return branches[0] if len(branches) == 1 else Disj(tuple(branches))

    def conjunction(self) -> Formula:
        items: list = []
        while True:
            items.extend(self._flatten(self.primary()))
            if not self.at(","):
                break
            self.advance()
        return items[0] if len(items) == 1 else Conj(tuple(items))

    @staticmethod
    def _flatten(item: Formula) -> list:
        return list(item.items) if isinstance(item, Conj) else [item]

    def primary(self) -> Formula:
        if self.at("("):
            self.advance()
            inner = self.disjunction()
            self.expect(")")
            return inner
        return self.literal()

    def probability(self) -> Optional[Fraction]:
        tok = self.peek()
        if tok.kind == "var" and tok.text == "_":
            self.advance()
            return None
        num = self.expect_kind("number", "a probability").text
        text = num
        if self.at("/"):
            self.advance()
            text += "/" + self.expect_kind("number", "a denominator").text
        try:
            p = Fraction(text)
        except (ValueError, ZeroDivisionError):
            self.error("invalid probability", tok)
        if not 0 <= p <= 1:
            raise ParseError(f"probability {text} outside [0, 1]", tok.line, tok.col)
        return p


# ---------------------------------------------------------------------------
# Program parsing and validation


@dataclass
class _RawRandom:
    probability: Optional[Fraction]
    effect: Atom
    body: Optional[Formula]
    token: Token


@dataclass
class _RawRule:
    head: Optional[Atom]  # None for constraints
    body: Optional[Formula]
    token: Token


def parse_program(text: str) -> ProgramStructure:
    """Parse and validate a program structure."""
    p = _Parser(text)
    decls: dict = {}
    randoms: list = []
    rules: list = []
    while p.peek().kind != "eof":
        start = p.peek()
        p._anon = 0
        if start.kind == "name" and start.text == "random" and p.peek(1).kind == "name":
            p.advance()
            name = p.advance().text
            p.expect("/")
            arity = int(p.expect_kind("number", "an arity").text)
            p.expect(".")
            _declare(decls, name, arity, start)
        elif start.kind == "name" and start.text == "random" and p.at("(", 1) and p.peek(2).kind == "name":
            p.advance()
            p.advance()
            name = p.advance().text
            p.expect(",")
            arity = int(p.expect_kind("number", "an arity").text)
            p.expect(")")
            p.expect(".")
            _declare(decls, name, arity, start)
        elif start.kind == "number" or (start.kind == "var" and start.text == "_" and p.at("::", 1)):
            prob = p.probability()
            p.expect("::")
            effect = p.atom()
            body = None
            if p.at(":-"):
                p.advance()
                body = p.disjunction()
            p.expect(".")
            randoms.append(_RawRandom(prob, effect, body, start))
        elif p.at(":-"):
            p.advance()
            body = p.disjunction()
            p.expect(".")
            rules.append(_RawRule(None, body, start))
        elif start.kind == "name":
            head = p.atom()
            if p.at("=") or p.at(NOT_EQUALS):
                p.error("builtin atoms cannot be clause heads")
            body = None
            if p.at(":-"):
                p.advance()
                body = p.disjunction()
            p.expect(".")
            rules.append(_RawRule(head, body, start))
        else:
            p.error("expected a declaration, clause or constraint")
    return _build_program(decls, randoms, rules)


def _declare(decls: dict, name: str, arity: int, tok: Token) -> None:
    if decls.get(name, arity) != arity:
        raise ValidationError(f"arity clash for random predicate {name}: {decls[name]} vs {arity} (line {tok.line})")
    decls[name] = arity


def _where(tok: Token) -> str:
    return f" (line {tok.line})"


def _build_program(decls: dict, randoms: list, rules: list) -> ProgramStructure:
    arities: dict = dict(decls)

    def note_arity(atom: Atom, tok: Token) -> None:
        if atom.builtin is not None:
            return
        known = arities.setdefault(atom.predicate, atom.arity)
        if known != atom.arity:
            raise ValidationError(
                f"arity clash for predicate {atom.predicate}: {known} vs {atom.arity}" + _where(tok))

    internal: dict = {}
    for rule in rules:
        if rule.head is None:
            continue
        if rule.head.predicate in decls:
            raise ValidationError(
                f"random predicate {rule.head.predicate}/{rule.head.arity} used as head of an internal clause"
                + _where(rule.token))
        note_arity(rule.head, rule.token)
        internal[rule.head.predicate] = rule.head.arity

    random_part = []
    for ordinal, raw in enumerate(randoms, start=1):
        effect = raw.effect
        if effect.predicate not in decls:
            kind = "internal" if effect.predicate in internal else "undeclared"
            if kind == "internal":
                raise ValidationError(
                    f"internal predicate {effect.predicate}/{effect.arity} used as effect of a random clause"
                    + _where(raw.token))
            raise ValidationError(
                f"undeclared random predicate {effect.predicate}/{effect.arity}" + _where(raw.token))
        note_arity(effect, raw.token)
        items = _top_items(raw.body)
        causes: list = []
        cond: list = []
        for item in items:
            if isinstance(item, Literal) and item.atom.builtin is None and item.atom.predicate in decls:
                note_arity(item.atom, raw.token)
                if item in causes:
                    raise ValidationError(f"duplicate cause {item}" + _where(raw.token))
                causes.append(item)
            else:
                _check_logical(item, decls, raw.token, note_arity)
                cond.append(item)
        condition = Conj(tuple(cond))
        clause_vars = set(effect.variables())
        for c in causes:
            clause_vars.update(c.variables())
        clause_vars.update(formula_variables(condition))
        _check_range(condition, clause_vars, raw.token)
        random_part.append(RandomClause(ordinal, effect, tuple(causes), condition, raw.probability))

    internal_part = []
    constraints = []
    for rule in rules:
        items = _top_items(rule.body)
        for item in items:
            if not isinstance(item, Literal):
                raise ValidationError(
                    "disjunction is only allowed in the condition of a random clause" + _where(rule.token))
            _check_logical(item, decls, rule.token, note_arity)
        body = tuple(items)
        clause_vars = set(formula_variables(Conj(body)))
        if rule.head is not None:
            clause_vars.update(rule.head.variables())
        _check_range(Conj(body), clause_vars, rule.token)
        if rule.head is None:
            if not body:
                raise ValidationError("empty constraint" + _where(rule.token))
            constraints.append(Constraint(body))
        else:
            internal_part.append(InternalClause(rule.head, body))

    external = {name: arity for name, arity in arities.items() if name not in decls and name not in internal}
    vocab = VocabularyDecl(dict(decls), external, internal)
    return ProgramStructure(vocab, tuple(random_part), tuple(internal_part), tuple(constraints))


def _top_items(body: Optional[Formula]) -> list:
    if body is None:
        return []
    if isinstance(body, Conj):
        return list(body.items)
    return [body]


def _check_logical(item: Formula, decls: dict, tok: Token, note_arity) -> None:
    for lit in formula_literals(item):
        if lit.atom.builtin is None and lit.atom.predicate in decls:
            raise ValidationError(f"random atom inside a condition: {lit.atom}" + _where(tok))
        note_arity(lit.atom, tok)


def bind_formula(formula: Formula, bound: frozenset) -> frozenset:
    """Variables bound after evaluating ``formula`` left to right.

    Positive database atoms of a conjunction bind first, then nested
    disjunctions (each binds the variables bound by every branch), then
    negative literals and builtins are tested.  Raises ``ValidationError``
    when a test would see an unbound variable.
    """
    if isinstance(formula, Literal):
        formula = Conj((formula,))
    if isinstance(formula, Disj):
        result = None
        for branch in formula.items:
            after = bind_formula(branch, bound)
            result = after if result is None else result & after
        return result if result is not None else bound
    bound = set(bound)
    for item in formula.items:
        if isinstance(item, Literal) and item.positive and item.atom.builtin is None:
            bound.update(item.variables())
    for item in formula.items:
        if not isinstance(item, Literal):
            bound |= bind_formula(item, frozenset(bound))
    for item in formula.items:
        if isinstance(item, Literal) and not (item.positive and item.atom.builtin is None):
            missing = set(item.variables()) - bound
            if missing:
                raise ValidationError(
                    f"range restriction violated: {', '.join(sorted(missing))} in {item} "
                    "does not occur in a positive database literal")
    return frozenset(bound)


def _check_range(condition: Conj, clause_vars: set, tok: Token) -> None:
    try:
        bound = bind_formula(condition, frozenset())
    except ValidationError as exc:
        raise ValidationError(str(exc) + _where(tok)) from None
    missing = clause_vars - bound
    if missing:
        raise ValidationError(
            f"range restriction violated: variable(s) {', '.join(sorted(missing))} "
            "do not occur in a positive external or internal literal of the body" + _where(tok))


# ---------------------------------------------------------------------------
# Databases, queries, parameters


def parse_database(text: str, program: Optional[ProgramStructure] = None) -> ExternalDatabase:
    """Parse ground facts; ``p(a), q(b).`` and one fact per line both work."""
    p = _Parser(text)
    facts: set = set()
    arities: dict = {}
    if program is not None:
        arities.update(program.decls.external)
    while p.peek().kind != "eof":
        while True:
            tok = p.peek()
            fact = p.atom()
            if p.at("=") or p.at(NOT_EQUALS):
                p.error("builtins are not allowed in a database")
            if not fact.is_ground:
                raise ValidationError(f"non-ground fact {fact}" + _where(tok))
            if program is not None and program.decls.kind(fact.predicate) in ("random", "internal"):
                raise ValidationError(
                    f"predicate {fact.predicate}/{fact.arity} is not declared external "
                    f"(it is {program.decls.kind(fact.predicate)})" + _where(tok))
            known = arities.setdefault(fact.predicate, fact.arity)
            if known != fact.arity:
                raise ValidationError(
                    f"arity clash for predicate {fact.predicate}: {known} vs {fact.arity}" + _where(tok))
            facts.add(fact)
            if not p.at(","):
                break
            p.advance()
        p.expect(".")
    constants = frozenset(t.name for f in facts for t in f.args)
    return ExternalDatabase(frozenset(facts), constants)


def parse_query(text: str, program: Optional[ProgramStructure] = None) -> CIQuery:
    """Parse ``indep(A, B, [Z1, ..., Zn])`` (``dseparates`` is accepted as an alias)."""
    p = _Parser(text)
    tok = p.expect_kind("name", "'indep'")
    if tok.text not in ("indep", "dseparates"):
        p.error("expected 'indep'", tok)
    p.expect("(")
    a = _query_atom(p, program)
    p.expect(",")
    b = _query_atom(p, program)
    p.expect(",")
    p.expect("[")
    obs: list = []
    if not p.at("]"):
        obs.append(_query_atom(p, program))
        while p.at(","):
            p.advance()
            obs.append(_query_atom(p, program))
    p.expect("]")
    p.expect(")")
    if p.at("."):
        p.advance()
    if p.peek().kind != "eof":
        p.error("unexpected trailing input")
    return CIQuery(a, b, frozenset(obs))


def _query_atom(p: _Parser, program: Optional[ProgramStructure]) -> Atom:
    tok = p.peek()
    atom = p.atom()
    if not atom.is_ground:
        raise ValidationError(f"non-ground atom {atom} in query" + _where(tok))
    if program is not None:
        kind = program.decls.kind(atom.predicate)
        if kind is None:
            raise ValidationError(f"unknown predicate {atom.predicate}/{atom.arity} in query" + _where(tok))
        if kind != "random":
            raise ValidationError(f"atom not random: {atom} is {kind}" + _where(tok))
        if program.decls.random[atom.predicate] != atom.arity:
            raise ValidationError(f"arity clash for predicate {atom.predicate} in query" + _where(tok))
    return atom


def parse_queries(text: str, program: Optional[ProgramStructure] = None) -> list:
    """One query per line; blank lines and ``%`` comments are skipped."""
    queries = []
    for line in text.splitlines():
        line = line.split("%", 1)[0].strip()
        if line:
            queries.append(parse_query(line, program))
    return queries


_PARAM_LINE = re.compile(r"^\s*(?P<key>default|(?:rc|RC)?\d+)\s*=\s*(?P<value>\S+)\s*$")


def parse_params(text: str) -> ParameterSpec:
    explicit: dict = {}
    default = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = re.split(r"[%#]", line, maxsplit=1)[0]
        if not line.strip():
            continue
        m = _PARAM_LINE.match(line)
        if m is None:
            raise ParseError(f"malformed parameter line {line.strip()!r}", lineno, 1)
        try:
            value = Fraction(m.group("value"))
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"invalid probability {m.group('value')!r}", lineno, 1) from None
        if not 0 <= value <= 1:
            raise ParseError(f"probability {m.group('value')} outside [0, 1]", lineno, 1)
        key = m.group("key")
        if key == "default":
            default = value
        else:
            explicit[int(key.lower().removeprefix("rc"))] = value
    return ParameterSpec(explicit, default)


def resolve_parameters(program: ProgramStructure, spec: Optional[ParameterSpec] = None) -> dict:
    """Total map clause_id -> probability.

    Precedence: explicit entry of ``spec``, then the probability written in the
    program, then ``spec.default``.  Raises ``ValidationError`` if a clause is
    left without a probability.
    """
    spec = spec or ParameterSpec()
    ids = {rc.clause_id for rc in program.random_part}
    unknown = set(spec.explicit) - ids
    if unknown:
        raise ValidationError(f"parameters given for unknown clause id(s) {sorted(unknown)}")
    params = {}
    for rc in program.random_part:
        p = spec.explicit.get(rc.clause_id, rc.probability)
        if p is None:
            p = spec.default
        if p is None:
            raise ValidationError(f"missing parameter for clause {rc.clause_id}: {rc}")
        params[rc.clause_id] = p
    return params


def with_parameters(program: ProgramStructure, params: Mapping[int, Fraction]) -> ProgramStructure:
    """Copy of ``program`` with the given probabilities written into its clauses."""
    part = tuple(
        RandomClause(rc.clause_id, rc.effect, rc.causes, rc.condition, params.get(rc.clause_id, rc.probability))
        for rc in program.random_part)
    return ProgramStructure(program.decls, part, program.internal_part, program.constraints)


def format_atoms(atoms: Iterable[Atom]) -> list:
    return [str(a) for a in sorted(atoms)]
