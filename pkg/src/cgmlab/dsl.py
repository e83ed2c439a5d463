"""Textual goal-model language: tokenizer, parser, and serializer.

Declarations:

    goal ID { label "..."; reward 10; root; assert satisfied; }
    task ID { penalty 15; }
    assumption ID;
    refinement R1: Target <- Src1, Src2;
    contribution A -> B;
    conflict A >< B;
    bind R1 = R2;
    prefer X > Y;
    attr cost of UsePartnerInstitutions = 80 when satisfied, 0 when denied;
    constraint FastSchedule -> (workTime < 5);
    assert ScheduleMeeting satisfied;
    objective lex minimize [penaltyMinusReward, workTime, cost];

Formulas use ``! & | -> <->`` with comparisons ``< <= = >= >`` over
linear expressions.  Comments run from ``//`` to end of line.  Errors
are reported as diagnostics with 1-based source spans, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .formula import (
    FALSE,
    TRUE,
    And,
    Formula,
    Iff,
    Implies,
    LinearAtom,
    Not,
    Or,
    PropAtom,
    format_formula,
    format_rational,
)
from .model import (
    Assertion,
    Binding,
    CgmModel,
    Conflict,
    Contribution,
    Element,
    ElementKind,
    Mark,
    ObjectiveRef,
    Preference,
    Refinement,
    validate_structure,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    span: SourceSpan
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self) -> str:
        tail = f" (expected {', '.join(self.expected)})" if self.expected else ""
        return f"{self.span}: {self.severity}: {self.message}{tail}"


@dataclass
class ParseResult:
    model: CgmModel | None
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.model is not None

    def errors(self) -> list[ParseDiagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]


# ----------------------------------------------------------------------
# tokens
# ----------------------------------------------------------------------

IDENT = "ident"
NUMBER = "number"
STRING = "string"
OP = "op"
EOF = "eof"

_MULTI_OPS = ("<->", "<-", "<=", ">=", "->", "><")
_SINGLE_OPS = "{}()[]:;,=<>!&|+-*/"


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int
    end_line: int
    end_col: int

    def span(self, file: str) -> SourceSpan:
        return SourceSpan(file, self.line, self.col, self.end_line, self.end_col)


def tokenize(text: str, file: str, diags: list[ParseDiagnostic]) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                advance(1)
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            value = text[i:j]
            advance(j - i)
            tokens.append(Token(IDENT, value, start_line, start_col, line, col))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            value = text[i:j]
            advance(j - i)
            tokens.append(Token(NUMBER, value, start_line, start_col, line, col))
            continue
        if ch == '"':
            j = i + 1
            chars: list[str] = []
            closed = False
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    chars.append(text[j + 1])
                    j += 2
                    continue
                if text[j] == '"':
                    closed = True
                    j += 1
                    break
                if text[j] == "\n":
                    break
                chars.append(text[j])
                j += 1
            advance(j - i)
            span = SourceSpan(file, start_line, start_col, line, col)
            if not closed:
                diags.append(ParseDiagnostic("error", span, "unterminated string literal"))
            tokens.append(Token(STRING, "".join(chars), start_line, start_col, line, col))
            continue
        matched = None
        for op in _MULTI_OPS:
            if text.startswith(op, i):
                matched = op
                break
        if matched is None and ch in _SINGLE_OPS:
            matched = ch
        if matched is not None:
            advance(len(matched))
            tokens.append(Token(OP, matched, start_line, start_col, line, col))
            continue
        span = SourceSpan(file, start_line, start_col, line, col + 1)
        diags.append(ParseDiagnostic("error", span, f"unexpected character {ch!r}"))
        advance(1)
    tokens.append(Token(EOF, "", line, col, line, col))
    return tokens


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


class _SyntaxError(Exception):
    def __init__(self, span: SourceSpan, message: str, expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.diagnostic = ParseDiagnostic("error", span, message, expected)


class _TryFail(Exception):
    """Internal backtracking signal; never reported."""


_DECL_KEYWORDS = (
    "goal", "task", "assumption", "refinement", "contribution", "conflict",
    "bind", "prefer", "attr", "constraint", "assert", "objective",
)


class _Parser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.diags: list[ParseDiagnostic] = []
        self.tokens = tokenize(text, file, self.diags)
        self.pos = 0
        self.elements: list[Element] = []
        self.element_order: dict[str, int] = {}
        self.intents: dict[str, str] = {}
        self.root_marked: set[str] = set()
        self.refinements: list[Refinement] = []
        self.edges: list[object] = []
        self.attr_order: list[str] = []
        self.attr_entries: list[tuple[str, str, Fraction, Fraction, SourceSpan]] = []
        self.constraints: list[Formula] = []
        self.assertions: dict[str, tuple[Mark, SourceSpan]] = {}
        self.objectives: list[ObjectiveRef] = []
        self.spans: dict[str, SourceSpan] = {}

    # -- token helpers -------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def at_op(self, value: str) -> bool:
        tok = self.peek()
        return tok.kind == OP and tok.value == value

    def at_word(self, value: str) -> bool:
        tok = self.peek()
        return tok.kind == IDENT and tok.value == value

    def eat_op(self, value: str) -> bool:
        if self.at_op(value):
            self.pos += 1
            return True
        return False

    def expect_op(self, value: str) -> Token:
        tok = self.peek()
        if tok.kind == OP and tok.value == value:
            self.pos += 1
            return tok
        raise _SyntaxError(tok.span(self.file), f"expected {value!r}", (value,))

    def expect_word(self, *values: str) -> Token:
        tok = self.peek()
        if tok.kind == IDENT and (not values or tok.value in values):
            self.pos += 1
            return tok
        what = " or ".join(repr(v) for v in values) if values else "an identifier"
        raise _SyntaxError(tok.span(self.file), f"expected {what}", values)

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind == IDENT:
            self.pos += 1
            return tok
        raise _SyntaxError(tok.span(self.file), "expected an identifier", ("identifier",))

    def error(self, span: SourceSpan, message: str) -> None:
        self.diags.append(ParseDiagnostic("error", span, message))

    def warn(self, span: SourceSpan, message: str) -> None:
        self.diags.append(ParseDiagnostic("warning", span, message))

    def sync(self) -> None:
        """Skip to just past the next ';' or '}' so parsing can resume."""
        while True:
            tok = self.peek()
            if tok.kind == EOF:
                return
            self.pos += 1
            if tok.kind == OP and tok.value in (";", "}"):
                return

    # -- rationals -----------------------------------------------------

    def parse_rational(self) -> Fraction:
        sign = Fraction(1)
        while self.at_op("-") or self.at_op("+"):
            if self.next().value == "-":
                sign = -sign
        tok = self.peek()
        if tok.kind != NUMBER:
            raise _SyntaxError(tok.span(self.file), "expected a number", ("number",))
        self.pos += 1
        value = Fraction(tok.value)
        if self.at_op("/"):
            self.pos += 1
            den_tok = self.peek()
            if den_tok.kind != NUMBER:
                raise _SyntaxError(den_tok.span(self.file), "expected a denominator", ("number",))
            self.pos += 1
            den = Fraction(den_tok.value)
            if den == 0:
                raise _SyntaxError(den_tok.span(self.file), "zero denominator")
            value = value / den
        return sign * value

    # -- declarations --------------------------------------------------

    def parse(self) -> None:
        while self.peek().kind != EOF:
            tok = self.peek()
            try:
                if tok.kind != IDENT:
                    raise _SyntaxError(
                        tok.span(self.file),
                        f"expected a declaration, found {tok.value!r}",
                        _DECL_KEYWORDS,
                    )
                word = tok.value
                if word in ("goal", "task", "assumption"):
                    self.parse_element_decl()
                elif word == "refinement":
                    self.parse_refinement_decl()
                elif word == "contribution":
                    self.parse_contribution()
                elif word == "conflict":
                    self.parse_conflict()
                elif word == "bind":
                    self.parse_bind()
                elif word == "prefer":
                    self.parse_prefer()
                elif word == "attr":
                    self.parse_attr()
                elif word == "constraint":
                    self.parse_constraint()
                elif word == "assert":
                    self.parse_assert()
                elif word == "objective":
                    self.parse_objective()
                else:
                    raise _SyntaxError(
                        tok.span(self.file),
                        f"unknown declaration {word!r}",
                        _DECL_KEYWORDS,
                    )
            except _SyntaxError as exc:
                self.diags.append(exc.diagnostic)
                self.sync()

    def parse_element_decl(self) -> None:
        kw = self.next().value
        name_tok = self.expect_ident()
        name = name_tok.value
        span = name_tok.span(self.file)
        if name in self.element_order:
            self.error(span, f"element {name} declared more than once")
        self.spans.setdefault(name, span)
        kind = ElementKind.DOMAIN_ASSUMPTION if kw == "assumption" else ElementKind.GOAL
        label = ""
        reward: Fraction | None = None
        penalty: Fraction | None = None
        if self.eat_op("{"):
            while not self.at_op("}"):
                if self.peek().kind == EOF:
                    raise _SyntaxError(self.peek().span(self.file), "unterminated element body", ("}",))
                item = self.expect_word("label", "reward", "penalty", "root", "assert")
                if item.value == "label":
                    tok = self.peek()
                    if tok.kind != STRING:
                        raise _SyntaxError(tok.span(self.file), "expected a string label", ("string",))
                    self.pos += 1
                    label = tok.value
                elif item.value == "reward":
                    reward = self.parse_rational()
                elif item.value == "penalty":
                    penalty = self.parse_rational()
                elif item.value == "root":
                    self.root_marked.add(name)
                else:  # assert
                    mark_tok = self.expect_word("satisfied", "denied")
                    self.record_assertion(name, mark_tok)
                self.expect_op(";")
            self.expect_op("}")
        else:
            self.expect_op(";")
        if name not in self.element_order:
            self.element_order[name] = len(self.elements)
            self.elements.append(Element(name, kind, label, reward, penalty))
            self.intents[name] = kw

    def parse_refinement_decl(self) -> None:
        self.next()
        rid_tok = self.expect_ident()
        span = rid_tok.span(self.file)
        self.expect_op(":")
        target = self.expect_ident().value
        self.expect_op("<-")
        sources = [self.expect_ident().value]
        while self.eat_op(","):
            sources.append(self.expect_ident().value)
        self.expect_op(";")
        self.spans.setdefault(rid_tok.value, span)
        self.refinements.append(Refinement(rid_tok.value, target, tuple(sources)))

    def parse_contribution(self) -> None:
        self.next()
        src = self.expect_ident()
        self.expect_op("->")
        dst = self.expect_ident()
        self.expect_op(";")
        self.edges.append(Contribution(src.value, dst.value))
        self.spans.setdefault(f"{src.value}->{dst.value}", src.span(self.file))

    def parse_conflict(self) -> None:
        self.next()
        a = self.expect_ident()
        self.expect_op("><")
        b = self.expect_ident()
        self.expect_op(";")
        if a.value == b.value:
            self.error(a.span(self.file), "conflict endpoints must differ")
            return
        self.edges.append(Conflict.make(a.value, b.value))

    def parse_bind(self) -> None:
        self.next()
        r1 = self.expect_ident()
        self.expect_op("=")
        r2 = self.expect_ident()
        self.expect_op(";")
        if r1.value == r2.value:
            self.error(r1.span(self.file), "binding endpoints must differ")
            return
        self.edges.append(Binding.make(r1.value, r2.value))

    def parse_prefer(self) -> None:
        self.next()
        preferred = self.expect_ident()
        self.expect_op(">")
        other = self.expect_ident()
        self.expect_op(";")
        if preferred.value == other.value:
            self.error(preferred.span(self.file), "preference endpoints must differ")
            return
        self.edges.append(Preference(preferred.value, other.value))

    def parse_attr(self) -> None:
        self.next()
        name = self.expect_ident()
        self.expect_word("of")
        subject = self.expect_ident()
        self.expect_op("=")
        sat = self.parse_rational()
        self.expect_word("when")
        self.expect_word("satisfied")
        den = Fraction(0)
        if self.eat_op(","):
            den = self.parse_rational()
            self.expect_word("when")
            self.expect_word("denied")
        self.expect_op(";")
        if name.value not in self.attr_order:
            self.attr_order.append(name.value)
        span = name.span(self.file)
        for prev in self.attr_entries:
            if prev[0] == name.value and prev[1] == subject.value:
                self.warn(span, f"attr {name.value} of {subject.value} declared again; later value wins")
        self.attr_entries.append((name.value, subject.value, sat, den, span))

    def parse_constraint(self) -> None:
        self.next()
        formula = self.parse_formula()
        self.expect_op(";")
        self.constraints.append(formula)

    def parse_assert(self) -> None:
        self.next()
        subject = self.expect_ident()
        mark_tok = self.expect_word("satisfied", "denied")
        self.expect_op(";")
        self.record_assertion(subject.value, mark_tok)

    def record_assertion(self, subject: str, mark_tok: Token) -> None:
        mark = Mark.SATISFIED if mark_tok.value == "satisfied" else Mark.DENIED
        span = mark_tok.span(self.file)
        prior = self.assertions.get(subject)
        if prior is not None:
            if prior[0] is not mark:
                self.error(span, f"{subject} asserted both satisfied and denied")
            else:
                self.warn(span, f"duplicate assertion on {subject}")
            return
        self.assertions[subject] = (mark, span)

    def parse_objective(self) -> None:
        self.next()
        self.expect_word("lex")
        direction = self.expect_word("minimize", "maximize")
        maximize = direction.value == "maximize"
        self.expect_op("[")
        names = [self.expect_ident().value]
        while self.eat_op(","):
            names.append(self.expect_ident().value)
        self.expect_op("]")
        self.expect_op(";")
        self.objectives.extend(ObjectiveRef(n, maximize) for n in names)

    # -- formulas ------------------------------------------------------

    def parse_formula(self) -> Formula:
        left = self.parse_implies()
        if self.eat_op("<->"):
            return Iff(left, self.parse_formula())
        return left

    def parse_implies(self) -> Formula:
        left = self.parse_or()
        if self.eat_op("->"):
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self) -> Formula:
        parts = [self.parse_and()]
        while self.eat_op("|"):
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and(self) -> Formula:
        parts = [self.parse_unary()]
        while self.eat_op("&"):
            parts.append(self.parse_unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_unary(self) -> Formula:
        if self.eat_op("!"):
            return Not(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        saved = self.pos
        try:
            return self.parse_comparison()
        except _TryFail:
            self.pos = saved
        if self.eat_op("("):
            inner = self.parse_formula()
            self.expect_op(")")
            return inner
        tok = self.peek()
        if tok.kind == IDENT:
            self.pos += 1
            if tok.value == "true":
                return TRUE
            if tok.value == "false":
                return FALSE
            return PropAtom(tok.value)
        raise _SyntaxError(
            tok.span(self.file),
            f"expected a formula, found {tok.value!r}" if tok.value else "expected a formula",
            ("identifier", "number", "(", "!"),
        )

    def parse_comparison(self) -> LinearAtom:
        lhs_terms, lhs_const = self.parse_linexpr()
        tok = self.peek()
        negate_rhs_head = False
        if tok.kind == OP and tok.value in ("<", "<=", "=", ">=", ">"):
            op = tok.value
            self.pos += 1
        elif tok.kind == OP and tok.value == "<-":
            # "x <- 3" written without spaces means x < -3
            op = "<"
            negate_rhs_head = True
            self.pos += 1
        else:
            raise _TryFail()
        rhs_terms, rhs_const = self.parse_linexpr(negate_first=negate_rhs_head)
        terms: dict[str, Fraction] = dict(lhs_terms)
        for var, coeff in rhs_terms.items():
            terms[var] = terms.get(var, Fraction(0)) - coeff
        try:
            return LinearAtom.make(terms, op, rhs_const - lhs_const)
        except ValueError:
            raise _TryFail()

    def parse_linexpr(self, negate_first: bool = False) -> tuple[dict[str, Fraction], Fraction]:
        terms: dict[str, Fraction] = {}
        const = Fraction(0)
        sign = Fraction(-1) if negate_first else Fraction(1)
        if self.eat_op("-"):
            sign = -sign
        elif self.eat_op("+"):
            pass
        while True:
            tok = self.peek()
            if tok.kind == NUMBER:
                value = self.parse_number_fraction()
                if self.eat_op("*"):
                    var = self.try_ident()
                    terms[var] = terms.get(var, Fraction(0)) + sign * value
                else:
                    const += sign * value
            elif tok.kind == IDENT and tok.value not in ("true", "false"):
                self.pos += 1
                terms[tok.value] = terms.get(tok.value, Fraction(0)) + sign
            else:
                raise _TryFail()
            if self.at_op("+"):
                self.pos += 1
                sign = Fraction(1)
                continue
            if self.at_op("-"):
                self.pos += 1
                sign = Fraction(-1)
                continue
            return terms, const

    def parse_number_fraction(self) -> Fraction:
        tok = self.peek()
        if tok.kind != NUMBER:
            raise _TryFail()
        self.pos += 1
        value = Fraction(tok.value)
        if self.at_op("/") and self.peek(1).kind == NUMBER:
            self.pos += 1
            den_tok = self.next()
            den = Fraction(den_tok.value)
            if den == 0:
                raise _SyntaxError(den_tok.span(self.file), "zero denominator")
            value = value / den
        return value

    def try_ident(self) -> str:
        tok = self.peek()
        if tok.kind != IDENT:
            raise _TryFail()
        self.pos += 1
        return tok.value

    # -- assembly ------------------------------------------------------

    def build(self) -> ParseResult:
        whole = SourceSpan(self.file, 1, 1, 1, 1)
        elements = list(self.elements)
        by_id = {e.id: i for i, e in enumerate(elements)}
        for attr, subject, sat, den, span in self.attr_entries:
            idx = by_id.get(subject)
            if idx is None:
                self.error(span, f"attr {attr} names unknown element {subject}")
                continue
            elements[idx] = elements[idx].with_attr(attr, sat, den)
        assertions = tuple(
            Assertion(subject, mark) for subject, (mark, _) in self.assertions.items()
        )
        model = CgmModel(
            elements=tuple(elements),
            refinements=tuple(self.refinements),
            edges=tuple(self.edges),  # type: ignore[arg-type]
            attributes=tuple(self.attr_order),
            constraints=tuple(self.constraints),
            assertions=assertions,
            objectives=tuple(self.objectives),
        )
        if not any(d.severity == "error" for d in self.diags):
            for diag in validate_structure(model):
                span = self.spans.get(diag.subject or "", whole)
                where = f" [{diag.subject}]" if diag.subject else ""
                self.diags.append(
                    ParseDiagnostic(
                        diag.severity, span, f"{diag.rule}{where}: {diag.message}"
                    )
                )
            for name, intent in self.intents.items():
                span = self.spans.get(name, whole)
                if intent == "task" and not model.is_task(name):
                    self.warn(span, f"{name} is declared task but is not a non-root leaf goal")
            for name in self.root_marked:
                span = self.spans.get(name, whole)
                if not model.is_root(name):
                    self.warn(span, f"{name} is marked root but feeds a refinement")
        if any(d.severity == "error" for d in self.diags):
            return ParseResult(None, self.diags)
        return ParseResult(model, self.diags)


def parse_dsl(text: str, file: str = "<cgm>") -> ParseResult:
    parser = _Parser(text, file)
    parser.parse()
    return parser.build()


def parse_formula_text(text: str, file: str = "<formula>") -> Formula:
    """Parse a single formula; raises ValueError on any diagnostic."""
    parser = _Parser(text, file)
    try:
        formula = parser.parse_formula()
        if parser.peek().kind != EOF:
            tok = parser.peek()
            raise _SyntaxError(tok.span(file), f"trailing input {tok.value!r}")
    except (_SyntaxError, _TryFail) as exc:
        detail = exc.diagnostic.message if isinstance(exc, _SyntaxError) else "not a formula"
        raise ValueError(f"bad formula {text!r}: {detail}") from None
    if parser.diags:
        raise ValueError(f"bad formula {text!r}: {parser.diags[0].message}")
    return formula


# ----------------------------------------------------------------------
# serializer
# ----------------------------------------------------------------------


def to_dsl(model: CgmModel) -> str:
    """Canonical text for a model; parse_dsl inverts it."""
    lines: list[str] = []
    for e in model.elements:
        if e.kind is ElementKind.DOMAIN_ASSUMPTION:
            keyword = "assumption"
        elif model.is_task(e.id):
            keyword = "task"
        else:
            keyword = "goal"
        items: list[str] = []
        if e.label:
            escaped = e.label.replace("\\", "\\\\").replace('"', '\\"')
            items.append(f'label "{escaped}";')
        if e.reward is not None:
            items.append(f"reward {format_rational(e.reward)};")
        if e.penalty is not None:
            items.append(f"penalty {format_rational(e.penalty)};")
        if items:
            lines.append(f"{keyword} {e.id} {{ " + " ".join(items) + " }")
        else:
            lines.append(f"{keyword} {e.id};")
    if model.refinements:
        lines.append("")
    for r in model.refinements:
        lines.append(f"refinement {r.id}: {r.target} <- " + ", ".join(r.sources) + ";")
    if model.edges:
        lines.append("")
    for edge in model.edges:
        if isinstance(edge, Contribution):
            lines.append(f"contribution {edge.source} -> {edge.target};")
        elif isinstance(edge, Conflict):
            lines.append(f"conflict {edge.a} >< {edge.b};")
        elif isinstance(edge, Binding):
            lines.append(f"bind {edge.r1} = {edge.r2};")
        elif isinstance(edge, Preference):
            lines.append(f"prefer {edge.preferred} > {edge.other};")
    attr_lines: list[str] = []
    for attr in model.attributes:
        for e in model.elements:
            pair = e.attr_value(attr)
            if pair is None:
                continue
            sat, den = pair
            line = f"attr {attr} of {e.id} = {format_rational(sat)} when satisfied"
            if den != 0:
                line += f", {format_rational(den)} when denied"
            attr_lines.append(line + ";")
    if attr_lines:
        lines.append("")
        lines.extend(attr_lines)
    if model.constraints:
        lines.append("")
    for c in model.constraints:
        lines.append(f"constraint {format_formula(c)};")
    if model.assertions:
        lines.append("")
    for a in model.assertions:
        lines.append(f"assert {a.subject} {a.mark.value};")
    if model.objectives:
        lines.append("")
        run: list[str] = []
        run_max: bool | None = None
        for ref in model.objectives + (ObjectiveRef("", False),):
            if ref.maximize is run_max and ref.name:
                run.append(ref.name)
                continue
            if run:
                word = "maximize" if run_max else "minimize"
                lines.append(f"objective lex {word} [" + ", ".join(run) + "];")
            run = [ref.name] if ref.name else []
            run_max = ref.maximize if ref.name else None
    return "\n".join(lines).strip() + "\n"
