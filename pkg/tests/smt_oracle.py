"""A small, standalone SMT-LIB2 reader used to cross-check exports.

Deliberately independent of the package's formula types: scripts are
tokenized and parsed from text, and assertions are evaluated over plain
dicts.  If the exporter and this reader disagree about what a script
means, a test fails; they share no code that could hide a common bug.
"""

from __future__ import annotations

from fractions import Fraction


class SmtScript:
    def __init__(self) -> None:
        self.bools: list[str] = []
        self.reals: list[str] = []
        self.assertions: list[object] = []
        self.objectives: list[tuple[str, object]] = []  # (minimize|maximize, term)
        self.options: dict[str, str] = {}
        self.logic: str | None = None
        self.commands: list[str] = []


def tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            tokens.append(text[i : j + 1])
            i = j + 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();|":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def parse_sexprs(tokens: list[str]) -> list[object]:
    forms: list[object] = []
    stack: list[list[object]] = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                forms.append(done)
        else:
            atom: object = tok[1:-1] if tok.startswith("|") else tok
            if stack:
                stack[-1].append(atom)
            else:
                forms.append(atom)
    if stack:
        raise ValueError("unbalanced parentheses")
    return forms


def read_script(text: str) -> SmtScript:
    script = SmtScript()
    for form in parse_sexprs(tokenize(text)):
        if not isinstance(form, list) or not form:
            raise ValueError(f"stray form {form!r}")
        head = form[0]
        if head == "set-logic":
            script.logic = form[1]
        elif head == "set-option":
            script.options[form[1]] = form[2]
        elif head == "declare-const":
            name, sort = form[1], form[2]
            if sort == "Bool":
                script.bools.append(name)
            elif sort == "Real":
                script.reals.append(name)
            else:
                raise ValueError(f"unsupported sort {sort!r}")
        elif head == "assert":
            if len(form) != 2:
                raise ValueError("assert takes one argument")
            script.assertions.append(form[1])
        elif head in ("minimize", "maximize"):
            script.objectives.append((head, form[1]))
        elif head in ("check-sat", "get-objectives", "get-model", "exit"):
            script.commands.append(head)
        else:
            raise ValueError(f"unsupported command {head!r}")
    return script


def evaluate(expr: object, env: dict[str, object]) -> object:
    """Value of a term: bool for formulas, Fraction for arithmetic."""
    if isinstance(expr, str):
        if expr == "true":
            return True
        if expr == "false":
            return False
        if expr.lstrip("-").isdigit():
            return Fraction(expr)
        if expr in env:
            return env[expr]
        raise KeyError(f"unbound symbol {expr!r}")
    if not isinstance(expr, list) or not expr:
        raise ValueError(f"cannot evaluate {expr!r}")
    op, *args = expr
    if op == "not":
        (a,) = args
        return not _as_bool(evaluate(a, env))
    if op == "and":
        return all(_as_bool(evaluate(a, env)) for a in args)
    if op == "or":
        return any(_as_bool(evaluate(a, env)) for a in args)
    if op == "=>":
        a, b = args
        return (not _as_bool(evaluate(a, env))) or _as_bool(evaluate(b, env))
    if op == "ite":
        c, t, f = args
        return evaluate(t if _as_bool(evaluate(c, env)) else f, env)
    if op == "=":
        vals = [evaluate(a, env) for a in args]
        kinds = {isinstance(v, bool) for v in vals}
        if len(kinds) != 1:
            raise TypeError(f"mixed-sort equality in {expr!r}")
        return all(v == vals[0] for v in vals[1:])
    if op in ("<", "<=", ">=", ">"):
        a, b = (_as_num(evaluate(x, env)) for x in args)
        return {"<": a < b, "<=": a <= b, ">=": a >= b, ">": a > b}[op]
    if op == "+":
        return sum((_as_num(evaluate(a, env)) for a in args), Fraction(0))
    if op == "*":
        out = Fraction(1)
        for a in args:
            out *= _as_num(evaluate(a, env))
        return out
    if op == "-":
        if len(args) == 1:
            return -_as_num(evaluate(args[0], env))
        a, b = (_as_num(evaluate(x, env)) for x in args)
        return a - b
    if op == "/":
        a, b = (_as_num(evaluate(x, env)) for x in args)
        return a / b
    raise ValueError(f"unsupported operator {op!r}")


def _as_bool(v: object) -> bool:
    if not isinstance(v, bool):
        raise TypeError(f"expected a boolean, got {v!r}")
    return v


def _as_num(v: object) -> Fraction:
    if isinstance(v, bool) or not isinstance(v, Fraction):
        raise TypeError(f"expected a rational, got {v!r}")
    return v


def all_assertions_hold(script: SmtScript, env: dict[str, object]) -> bool:
    return all(_as_bool(evaluate(a, env)) for a in script.assertions)
