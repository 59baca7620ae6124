"""Sorted term ASTs, their SMT-LIB2 text form, and an exact evaluator.

The fragment is quantifier-free linear integer/rational arithmetic with
if-then-else; every variable carries a sort and rational constants stay
exact end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

SORT_BOOL = "Bool"
SORT_INT = "Int"
SORT_REAL = "Real"


class TermError(ValueError):
    pass


@dataclass(frozen=True)
class Var:
    name: str
    sort: str


@dataclass(frozen=True)
class Const:
    value: object  # bool, int, or Fraction
    sort: str


@dataclass(frozen=True)
class App:
    op: str
    args: Tuple


Term = Union[Var, Const, App]

TRUE = Const(True, SORT_BOOL)
FALSE = Const(False, SORT_BOOL)


def tbool(b: bool) -> Const:
    return TRUE if b else FALSE


def tint(k: int) -> Const:
    return Const(int(k), SORT_INT)


def treal(q) -> Const:
    return Const(Fraction(q), SORT_REAL)


def tand(*args: Term) -> Term:
    flat = [a for a in args if a != TRUE]
    if any(a == FALSE for a in flat):
        return FALSE
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return App("and", tuple(flat))


def tor(*args: Term) -> Term:
    flat = [a for a in args if a != FALSE]
    if any(a == TRUE for a in flat):
        return TRUE
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return App("or", tuple(flat))


def tnot(a: Term) -> Term:
    if a == TRUE:
        return FALSE
    if a == FALSE:
        return TRUE
    return App("not", (a,))


def timplies(a: Term, b: Term) -> Term:
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    return App("=>", (a, b))


def teq(a: Term, b: Term) -> Term:
    if a == b:
        return TRUE
    return App("=", (a, b))


def tne(a: Term, b: Term) -> Term:
    return tnot(teq(a, b))


def tge(a: Term, b: Term) -> Term:
    return App(">=", (a, b))


def tgt(a: Term, b: Term) -> Term:
    return App(">", (a, b))


def tle(a: Term, b: Term) -> Term:
    return App("<=", (a, b))


def tlt(a: Term, b: Term) -> Term:
    return App("<", (a, b))


def tplus(*args: Term) -> Term:
    consts = [a for a in args if isinstance(a, Const)]
    if len(consts) == len(args):
        total = sum(a.value for a in args)
        sort = SORT_REAL if any(a.sort == SORT_REAL for a in args) else SORT_INT
        return Const(Fraction(total) if sort == SORT_REAL else int(total), sort)
    if len(args) == 1:
        return args[0]
    return App("+", tuple(args))


def tneg(a: Term) -> Term:
    if isinstance(a, Const):
        return Const(-a.value, a.sort)
    return App("-", (a,))


def tmul_const(c, a: Term) -> Term:
    """Multiplication by a constant keeps the fragment linear."""
    c = Fraction(c)
    if c == 1:
        return a
    if isinstance(a, Const):
        value = c * a.value
        if a.sort == SORT_INT and value.denominator == 1:
            return Const(int(value), SORT_INT)
        return Const(value, SORT_REAL)
    return App("*", (treal(c), a))


def tite(cond: Term, then: Term, other: Term) -> Term:
    if cond == TRUE:
        return then
    if cond == FALSE:
        return other
    if then == other:
        return then
    return App("ite", (cond, then, other))


def tmin(a: Term, b: Term) -> Term:
    """min(a, b) spelled as ite(a <= b, a, b)."""
    if isinstance(a, Const) and isinstance(b, Const):
        return a if a.value <= b.value else b
    return tite(tle(a, b), a, b)


# -- SMT-LIB2 serialization ----------------------------------------------------


def sexp(term: Term) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Const):
        return _const_sexp(term)
    parts = " ".join(sexp(a) for a in term.args)
    return f"({term.op} {parts})"


def _const_sexp(c: Const) -> str:
    v = c.value
    if c.sort == SORT_BOOL:
        return "true" if v else "false"
    if c.sort == SORT_INT:
        return str(v) if v >= 0 else f"(- {-v})"
    q = Fraction(v)
    if q.denominator == 1:
        body = f"{abs(q.numerator)}.0"
    else:
        body = f"(/ {abs(q.numerator)} {q.denominator})"
    return body if q >= 0 else f"(- {body})"


def declarations(variables: Iterable[Var]) -> List[str]:
    return [f"(declare-fun {v.name} () {v.sort})" for v in variables]


# -- exact evaluation -----------------------------------------------------------


def eval_term(term: Term, env: Mapping[str, object]):
    """Evaluate a term under a total assignment, with exact arithmetic."""
    if isinstance(term, Var):
        try:
            return env[term.name]
        except KeyError:
            raise TermError(f"unassigned variable {term.name!r}") from None
    if isinstance(term, Const):
        return term.value
    op = term.op
    if op == "ite":
        cond = eval_term(term.args[0], env)
        return eval_term(term.args[1 if cond else 2], env)
    if op == "and":
        return all(eval_term(a, env) for a in term.args)
    if op == "or":
        return any(eval_term(a, env) for a in term.args)
    if op == "not":
        return not eval_term(term.args[0], env)
    if op == "=>":
        return (not eval_term(term.args[0], env)) or eval_term(term.args[1], env)
    vals = [eval_term(a, env) for a in term.args]
    if op == "=":
        return vals[0] == vals[1]
    if op == ">=":
        return vals[0] >= vals[1]
    if op == ">":
        return vals[0] > vals[1]
    if op == "<=":
        return vals[0] <= vals[1]
    if op == "<":
        return vals[0] < vals[1]
    if op == "+":
        return sum(vals[1:], vals[0])
    if op == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - vals[1]
    if op == "*":
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out
    raise TermError(f"unknown operator {op!r}")


def term_vars(term: Term, out=None) -> set:
    if out is None:
        out = set()
    if isinstance(term, Var):
        out.add(term.name)
    elif isinstance(term, App):
        for a in term.args:
            term_vars(a, out)
    return out


# -- s-expression reader ---------------------------------------------------------


def parse_sexps(text: str) -> List:
    """Parse a string of s-expressions into nested lists of atom strings."""
    tokens = _tokenize_sexp(text)
    pos = 0
    out = []

    def parse():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while pos < len(tokens) and tokens[pos] != ")":
                items.append(parse())
            if pos >= len(tokens):
                raise TermError("unbalanced parentheses in solver output")
            pos += 1
            return items
        if tok == ")":
            raise TermError("unexpected ')' in solver output")
        return tok

    while pos < len(tokens):
        out.append(parse())
    return out


def _tokenize_sexp(text: str) -> List[str]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            tokens.append(text[i:j + 1])
            i = j + 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise TermError("unterminated quoted symbol")
            tokens.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def value_from_sexp(node):
    """Decode a model value: booleans, integers, rationals (incl. negated)."""
    if isinstance(node, str):
        if node == "true":
            return True
        if node == "false":
            return False
        return _numeral(node)
    if isinstance(node, list) and node:
        head = node[0]
        if head == "-" and len(node) == 2:
            inner = value_from_sexp(node[1])
            return -inner
        if head == "/" and len(node) == 3:
            num = value_from_sexp(node[1])
            den = value_from_sexp(node[2])
            return Fraction(num) / Fraction(den)
        if head == "to_real" and len(node) == 2:
            return Fraction(value_from_sexp(node[1]))
    raise TermError(f"cannot decode model value {node!r}")


def _numeral(token: str):
    if "." in token:
        return Fraction(token)
    try:
        return int(token)
    except ValueError:
        raise TermError(f"cannot decode numeral {token!r}") from None
