"""Guard constraint trees over read/write annotated process variables.

The expression language: boolean variables and constants, comparisons over
integer/rational/string terms, addition and unary minus, conjunction and
negation, with or / != / < / <= available as derived forms.  Strings and
booleans only support (in)equality.  Leaves reference variables annotated
as read (``v^r``) or written (``v^w``).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Tuple

from .values import BOOL, INT, RAT, STRING, MalformedValueError, Value, parse_exact, value_type_of

READ = "r"
WRITE = "w"

CMP_OPS = ("=", "!=", ">=", ">", "<=", "<")
EQ_ONLY = ("=", "!=")


class MalformedGuardError(ValueError):
    """Raised when a guard is ill-typed or references unknown variables."""


@dataclass(frozen=True)
class VarRef:
    name: str
    mode: str  # READ or WRITE


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Arith:
    op: str  # "+" (n-ary, >= 2 args) or "neg" (unary)
    args: Tuple


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: object
    rhs: object


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" / "or" (n-ary) or "not" (unary)
    args: Tuple


TRUE = BoolOp("and", ())

Constraint = object  # VarRef | Lit | Arith | Cmp | BoolOp


def _term_type(node, var_types: Mapping[str, str]) -> str:
    if isinstance(node, VarRef):
        if node.name not in var_types:
            raise MalformedGuardError(f"unknown variable {node.name!r} in guard")
        return var_types[node.name]
    if isinstance(node, Lit):
        return value_type_of(node.value)
    if isinstance(node, Arith):
        types = {_term_type(a, var_types) for a in node.args}
        if not types <= {INT, RAT}:
            raise MalformedGuardError("arithmetic over non-numeric terms")
        # int literals may appear in rational expressions
        return RAT if RAT in types else INT
    raise MalformedGuardError(f"expected a term, got {node!r}")


def check_types(c: Constraint, var_types: Mapping[str, str]) -> None:
    """Validate sort-correctness: homogeneous comparisons, bool context only
    for boolean nodes, strings/booleans restricted to (in)equality."""
    if isinstance(c, VarRef):
        if _term_type(c, var_types) != BOOL:
            raise MalformedGuardError(f"variable {c.name!r} used as a boolean atom")
        return
    if isinstance(c, Lit):
        if not isinstance(c.value, bool):
            raise MalformedGuardError(f"constant {c.value!r} used as a boolean atom")
        return
    if isinstance(c, BoolOp):
        if c.op == "not" and len(c.args) != 1:
            raise MalformedGuardError("'not' takes exactly one argument")
        for arg in c.args:
            check_types(arg, var_types)
        return
    if isinstance(c, Cmp):
        lt = _aux_side_type(c.lhs, var_types)
        rt = _aux_side_type(c.rhs, var_types)
        if {lt, rt} == {INT, RAT}:
            lt = rt = RAT
        if lt != rt:
            raise MalformedGuardError(f"comparison between {lt} and {rt}")
        if lt in (BOOL, STRING) and c.op not in EQ_ONLY:
            raise MalformedGuardError(f"{lt} values only support = and !=")
        return
    raise MalformedGuardError(f"not a constraint node: {c!r}")


def _aux_side_type(node, var_types: Mapping[str, str]) -> str:
    if isinstance(node, (VarRef, Lit, Arith)):
        return _term_type(node, var_types)
    raise MalformedGuardError(f"expected a comparison side, got {node!r}")


def write_vars(c: Constraint) -> frozenset:
    """Variables occurring with a write annotation anywhere in the guard."""
    out = set()

    def walk(node):
        if isinstance(node, VarRef):
            if node.mode == WRITE:
                out.add(node.name)
        elif isinstance(node, (Arith, BoolOp)):
            for a in node.args:
                walk(a)
        elif isinstance(node, Cmp):
            walk(node.lhs)
            walk(node.rhs)

    walk(c)
    return frozenset(out)


def read_vars(c: Constraint) -> frozenset:
    out = set()

    def walk(node):
        if isinstance(node, VarRef):
            if node.mode == READ:
                out.add(node.name)
        elif isinstance(node, (Arith, BoolOp)):
            for a in node.args:
                walk(a)
        elif isinstance(node, Cmp):
            walk(node.lhs)
            walk(node.rhs)

    walk(c)
    return frozenset(out)


def eval_constraint(c: Constraint, read: Mapping[str, Value], write: Mapping[str, Value]) -> bool:
    """Evaluate a guard under a read assignment and a write assignment.

    All variables occurring in the guard must be covered by the assignment
    matching their annotation; exact arithmetic throughout.
    """

    def term(node):
        if isinstance(node, VarRef):
            env = read if node.mode == READ else write
            if node.name not in env:
                raise MalformedGuardError(
                    f"variable {node.name}^{node.mode} not covered by assignment"
                )
            return env[node.name]
        if isinstance(node, Lit):
            return node.value
        if isinstance(node, Arith):
            vals = [term(a) for a in node.args]
            for v in vals:
                if isinstance(v, (bool, str)):
                    raise MalformedGuardError("arithmetic over non-numeric value")
            if node.op == "+":
                return sum(vals[1:], vals[0])
            if node.op == "neg":
                return -vals[0]
            raise MalformedGuardError(f"unknown arithmetic op {node.op!r}")
        raise MalformedGuardError(f"not a term: {node!r}")

    def formula(node) -> bool:
        if isinstance(node, (VarRef, Lit)):
            v = term(node)
            if not isinstance(v, bool):
                raise MalformedGuardError(f"non-boolean atom {v!r}")
            return v
        if isinstance(node, BoolOp):
            if node.op == "and":
                return all(formula(a) for a in node.args)
            if node.op == "or":
                return any(formula(a) for a in node.args)
            if node.op == "not":
                return not formula(node.args[0])
            raise MalformedGuardError(f"unknown boolean op {node.op!r}")
        if isinstance(node, Cmp):
            lhs, rhs = term(node.lhs), term(node.rhs)
            if isinstance(lhs, bool) != isinstance(rhs, bool) or isinstance(lhs, str) != isinstance(rhs, str):
                raise MalformedGuardError(f"comparison between {lhs!r} and {rhs!r}")
            if node.op == "=":
                return lhs == rhs
            if node.op == "!=":
                return lhs != rhs
            if isinstance(lhs, (bool, str)):
                raise MalformedGuardError(f"{node.op} applied to non-numeric values")
            if node.op == ">=":
                return lhs >= rhs
            if node.op == ">":
                return lhs > rhs
            if node.op == "<=":
                return lhs <= rhs
            if node.op == "<":
                return lhs < rhs
            raise MalformedGuardError(f"unknown comparison {node.op!r}")
        raise MalformedGuardError(f"not a constraint node: {node!r}")

    return formula(c)


def guard_constants(c: Constraint):
    """All literal constants in the guard (used to seed value universes)."""
    out = []

    def walk(node):
        if isinstance(node, Lit):
            out.append(node.value)
        elif isinstance(node, (Arith, BoolOp)):
            for a in node.args:
                walk(a)
        elif isinstance(node, Cmp):
            walk(node.lhs)
            walk(node.rhs)

    walk(c)
    return out


def has_arithmetic(c: Constraint) -> bool:
    def walk(node):
        if isinstance(node, Arith):
            return True
        if isinstance(node, BoolOp):
            return any(walk(a) for a in node.args)
        if isinstance(node, Cmp):
            return walk(node.lhs) or walk(node.rhs)
        return False

    return walk(c)


# --- JSON prefix form -------------------------------------------------------
#
# Nested arrays, e.g. ["and", [">=", ["wvar", "x"], ["int", 0]]].
# "and"/"or" are n-ary (an empty "and" is the constant-true guard).

_JSON_CMP = {">=", ">", "<=", "<", "=", "!="}


def guard_from_json(node) -> Constraint:
    if not isinstance(node, list) or not node:
        raise MalformedGuardError(f"guard node must be a non-empty array: {node!r}")
    op, *args = node
    if op in ("and", "or"):
        return BoolOp(op, tuple(guard_from_json(a) for a in args))
    if op == "not":
        if len(args) != 1:
            raise MalformedGuardError("'not' takes one argument")
        return BoolOp("not", (guard_from_json(args[0]),))
    if op in _JSON_CMP:
        if len(args) != 2:
            raise MalformedGuardError(f"{op!r} takes two arguments")
        return Cmp(op, _json_term(args[0]), _json_term(args[1]))
    if op in ("rvar", "wvar") and len(args) == 1:
        # bare boolean variable used as an atom
        return VarRef(args[0], READ if op == "rvar" else WRITE)
    if op == "bool" and len(args) == 1:
        return Lit(bool(args[0]))
    raise MalformedGuardError(f"unknown guard operator {op!r}")


def _json_term(node):
    if not isinstance(node, list) or not node:
        raise MalformedGuardError(f"term node must be a non-empty array: {node!r}")
    op, *args = node
    if op == "rvar":
        return VarRef(args[0], READ)
    if op == "wvar":
        return VarRef(args[0], WRITE)
    if op == "int":
        value = parse_exact(args[0])
        if isinstance(value, Fraction):
            raise MalformedGuardError(f"not an integer literal: {args[0]!r}")
        return Lit(value)
    if op == "rat":
        value = parse_exact(args[0])
        return Lit(value if isinstance(value, Fraction) else Fraction(value))
    if op == "str":
        return Lit(str(args[0]))
    if op == "bool":
        return Lit(bool(args[0]))
    if op == "+":
        if len(args) < 2:
            raise MalformedGuardError("'+' takes at least two arguments")
        return Arith("+", tuple(_json_term(a) for a in args))
    if op == "-":
        if len(args) == 1:
            return Arith("neg", (_json_term(args[0]),))
        if len(args) == 2:
            return Arith("+", (_json_term(args[0]), Arith("neg", (_json_term(args[1]),))))
        raise MalformedGuardError("'-' takes one or two arguments")
    raise MalformedGuardError(f"unknown term operator {op!r}")


def guard_to_json(c: Constraint):
    if isinstance(c, BoolOp):
        return [c.op, *(guard_to_json(a) for a in c.args)]
    if isinstance(c, Cmp):
        return [c.op, _term_to_json(c.lhs), _term_to_json(c.rhs)]
    if isinstance(c, (VarRef, Lit)):
        return _term_to_json(c)
    raise MalformedGuardError(f"not a constraint: {c!r}")


def _term_to_json(node):
    if isinstance(node, VarRef):
        return ["rvar" if node.mode == READ else "wvar", node.name]
    if isinstance(node, Lit):
        v = node.value
        if isinstance(v, bool):
            return ["bool", v]
        if isinstance(v, int):
            return ["int", v]
        if isinstance(v, Fraction):
            return ["rat", f"{v.numerator}/{v.denominator}"]
        return ["str", v]
    if isinstance(node, Arith):
        if node.op == "neg":
            return ["-", _term_to_json(node.args[0])]
        return ["+", *(_term_to_json(a) for a in node.args)]
    raise MalformedGuardError(f"not a term: {node!r}")


# --- Infix text form (PNML guards) ------------------------------------------
#
# Example: "x^w >= 0 && !(y^r = z^r + 1)".  Written variables may also be
# spelled with a prime: "x' >= 0".

_TOKEN_SPEC = (
    ("&&", "AND"),
    ("||", "OR"),
    (">=", "GE"),
    ("<=", "LE"),
    ("!=", "NE"),
    (">", "GT"),
    ("<", "LT"),
    ("==", "EQ"),
    ("=", "EQ"),
    ("!", "NOT"),
    ("(", "LP"),
    (")", "RP"),
    ("+", "PLUS"),
    ("-", "MINUS"),
)


def _tokenize(text: str):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise MalformedGuardError("unterminated string literal")
            tokens.append(("STR", text[i + 1:j]))
            i = j + 1
            continue
        for sym, kind in _TOKEN_SPEC:
            if text.startswith(sym, i):
                tokens.append((kind, sym))
                i += len(sym)
                break
        else:
            if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
                j = i
                while j < n and (text[j].isdigit() or text[j] in "./"):
                    j += 1
                tokens.append(("NUM", text[i:j]))
                i = j
            elif ch.isalpha() or ch == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] in "_^'"):
                    j += 1
                tokens.append(("ID", text[i:j]))
                i = j
            else:
                raise MalformedGuardError(f"unexpected character {ch!r} in guard text")
    tokens.append(("EOF", ""))
    return tokens


def parse_guard_text(text: str) -> Constraint:
    """Parse an infix guard string into a constraint tree."""
    if not text.strip():
        return TRUE
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos][0]

    def take(kind=None):
        nonlocal pos
        tk = tokens[pos]
        if kind and tk[0] != kind:
            raise MalformedGuardError(f"expected {kind}, got {tk[1]!r}")
        pos += 1
        return tk

    def parse_or():
        node = parse_and()
        while peek() == "OR":
            take()
            rhs = parse_and()
            node = BoolOp("or", (node, rhs))
        return node

    def parse_and():
        node = parse_not()
        while peek() == "AND":
            take()
            rhs = parse_not()
            node = BoolOp("and", (node, rhs))
        return node

    def parse_not():
        if peek() == "NOT":
            take()
            return BoolOp("not", (parse_not(),))
        return parse_atom()

    def parse_atom():
        nonlocal pos
        # an atom is either a parenthesized formula or a comparison
        if peek() == "LP":
            save = pos
            take()
            try:
                inner = parse_or()
                take("RP")
            except MalformedGuardError:
                pos = save  # parenthesized arithmetic term, e.g. (x + 1) > 0
            else:
                if peek() not in ("GE", "LE", "NE", "GT", "LT", "EQ", "PLUS", "MINUS"):
                    return inner
                pos = save
        lhs = parse_sum()
        kind, sym = tokens[pos]
        if kind in ("GE", "LE", "NE", "GT", "LT", "EQ"):
            take()
            rhs = parse_sum()
            op = {"GE": ">=", "LE": "<=", "NE": "!=", "GT": ">", "LT": "<", "EQ": "="}[kind]
            return Cmp(op, lhs, rhs)
        if isinstance(lhs, VarRef):
            return lhs  # bare boolean variable
        if isinstance(lhs, Lit) and isinstance(lhs.value, bool):
            return lhs
        raise MalformedGuardError(f"expected a comparison near {sym!r}")

    def parse_sum():
        node = parse_unary()
        while peek() in ("PLUS", "MINUS"):
            kind, _ = take()
            rhs = parse_unary()
            if kind == "MINUS":
                rhs = Arith("neg", (rhs,))
            node = Arith("+", (node, rhs))
        return node

    def parse_unary():
        if peek() == "MINUS":
            take()
            return Arith("neg", (parse_unary(),))
        if peek() == "LP":
            take()
            node = parse_sum()
            take("RP")
            return node
        kind, sym = take()
        if kind == "NUM":
            value = parse_exact(sym)
            return Lit(value)
        if kind == "STR":
            return Lit(sym)
        if kind == "ID":
            if sym == "true":
                return Lit(True)
            if sym == "false":
                return Lit(False)
            if sym.endswith("^w"):
                return VarRef(sym[:-2], WRITE)
            if sym.endswith("^r"):
                return VarRef(sym[:-2], READ)
            if sym.endswith("'"):
                return VarRef(sym[:-1], WRITE)
            return VarRef(sym, READ)
        raise MalformedGuardError(f"unexpected token {sym!r}")

    node = parse_or()
    take("EOF")
    return node
