"""Encoding of the joint realization/alignment search as an SMT optimization.

One problem per (net, trace, cost functions): a fixed-length symbolic process
run, a symbolic realization of the uncertain trace, and an edit-distance
table whose bottom-right cell is minimized.  Infinite penalties become a
finite big-M that no genuine alignment can reach.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import guards, terms
from .costs import FIT, CostFunctions
from .dpn import (
    DPN,
    Transition,
    augment_final_loop,
    cheapest_run_cost_ub,
    silent_chain_bound,
)
from .terms import (
    SORT_BOOL,
    SORT_INT,
    SORT_REAL,
    Term,
    Var,
    sexp,
    tand,
    tbool,
    teq,
    tge,
    tgt,
    treal,
    tint,
    tite,
    tle,
    tlt,
    tmin,
    tmul_const,
    tne,
    tnot,
    tor,
    tplus,
    timplies,
)
from .ulog import INTERVAL, SET, Spec, UncertainEvent, UncertainTrace
from .values import BOOL, INT, INF, RAT, STRING, Value, is_finite, values_compatible


class EncodingError(ValueError):
    pass


_SORT_OF_TYPE = {BOOL: SORT_BOOL, INT: SORT_INT, RAT: SORT_REAL, STRING: SORT_INT}


class StringInterner:
    """Strings become consecutive integer codes over the finite literal
    universe collected from the net and the log."""

    def __init__(self):
        self._codes: Dict[str, int] = {}
        self._strings: List[str] = []

    def intern(self, s: str) -> int:
        if s not in self._codes:
            self._codes[s] = len(self._strings)
            self._strings.append(s)
        return self._codes[s]

    def code(self, s: str) -> int:
        try:
            return self._codes[s]
        except KeyError:
            raise EncodingError(f"string literal {s!r} outside the collected universe") from None

    def string(self, code: int) -> str:
        return self._strings[code]

    def __len__(self) -> int:
        return len(self._strings)


def collect_strings(net: DPN, trace: UncertainTrace) -> StringInterner:
    interner = StringInterner()
    for v in net.variables.values():
        if v.vtype == STRING:
            interner.intern(v.init)
    for t in net.transitions:
        for c in guards.guard_constants(t.guard):
            if isinstance(c, str):
                interner.intern(c)
    for ue in trace:
        for _, spec in ue.data:
            if spec.kind == SET:
                for val in spec.payload:
                    if isinstance(val, str):
                        interner.intern(val)
    return interner


def _sanitize(token: str) -> str:
    clean = re.sub(r"[^A-Za-z0-9_.]", "_", str(token))
    return clean or "_"


class VariableLayout:
    """Deterministic bijection between encoding roles and solver names."""

    def __init__(self, net: DPN, trace: UncertainTrace, n: int, sequential: bool):
        self.n = n
        self.m = len(trace)
        self.sequential = sequential
        self._used: set = set()
        var_types = net.var_types()

        def fresh(name: str) -> str:
            base = name
            k = 2
            while name in self._used:
                name = f"{base}_{k}"
                k += 1
            self._used.add(name)
            return name

        self.t_vars = {i: Var(fresh(f"t_{i}"), SORT_INT) for i in range(1, n + 1)}
        self.m_vars = {
            (i, p): Var(fresh(f"m_{i}_{_sanitize(p)}"), SORT_INT)
            for i in range(n + 1)
            for p in net.places
        }
        self.x_vars = {
            (i, v): Var(fresh(f"x_{i}_{_sanitize(v)}"), _SORT_OF_TYPE[var_types[v]])
            for i in range(n + 1)
            for v in sorted(net.variables)
        }
        self.drop_vars = {e.eid: Var(fresh(f"drop_{_sanitize(e.eid)}"), SORT_BOOL) for e in trace}
        self.act_vars = {e.eid: Var(fresh(f"act_{_sanitize(e.eid)}"), SORT_INT) for e in trace}
        self.td_vars = {
            (v, e.eid): Var(
                fresh(f"td_{_sanitize(v)}_{_sanitize(e.eid)}"), _SORT_OF_TYPE[var_types[v]]
            )
            for e in trace
            for v in sorted(net.variables)
        }
        if sequential:
            self.ts_vars = {}
            self.pos_vars = {}
            self.nth_vars = {}
        else:
            self.ts_vars = {e.eid: Var(fresh(f"ts_{_sanitize(e.eid)}"), SORT_INT) for e in trace}
            self.pos_vars = {e.eid: Var(fresh(f"pos_{_sanitize(e.eid)}"), SORT_INT) for e in trace}
            self.nth_vars = {j: Var(fresh(f"nth_{j}"), SORT_INT) for j in range(1, self.m + 1)}
        self.d_vars = {
            (i, j): Var(fresh(f"d_{i}_{j}"), SORT_REAL)
            for i in range(self.m + 1)
            for j in range(n + 1)
        }

    def t(self, i: int) -> Var:
        return self.t_vars[i]

    def marking(self, i: int, p: str) -> Var:
        return self.m_vars[(i, p)]

    def x(self, i: int, v: str) -> Var:
        return self.x_vars[(i, v)]

    def drop(self, eid: str) -> Var:
        return self.drop_vars[eid]

    def act(self, eid: str) -> Var:
        return self.act_vars[eid]

    def td(self, v: str, eid: str) -> Var:
        return self.td_vars[(v, eid)]

    def ts(self, eid: str) -> Var:
        return self.ts_vars[eid]

    def pos(self, eid: str) -> Var:
        return self.pos_vars[eid]

    def nth(self, j: int) -> Var:
        return self.nth_vars[j]

    def d(self, i: int, j: int) -> Var:
        return self.d_vars[(i, j)]

    def all_vars(self) -> List[Var]:
        out: List[Var] = []
        out.extend(self.t_vars.values())
        out.extend(self.m_vars.values())
        out.extend(self.x_vars.values())
        out.extend(self.drop_vars.values())
        out.extend(self.act_vars.values())
        out.extend(self.td_vars.values())
        out.extend(self.ts_vars.values())
        out.extend(self.pos_vars.values())
        out.extend(self.nth_vars.values())
        out.extend(self.d_vars.values())
        return out


def const_term(value: Value, vtype: str, interner: StringInterner) -> Term:
    if vtype == BOOL:
        return tbool(bool(value))
    if vtype == STRING:
        return tint(interner.code(value))
    if vtype == INT:
        return tint(value)
    return treal(value)


def guard_to_term(
    constraint,
    read_sub: Mapping[str, Term],
    write_sub: Mapping[str, Term],
    var_types: Mapping[str, str],
    interner: StringInterner,
) -> Term:
    """Apply the substitution replacing read/write variables by step terms."""

    def term_type(node) -> str:
        if isinstance(node, guards.VarRef):
            return var_types[node.name]
        if isinstance(node, guards.Lit):
            from .values import value_type_of

            return value_type_of(node.value)
        types = {term_type(a) for a in node.args}
        return RAT if RAT in types else INT

    def build_term(node, want: str) -> Term:
        if isinstance(node, guards.VarRef):
            base = read_sub[node.name] if node.mode == guards.READ else write_sub[node.name]
            if want == RAT and var_types[node.name] == INT:
                return terms.App("to_real", (base,))
            return base
        if isinstance(node, guards.Lit):
            v = node.value
            if isinstance(v, bool):
                return tbool(v)
            if isinstance(v, str):
                return tint(interner.code(v))
            return treal(v) if want == RAT else tint(v)
        if node.op == "+":
            return tplus(*(build_term(a, want) for a in node.args))
        if node.op == "neg":
            return terms.tneg(build_term(node.args[0], want))
        raise EncodingError(f"unexpected term node {node!r}")

    def build(node) -> Term:
        if isinstance(node, guards.VarRef):
            return read_sub[node.name] if node.mode == guards.READ else write_sub[node.name]
        if isinstance(node, guards.Lit):
            return tbool(bool(node.value))
        if isinstance(node, guards.BoolOp):
            if node.op == "and":
                return tand(*(build(a) for a in node.args))
            if node.op == "or":
                return tor(*(build(a) for a in node.args))
            return tnot(build(node.args[0]))
        if isinstance(node, guards.Cmp):
            lt, rt = term_type(node.lhs), term_type(node.rhs)
            want = RAT if RAT in (lt, rt) else lt
            lhs = build_term(node.lhs, want)
            rhs = build_term(node.rhs, want)
            ops = {"=": teq, "!=": tne, ">=": tge, ">": tgt, "<=": tle, "<": tlt}
            return ops[node.op](lhs, rhs)
        raise EncodingError(f"unexpected guard node {node!r}")

    return build(constraint)


# -- run bound and big-M -------------------------------------------------------


def compute_run_bound(
    net: DPN,
    trace: UncertainTrace,
    cf: CostFunctions,
    c: Fraction,
    k: int,
    override: Optional[int] = None,
) -> int:
    """Run-length bound ceil(4*m1 + 2*m2 + c) * (k + 1), with an override hook."""
    m1, m2 = trace.m1, trace.m2
    n = math.ceil(4 * m1 + 2 * m2 + c) * (k + 1)
    if n == 0 and dict(net.m_initial) != dict(net.m_final):
        # a zero bound is only valid when the empty run is already accepting;
        # otherwise allow an all-silent run up to the silent-chain length
        n = max(1, k)
    if override is not None:
        if override < n:
            warnings.warn(
                f"run bound override {override} is below the computed bound {n}; "
                "the reported optimum may not be global"
            )
        return override
    return n


def big_m(trace: UncertainTrace, cf: CostFunctions, net_aug: DPN, n: int, c: Fraction) -> Fraction:
    """A finite stand-in for infinite penalties, strictly above any genuine cost."""
    max_pm = max((cf.pm(t) for t in net_aug.transitions), default=Fraction(0))
    return 1 + (3 * trace.m1 + trace.m2 + c) + n * max_pm


# -- constraint families --------------------------------------------------------


def encode_run(net: DPN, n: int, layout: VariableLayout, interner: StringInterner) -> List[Term]:
    """Initial/final markings, transition ranges, enabledness, token game,
    guard satisfaction with frame equalities."""
    var_types = net.var_types()
    out: List[Term] = []
    for p in net.places:
        out.append(teq(layout.marking(0, p), tint(net.m_initial.get(p, 0))))
    for v in sorted(net.variables):
        out.append(
            teq(layout.x(0, v), const_term(net.variables[v].init, var_types[v], interner))
        )
    for p in net.places:
        out.append(teq(layout.marking(n, p), tint(net.m_final.get(p, 0))))
    for (i, p), mv in layout.m_vars.items():
        if i > 0:
            out.append(tge(mv, tint(0)))
    if len(interner) and any(t == STRING for t in var_types.values()):
        for (i, v), xv in layout.x_vars.items():
            if var_types[v] == STRING:
                out.append(tand(tge(xv, tint(0)), tlt(xv, tint(len(interner)))))
    n_trans = len(net.transitions)
    for i in range(1, n + 1):
        ti = layout.t(i)
        out.append(tand(tge(ti, tint(1)), tle(ti, tint(n_trans))))
        for j, t in enumerate(net.transitions, start=1):
            fires = teq(ti, tint(j))
            pre, post = net.pre(t), net.post(t)
            enabled = tand(*(tge(layout.marking(i - 1, p), tint(w)) for p, w in pre.items()))
            out.append(timplies(fires, enabled))
            token_game = tand(
                *(
                    teq(
                        layout.marking(i, p),
                        tplus(
                            layout.marking(i - 1, p),
                            tint(post.get(p, 0) - pre.get(p, 0)),
                        ),
                    )
                    for p in net.places
                )
            )
            out.append(timplies(fires, token_game))
            read_sub = {v: layout.x(i - 1, v) for v in net.variables}
            write_sub = {v: layout.x(i, v) for v in net.variables}
            guard_term = guard_to_term(t.guard, read_sub, write_sub, var_types, interner)
            frame = tand(
                *(
                    teq(layout.x(i, v), layout.x(i - 1, v))
                    for v in sorted(net.variables)
                    if v not in net.write_set(t)
                )
            )
            out.append(timplies(fires, tand(guard_term, frame)))
    return [a for a in out if a != terms.TRUE]


def _spec_constraint(var: Var, spec: Spec, vtype: str, interner: StringInterner) -> Term:
    if spec.kind == SET:
        return tor(*(teq(var, const_term(v, vtype, interner)) for v in spec.payload))
    lo, hi = spec.payload
    return tand(
        tge(var, const_term(lo, vtype, interner)),
        tle(var, const_term(hi, vtype, interner)),
    )


def encode_trace(
    trace: UncertainTrace,
    layout: VariableLayout,
    net: DPN,
    interner: StringInterner,
) -> List[Term]:
    """Drop/activity/data/timestamp ranges plus, for non-sequential traces,
    the position-timestamp coupling and the inverse-function constraints."""
    var_types = net.var_types()
    out: List[Term] = []
    for ue in trace:
        if ue.certain:
            out.append(tnot(layout.drop(ue.eid)))
        act = layout.act(ue.eid)
        out.append(tand(tge(act, tint(1)), tle(act, tint(len(ue.labels)))))
        data = ue.data_map()
        for v in sorted(net.variables):
            td = layout.td(v, ue.eid)
            if v in data:
                out.append(_spec_constraint(td, data[v], var_types[v], interner))
            elif var_types[v] == STRING and len(interner):
                out.append(tand(tge(td, tint(0)), tlt(td, tint(len(interner)))))
    if not layout.sequential:
        m = len(trace)
        codes = {ue.eid: idx for idx, ue in enumerate(trace, start=1)}
        for ue in trace:
            out.append(_spec_constraint(layout.ts(ue.eid), ue.ts, INT, interner))
            pos = layout.pos(ue.eid)
            out.append(tand(tge(pos, tint(1)), tle(pos, tint(m))))
        for j in range(1, m + 1):
            out.append(tor(*(teq(layout.nth(j), tint(codes[ue.eid])) for ue in trace)))
        for a in trace:
            for b in trace:
                if a.eid == b.eid:
                    continue
                out.append(
                    timplies(
                        tlt(layout.pos(a.eid), layout.pos(b.eid)),
                        tle(layout.ts(a.eid), layout.ts(b.eid)),
                    )
                )
                out.append(
                    timplies(
                        tlt(layout.ts(a.eid), layout.ts(b.eid)),
                        tlt(layout.pos(a.eid), layout.pos(b.eid)),
                    )
                )
        for j in range(1, m + 1):
            for ue in trace:
                out.append(
                    teq(
                        teq(layout.nth(j), tint(codes[ue.eid])),
                        teq(layout.pos(ue.eid), tint(j)),
                    )
                )
    return [a for a in out if a != terms.TRUE]


@dataclass
class CellBranches:
    """Per-cell branch value terms, kept for decoding the alignment."""

    log: Optional[Term] = None
    drop: Optional[Term] = None
    model: Optional[Term] = None
    sync: Optional[Term] = None


class DeltaEncoder:
    """Builds the edit-distance recurrence and its ingredient terms."""

    def __init__(
        self,
        net_aug: DPN,
        trace: UncertainTrace,
        cf: CostFunctions,
        layout: VariableLayout,
        big_m_value: Fraction,
        interner: StringInterner,
    ):
        self.net = net_aug
        self.trace = trace
        self.cf = cf
        self.layout = layout
        self.bigM = treal(big_m_value)
        self.interner = interner
        self.var_types = net_aug.var_types()
        self.num_vars = max(len(net_aug.variables), 1)
        self.rows = trace.time_sorted() if layout.sequential else tuple(trace)
        self.codes = {ue.eid: idx for idx, ue in enumerate(trace, start=1)}

    # -- cost ingredient terms ------------------------------------------------

    def _finite(self, cost) -> Term:
        return treal(cost) if is_finite(cost) else self.bigM

    def _select_event(self, i: int, per_event) -> Term:
        """Case split on which event occupies realization position i."""
        if self.layout.sequential:
            return per_event(self.rows[i - 1])
        events = list(self.trace)
        term = per_event(events[-1])
        for ue in reversed(events[:-1]):
            term = tite(
                teq(self.layout.nth(i), tint(self.codes[ue.eid])),
                per_event(ue),
                term,
            )
        return term

    def _theta_const(self, ue: UncertainEvent, label_idx: int) -> Fraction:
        _, p = ue.labels[label_idx]
        return self.cf.theta_const(ue.conf, p)

    def _label_ite(self, ue: UncertainEvent, per_label) -> Term:
        n_labels = len(ue.labels)
        term = per_label(n_labels - 1)
        for a in range(n_labels - 2, -1, -1):
            term = tite(teq(self.layout.act(ue.eid), tint(a + 1)), per_label(a), term)
        return term

    def log_term(self, i: int) -> Term:
        """Cost of keeping the position-i event as a log move; blocked when
        the event is dropped."""

        def per_event(ue: UncertainEvent) -> Term:
            def per_label(a: int) -> Term:
                label = ue.labels[a][0]
                cost = self.cf.combine(self.cf.pl(label), self._theta_const(ue, a), False)
                return self._finite(cost)

            return tite(self.layout.drop(ue.eid), self.bigM, self._label_ite(ue, per_label))

        return self._select_event(i, per_event)

    def drop_term(self, i: int) -> Term:
        """Removal cost of the position-i event; blocked unless dropped."""

        def per_event(ue: UncertainEvent) -> Term:
            return tite(self.layout.drop(ue.eid), self._finite(self.cf.kappa_ut(ue)), self.bigM)

        return self._select_event(i, per_event)

    def model_term(self, j: int) -> Term:
        ts = self.net.transitions
        term: Term = treal(self.cf.pm(ts[-1]))
        for idx in range(len(ts) - 2, -1, -1):
            term = tite(
                teq(self.layout.t(j), tint(idx + 1)),
                treal(self.cf.pm(ts[idx])),
                term,
            )
        return term

    def sync_term(self, i: int, j: int) -> Term:
        """Cost of synchronizing the position-i event with run step j."""

        def per_event(ue: UncertainEvent) -> Term:
            ts = self.net.transitions
            term = self._sync_cost(ue, ts[-1], j)
            for idx in range(len(ts) - 2, -1, -1):
                term = tite(
                    teq(self.layout.t(j), tint(idx + 1)),
                    self._sync_cost(ue, ts[idx], j),
                    term,
                )
            return tite(self.layout.drop(ue.eid), self.bigM, term)

        return self._select_event(i, per_event)

    def _sync_cost(self, ue: UncertainEvent, t: Transition, j: int) -> Term:
        if t.label is None:
            return self.bigM
        label_idx = None
        for a, (b, _) in enumerate(ue.labels):
            if b == t.label:
                label_idx = a
                break
        if label_idx is None:
            return self.bigM
        writes = self.net.write_set(t)
        if self.cf.all_writes:
            compared = sorted(writes)
        else:
            dom = {v for v, _ in ue.data}
            compared = sorted(writes & dom)
        theta_c = self._theta_const(ue, label_idx)
        if not compared:
            core: Term = treal(self.cf.combine(Fraction(0), theta_c, False))
        else:
            count = tplus(
                *(
                    tite(
                        tne(self.layout.td(v, ue.eid), self.layout.x(j, v)),
                        treal(1),
                        treal(0),
                    )
                    for v in compared
                )
            )
            peq = tmul_const(Fraction(1, self.num_vars), count)
            if self.cf.mode == FIT:
                core = tite(
                    teq(peq, treal(0)),
                    treal(theta_c),
                    tmul_const(1 + theta_c, peq),
                )
            else:
                core = peq
        return tite(teq(self.layout.act(ue.eid), tint(label_idx + 1)), core, self.bigM)

    # -- the recurrence ----------------------------------------------------------

    def encode(self) -> Tuple[List[Term], Dict[Tuple[int, int], CellBranches]]:
        layout = self.layout
        m, n = layout.m, layout.n
        out: List[Term] = [teq(layout.d(0, 0), treal(0))]
        cells: Dict[Tuple[int, int], CellBranches] = {}
        model_terms = {j: self.model_term(j) for j in range(1, n + 1)}
        log_terms = {i: self.log_term(i) for i in range(1, m + 1)}
        drop_terms = {i: self.drop_term(i) for i in range(1, m + 1)}
        for j in range(1, n + 1):
            branch = tplus(model_terms[j], layout.d(0, j - 1))
            out.append(teq(layout.d(0, j), branch))
            cells[(0, j)] = CellBranches(model=branch)
        for i in range(1, m + 1):
            log_b = tplus(log_terms[i], layout.d(i - 1, 0))
            drop_b = tplus(drop_terms[i], layout.d(i - 1, 0))
            out.append(teq(layout.d(i, 0), tmin(log_b, drop_b)))
            cells[(i, 0)] = CellBranches(log=log_b, drop=drop_b)
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                sync_b = tplus(self.sync_term(i, j), layout.d(i - 1, j - 1))
                log_b = tplus(log_terms[i], layout.d(i - 1, j))
                drop_b = tplus(drop_terms[i], layout.d(i - 1, j))
                model_b = tplus(model_terms[j], layout.d(i, j - 1))
                best = tmin(tmin(tmin(sync_b, log_b), drop_b), model_b)
                out.append(teq(layout.d(i, j), best))
                cells[(i, j)] = CellBranches(
                    log=log_b, drop=drop_b, model=model_b, sync=sync_b
                )
        return out, cells


def encode_delta(
    net_aug: DPN,
    trace: UncertainTrace,
    cf: CostFunctions,
    layout: VariableLayout,
    big_m_value: Fraction,
    interner: StringInterner,
) -> Tuple[List[Term], Dict[Tuple[int, int], CellBranches]]:
    return DeltaEncoder(net_aug, trace, cf, layout, big_m_value, interner).encode()


# -- the assembled problem -------------------------------------------------------


@dataclass
class SmtProblem:
    layout: VariableLayout
    assertions: List[Term]
    objective: Var
    big_m_value: Fraction
    net: DPN  # augmented
    trace: UncertainTrace
    cf: CostFunctions
    cells: Dict[Tuple[int, int], CellBranches]
    interner: StringInterner
    meta: Dict[str, object] = field(default_factory=dict)

    def declarations(self) -> List[Var]:
        return self.layout.all_vars()

    def to_smtlib(self, native_optimization: bool = True, commands: bool = True) -> str:
        lines = ["(set-option :produce-models true)"]
        lines.extend(terms.declarations(self.declarations()))
        lines.extend(f"(assert {sexp(a)})" for a in self.assertions)
        if commands:
            if native_optimization:
                lines.append(f"(minimize {self.objective.name})")
            lines.append("(check-sat)")
            names = " ".join(v.name for v in self.declarations())
            lines.append(f"(get-value ({names}))")
        return "\n".join(lines) + "\n"


def bind_trace_to_net(trace: UncertainTrace, net: DPN) -> UncertainTrace:
    """Type-check and coerce trace data values against the net's variables."""
    from .values import MalformedValueError, coerce_value

    var_types = net.var_types()
    events = []
    for ue in trace:
        data = []
        for v, spec in ue.data:
            if v not in var_types:
                raise EncodingError(
                    f"event {ue.eid!r} constrains unknown variable {v!r}"
                )
            vtype = var_types[v]
            try:
                if spec.kind == SET:
                    new_spec = Spec.of_set(tuple(coerce_value(x, vtype) for x in spec.payload))
                else:
                    if vtype not in (INT, RAT):
                        raise MalformedValueError(
                            f"interval not allowed for {vtype} variable {v!r}"
                        )
                    lo, hi = (coerce_value(x, vtype) for x in spec.payload)
                    new_spec = Spec.of_interval(lo, hi)
            except MalformedValueError as exc:
                raise EncodingError(f"event {ue.eid!r}, variable {v!r}: {exc}") from exc
            data.append((v, new_spec))
        events.append(
            UncertainEvent(ue.eid, ue.conf, ue.labels, ue.ts, tuple(data))
        )
    return UncertainTrace(events)


def build_problem(
    net: DPN,
    trace: UncertainTrace,
    cf: CostFunctions,
    n_override: Optional[int] = None,
    universe: Optional[Mapping[str, Sequence[Value]]] = None,
    run_cost_hint: Optional[Fraction] = None,
    smt_run_finder=None,
) -> SmtProblem:
    """Assemble the full optimization problem for one trace."""
    trace = bind_trace_to_net(trace, net)
    k = silent_chain_bound(net)
    c = (
        run_cost_hint
        if run_cost_hint is not None
        else cheapest_run_cost_ub(net, cf.pm, universe=universe, smt_fallback=smt_run_finder)
    )
    n = compute_run_bound(net, trace, cf, c, k, n_override)
    net_aug = augment_final_loop(net)
    interner = collect_strings(net_aug, trace)
    layout = VariableLayout(net_aug, trace, n, trace.sequential())
    bm = big_m(trace, cf, net_aug, n, c)
    assertions = encode_run(net_aug, n, layout, interner)
    assertions += encode_trace(trace, layout, net_aug, interner)
    delta, cells = encode_delta(net_aug, trace, cf, layout, bm, interner)
    assertions += delta
    return SmtProblem(
        layout=layout,
        assertions=assertions,
        objective=layout.d(len(trace), n),
        big_m_value=bm,
        net=net_aug,
        trace=trace,
        cf=cf,
        cells=cells,
        interner=interner,
        meta={
            "m": len(trace),
            "m1": trace.m1,
            "m2": trace.m2,
            "n": n,
            "c": c,
            "k": k,
            "mode": cf.mode,
            "sequential": trace.sequential(),
        },
    )
