"""Reconstruct run, realization, and alignment from a solver model, and
re-verify all three against the semantic layer.

Backtracking follows the distance recurrence with a fixed case order
(log, drop, model, synchronous), which makes the reported alignment
deterministic even when several optima exist.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .costs import (
    LOG,
    MODEL,
    SYNC,
    Alignment,
    CostFunctions,
    Move,
    log_projection,
    model_projection,
    total_cost,
)
from .dpn import DPN, TransitionFiring, is_process_run, replay_diagnose
from .encoding import SmtProblem, StringInterner, VariableLayout
from .terms import eval_term
from .ulog import Event, Realization, UncertainTrace, validate_diagnose
from .values import BOOL, INT, RAT, STRING, Value, render_decimal


class DecodeError(RuntimeError):
    pass


def _typed(value, vtype: str, interner: StringInterner) -> Value:
    if vtype == BOOL:
        return bool(value)
    if vtype == INT:
        return int(value)
    if vtype == RAT:
        return Fraction(value)
    return interner.string(int(value))


def decode_run(
    assignment: Dict[str, object], layout: VariableLayout, net_aug: DPN, interner: StringInterner
) -> List[TransitionFiring]:
    """The symbolic run as concrete firings, reads/writes taken from the
    step data variables (synthetic padding included)."""
    var_types = net_aug.var_types()
    run = []
    for i in range(1, layout.n + 1):
        idx = int(assignment[layout.t(i).name])
        if not 1 <= idx <= len(net_aug.transitions):
            raise DecodeError(f"transition index {idx} out of range at step {i}")
        t = net_aug.transitions[idx - 1]
        reads = {
            v: _typed(assignment[layout.x(i - 1, v).name], var_types[v], interner)
            for v in sorted(net_aug.variables)
        }
        writes = {
            v: _typed(assignment[layout.x(i, v).name], var_types[v], interner)
            for v in sorted(net_aug.write_set(t))
        }
        run.append(TransitionFiring(t, reads, writes))
    return run


def _row_order(
    assignment: Dict[str, object], layout: VariableLayout, trace: UncertainTrace
) -> List:
    """Events in realization-position order (kept and dropped alike)."""
    if layout.sequential:
        return list(trace.time_sorted())
    keyed = [
        (
            int(assignment[layout.ts(ue.eid).name]),
            int(assignment[layout.pos(ue.eid).name]),
            ue,
        )
        for ue in trace
    ]
    keyed.sort(key=lambda kv: (kv[0], kv[1]))
    return [ue for _, _, ue in keyed]


def _event_of(
    assignment: Dict[str, object],
    layout: VariableLayout,
    ue,
    net_aug: DPN,
    interner: StringInterner,
) -> Event:
    var_types = net_aug.var_types()
    label_idx = int(assignment[layout.act(ue.eid).name])
    label = ue.labels[label_idx - 1][0]
    assign = {
        v: _typed(assignment[layout.td(v, ue.eid).name], var_types[v], interner)
        for v in sorted(net_aug.variables)
    }
    return Event.make(ue.eid, label, assign)


def decode_realization(
    assignment: Dict[str, object],
    layout: VariableLayout,
    trace: UncertainTrace,
    net_aug: DPN,
    interner: StringInterner,
) -> Realization:
    """Order events by their timestamp values (position breaks ties), drop
    the ones flagged dropped, fix labels and data from the model."""
    events = []
    witnesses = []
    for ue in _row_order(assignment, layout, trace):
        if bool(assignment[layout.drop(ue.eid).name]):
            continue
        events.append(_event_of(assignment, layout, ue, net_aug, interner))
        if layout.sequential:
            witnesses.append(ue.ts.payload[0])
        else:
            witnesses.append(int(assignment[layout.ts(ue.eid).name]))
    return Realization(tuple(events), tuple(witnesses))


def decode_alignment(
    assignment: Dict[str, object],
    problem: SmtProblem,
    run: Sequence[TransitionFiring],
    realization: Realization,
) -> Alignment:
    """Backtrack the distance recurrence under the model's values."""
    layout = problem.layout
    trace = problem.trace
    rows = _row_order(assignment, layout, trace)
    row_event: Dict[int, Optional[Event]] = {}
    kept_iter = iter(realization.events)
    for i, ue in enumerate(rows, start=1):
        if bool(assignment[layout.drop(ue.eid).name]):
            row_event[i] = None
        else:
            row_event[i] = next(kept_iter)

    def val(term) -> Fraction:
        return Fraction(eval_term(term, assignment))

    moves: List[Move] = []
    i, j = layout.m, layout.n
    while i > 0 or j > 0:
        dv = Fraction(assignment[layout.d(i, j).name])
        cell = problem.cells[(i, j)]
        if i > 0 and cell.log is not None and dv == val(cell.log):
            event = row_event[i]
            if event is None:
                raise DecodeError(f"log branch chosen for dropped row {i}")
            moves.append(Move(LOG, event=event))
            i -= 1
            continue
        if i > 0 and cell.drop is not None and dv == val(cell.drop):
            if row_event[i] is not None:
                raise DecodeError(f"drop branch chosen for kept row {i}")
            i -= 1
            continue
        if j > 0 and cell.model is not None and dv == val(cell.model):
            moves.append(Move(MODEL, firing=run[j - 1]))
            j -= 1
            continue
        if i > 0 and j > 0 and cell.sync is not None and dv == val(cell.sync):
            event = row_event[i]
            if event is None:
                raise DecodeError(f"sync branch chosen for dropped row {i}")
            moves.append(Move(SYNC, event=event, firing=run[j - 1]))
            i -= 1
            j -= 1
            continue
        raise DecodeError(f"no recurrence branch matches at cell ({i}, {j})")
    moves.reverse()
    return tuple(moves)


def strip_synthetic_run(run: Sequence[TransitionFiring]) -> Tuple[TransitionFiring, ...]:
    return tuple(f for f in run if not f.transition.synthetic)


def strip_synthetic_alignment(alignment: Alignment) -> Alignment:
    return tuple(
        m for m in alignment if m.firing is None or not m.firing.transition.synthetic
    )


@dataclass
class DecodedResult:
    run: Tuple[TransitionFiring, ...]
    realization: Realization
    alignment: Alignment
    cost: Fraction
    mode: str
    verified: bool
    raw_run: Tuple[TransitionFiring, ...]
    raw_alignment: Alignment
    genuine: bool  # objective stayed below big-M
    issues: Tuple[str, ...] = ()


def decode_and_verify(problem: SmtProblem, assignment: Dict[str, object]) -> DecodedResult:
    """Full decoding plus the three verification obligations: the run
    replays, the realization validates, and re-costing the alignment
    reproduces the solver's objective exactly."""
    layout = problem.layout
    raw_run = decode_run(assignment, layout, problem.net, problem.interner)
    realization = decode_realization(assignment, layout, problem.trace, problem.net, problem.interner)
    raw_alignment = decode_alignment(assignment, problem, raw_run, realization)
    objective = Fraction(assignment[problem.objective.name])

    issues: List[str] = []
    ok_run, run_diag = replay_diagnose(raw_run, problem.net)
    if not ok_run:
        issues.append(f"decoded run does not replay: {run_diag}")
    ok_real, real_diag = validate_diagnose(realization, problem.trace)
    if not ok_real:
        issues.append(f"decoded realization invalid: {real_diag}")
    if log_projection(raw_alignment) != realization.events:
        issues.append("alignment log projection differs from the realization")
    if model_projection(raw_alignment) != tuple(raw_run):
        issues.append("alignment model projection differs from the run")
    recost = total_cost(raw_alignment, realization, problem.trace, problem.cf, problem.net)
    if recost.total != objective:
        issues.append(
            f"re-computed cost {recost.total} differs from objective {objective}"
        )
    return DecodedResult(
        run=strip_synthetic_run(raw_run),
        realization=realization,
        alignment=strip_synthetic_alignment(raw_alignment),
        cost=objective,
        mode=problem.cf.mode,
        verified=not issues,
        raw_run=tuple(raw_run),
        raw_alignment=raw_alignment,
        genuine=objective < problem.big_m_value,
        issues=tuple(issues),
    )


# -- rendering ----------------------------------------------------------------


def _firing_text(f: TransitionFiring) -> str:
    t = f.transition
    name = t.label if t.label is not None else f"tau({t.tid})"
    if f.writes:
        inner = ",".join(f"{v}={_value_text(x)}" for v, x in sorted(f.writes.items()))
        return f"{name}{{{inner}}}"
    return name


def _value_text(v: Value) -> str:
    if isinstance(v, Fraction):
        return render_decimal(v)
    return str(v)


def render_alignment_text(alignment: Alignment) -> str:
    """Two-row rendering; >> marks the skipped side of log/model moves."""
    tops, bottoms = [], []
    for m in alignment:
        top = f"{m.event.eid}:{m.event.label}" if m.event is not None else ">>"
        bottom = _firing_text(m.firing) if m.firing is not None else ">>"
        width = max(len(top), len(bottom))
        tops.append(top.ljust(width))
        bottoms.append(bottom.ljust(width))
    return f"log   | {'  '.join(tops)}\nmodel | {'  '.join(bottoms)}"


def _json_value(v: Value):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return v


def alignment_to_json(
    result: DecodedResult, trace: UncertainTrace, cf: CostFunctions, net_aug: DPN
):
    report = total_cost(result.raw_alignment, result.realization, trace, cf, net_aug)
    moves = []
    for m, cost in zip(result.raw_alignment, report.move_costs):
        if m.firing is not None and m.firing.transition.synthetic:
            continue
        entry: Dict[str, object] = {"kind": m.kind, "cost": _json_value(Fraction(cost))}
        if m.event is not None:
            entry["event"] = {
                "id": m.event.eid,
                "label": m.event.label,
                "data": {v: _json_value(x) for v, x in m.event.assign},
            }
        if m.firing is not None:
            t = m.firing.transition
            entry["firing"] = {
                "transition": t.tid,
                "label": t.label,
                "writes": {v: _json_value(x) for v, x in sorted(m.firing.writes.items())},
            }
        moves.append(entry)
    kept = {e.eid for e in result.realization.events}
    return {
        "moves": moves,
        "cost": _json_value(result.cost),
        "realization": [
            {
                "id": e.eid,
                "label": e.label,
                "data": {v: _json_value(x) for v, x in e.assign},
            }
            for e in result.realization.events
        ],
        "dropped": [ue.eid for ue in trace if ue.eid not in kept],
    }
