"""Alignment cost schema: move penalties, confidence penalty, removal cost.

Two instantiations ship: ``standard-fit`` (confidence-aware, the reported
optimum is an expected best-case fitness) and ``standard-min`` (a lower
bound over all realizations that ignores confidences).  Both share the
standard data-aware move penalties; per-activity overrides can be layered
on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import guards
from .dpn import DPN, Transition, TransitionFiring
from .ulog import Event, Realization, UncertainEvent, UncertainTrace
from .values import INF, Cost, cost_sum, is_finite

LOG = "log"
MODEL = "model"
SYNC = "sync"

FIT = "fit"
MIN = "min"


class CostModelError(ValueError):
    pass


@dataclass(frozen=True)
class Move:
    kind: str  # LOG, MODEL or SYNC; (no event, no firing) is unrepresentable
    event: Optional[Event] = None
    firing: Optional[TransitionFiring] = None

    def __post_init__(self):
        if self.kind == LOG and (self.event is None or self.firing is not None):
            raise CostModelError("log move needs an event and no firing")
        if self.kind == MODEL and (self.event is not None or self.firing is None):
            raise CostModelError("model move needs a firing and no event")
        if self.kind == SYNC and (self.event is None or self.firing is None):
            raise CostModelError("synchronous move needs both sides")


Alignment = Tuple[Move, ...]


def log_projection(alignment: Alignment) -> Tuple[Event, ...]:
    return tuple(m.event for m in alignment if m.event is not None)


def model_projection(alignment: Alignment) -> Tuple[TransitionFiring, ...]:
    return tuple(m.firing for m in alignment if m.firing is not None)


@dataclass(frozen=True)
class CostReport:
    move_costs: Tuple[Cost, ...]
    kappa_a: Cost
    kappa_r: Cost

    @property
    def total(self) -> Cost:
        return self.kappa_a + self.kappa_r


# -- the standard penalty functions -------------------------------------------


def standard_pl(event: Event) -> Fraction:
    return Fraction(1)


def standard_pm(t: Transition) -> Fraction:
    if t.silent or t.synthetic:
        return Fraction(0)
    return Fraction(1) + len(guards.write_vars(t.guard))


def standard_peq(
    event: Event,
    firing: TransitionFiring,
    num_vars: int,
    constrained: Optional[Sequence[str]] = None,
    all_writes: bool = False,
) -> Cost:
    """Synchronous-move penalty: infinite on label mismatch, else the number
    of mismatching written variables divided by the variable count.

    By default only written variables the log event actually constrains are
    compared (``constrained``, falling back to the event's own assignment);
    ``all_writes`` compares every written variable instead.
    """
    t = firing.transition
    if t.label is None or t.label != event.label:
        return INF
    assign = event.assign_map()
    if constrained is None:
        constrained = tuple(assign)
    mismatches = 0
    for v, written in firing.writes.items():
        if not all_writes and v not in constrained:
            continue
        if v in assign and assign[v] != written:
            mismatches += 1
        elif v not in assign and not all_writes and v in constrained:
            mismatches += 1
    den = max(num_vars, 1)
    return Fraction(mismatches, den)


def theta_fit(event: Event, trace: UncertainTrace) -> Fraction:
    """Confidence penalty for keeping the event and choosing its label."""
    if not trace.has_id(event.eid):
        raise CostModelError(f"unknown event id {event.eid!r}")
    ue = trace.by_id(event.eid)
    p = ue.label_prob(event.label)
    if p is None:
        raise CostModelError(f"label {event.label!r} not admissible for {event.eid!r}")
    return (1 - ue.conf) + (1 - p)


def combine_fit(k: Cost, th: Fraction, is_log_absent: bool) -> Cost:
    """Merge move penalty and confidence penalty for the fit instantiation."""
    if is_log_absent:
        return k
    if not is_finite(k):
        return INF
    if k == 0:
        return Fraction(th)
    return k * (1 + th)


def removal_cost_fit(ue_or_event, trace: UncertainTrace) -> Cost:
    eid = ue_or_event.eid
    if not trace.has_id(eid):
        raise CostModelError(f"unknown event id {eid!r}")
    ue = trace.by_id(eid)
    return ue.conf if ue.conf < 1 else INF


# -- instantiations -------------------------------------------------------------


@dataclass(frozen=True)
class CostFunctions:
    """A concrete instantiation of the cost schema.

    ``overrides`` maps an activity label to optional ``pl`` / ``pm``
    replacements; silent and synthetic transitions always cost 0.
    """

    name: str
    mode: str  # FIT or MIN
    overrides: Tuple[Tuple[str, Tuple[Optional[Fraction], Optional[Fraction]]], ...] = ()
    all_writes: bool = False

    def _override(self, label: Optional[str], idx: int) -> Optional[Fraction]:
        for key, pair in self.overrides:
            if key == label:
                return pair[idx]
        return None

    def pl(self, label: str) -> Fraction:
        override = self._override(label, 0)
        return override if override is not None else Fraction(1)

    def pm(self, t: Transition) -> Fraction:
        if t.silent or t.synthetic:
            return Fraction(0)
        override = self._override(t.label, 1)
        return override if override is not None else standard_pm(t)

    def peq(self, event: Event, firing: TransitionFiring, ue: Optional[UncertainEvent], num_vars: int) -> Cost:
        constrained = tuple(v for v, _ in ue.data) if ue is not None else None
        return standard_peq(event, firing, num_vars, constrained, self.all_writes)

    def theta(self, event: Event, trace: UncertainTrace) -> Fraction:
        if self.mode == MIN:
            return Fraction(1)
        return theta_fit(event, trace)

    def theta_const(self, conf: Fraction, p: Fraction) -> Fraction:
        if self.mode == MIN:
            return Fraction(1)
        return (1 - conf) + (1 - p)

    def kappa_ut(self, ue: UncertainEvent) -> Cost:
        if self.mode == MIN:
            return Fraction(0)
        return ue.conf if ue.conf < 1 else INF

    def combine(self, k: Cost, th: Fraction, is_log_absent: bool) -> Cost:
        if self.mode == MIN:
            return k if is_log_absent else k * th
        return combine_fit(k, th, is_log_absent)


def standard_fit_functions(overrides=None, all_writes: bool = False) -> CostFunctions:
    return CostFunctions("standard-fit", FIT, _freeze_overrides(overrides), all_writes)


def min_mode_functions(overrides=None, all_writes: bool = False) -> CostFunctions:
    return CostFunctions("standard-min", MIN, _freeze_overrides(overrides), all_writes)


def _freeze_overrides(overrides) -> Tuple:
    if not overrides:
        return ()
    out = []
    for label, entry in overrides.items():
        pl = entry.get("pl")
        pm = entry.get("pm")
        out.append(
            (
                label,
                (
                    None if pl is None else Fraction(pl),
                    None if pm is None else Fraction(pm),
                ),
            )
        )
    return tuple(out)


_REGISTRY = {
    "standard-fit": standard_fit_functions,
    "standard-min": min_mode_functions,
}


def register_cost_functions(name: str, factory) -> None:
    _REGISTRY[name] = factory


def cost_functions_by_name(name: str, overrides=None, all_writes: bool = False) -> CostFunctions:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise CostModelError(
            f"unknown cost functions {name!r}; known: {sorted(_REGISTRY)}"
        ) from None
    return factory(overrides, all_writes)


# -- total cost ------------------------------------------------------------------


def total_cost(
    alignment: Alignment,
    realization: Realization,
    trace: UncertainTrace,
    cf: CostFunctions,
    net: DPN,
) -> CostReport:
    """Exact total conformance cost: alignment cost plus removal cost.

    The alignment's log projection must equal the realization.
    """
    if log_projection(alignment) != realization.events:
        raise CostModelError("alignment's log projection differs from the realization")
    num_vars = len(net.variables)
    move_costs: List[Cost] = []
    for move in alignment:
        if move.kind == MODEL:
            k = cf.pm(move.firing.transition)
            move_costs.append(cf.combine(k, Fraction(1), True))
            continue
        event = move.event
        ue = trace.by_id(event.eid) if trace.has_id(event.eid) else None
        if ue is None:
            raise CostModelError(f"event {event.eid!r} missing from the trace")
        th = cf.theta(event, trace)
        if move.kind == LOG:
            k: Cost = cf.pl(event.label)
        else:
            k = cf.peq(event, move.firing, ue, num_vars)
        move_costs.append(cf.combine(k, th, False))
    kappa_a = cost_sum(move_costs)
    kept = set(realization.ids())
    kappa_r = cost_sum(cf.kappa_ut(ue) for ue in trace if ue.eid not in kept)
    return CostReport(tuple(move_costs), kappa_a, kappa_r)
