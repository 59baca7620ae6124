"""Event logs with uncertainty: data model, parsers, realizations.

An uncertain trace is a *set* of events; each event carries an existence
confidence, a weighted set of candidate activities, a timestamp set or
interval, and per-variable value sets or intervals.  A realization resolves
all of that into an ordered sequence of plain events.
"""

from __future__ import annotations

import itertools
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .values import INT, RAT, Value, MalformedValueError, parse_exact

SET = "set"
INTERVAL = "interval"


class LogError(ValueError):
    """Schema violation in a log file, with trace/event coordinates."""


@dataclass(frozen=True)
class Spec:
    """A finite value set or a closed interval."""

    kind: str  # SET or INTERVAL
    payload: Tuple

    @staticmethod
    def of_set(values: Iterable) -> "Spec":
        vals = tuple(values)
        if not vals:
            raise LogError("empty value set")
        return Spec(SET, vals)

    @staticmethod
    def of_interval(lo, hi) -> "Spec":
        if hi < lo:
            raise LogError(f"empty interval [{lo}, {hi}]")
        return Spec(INTERVAL, (lo, hi))

    def admits(self, value) -> bool:
        if self.kind == SET:
            return value in self.payload
        lo, hi = self.payload
        if isinstance(value, (bool, str)):
            return False
        return lo <= value <= hi

    def singleton(self) -> bool:
        if self.kind == SET:
            return len(self.payload) == 1
        return self.payload[0] == self.payload[1]

    def min_at_least(self, floor):
        """Smallest admissible value >= floor, or None."""
        if self.kind == SET:
            candidates = [v for v in self.payload if v >= floor]
            return min(candidates) if candidates else None
        lo, hi = self.payload
        v = max(lo, floor)
        return v if v <= hi else None


@dataclass(frozen=True)
class UncertainEvent:
    eid: str
    conf: Fraction
    labels: Tuple[Tuple[str, Fraction], ...]  # ordered (activity, confidence) pairs
    ts: Spec
    data: Tuple[Tuple[str, Spec], ...] = ()

    def __post_init__(self):
        if not (0 < self.conf <= 1):
            raise LogError(f"event {self.eid!r}: confidence {self.conf} outside (0, 1]")
        if not self.labels:
            raise LogError(f"event {self.eid!r}: empty label set")
        total = sum((p for _, p in self.labels), Fraction(0))
        if total != 1:
            raise LogError(f"event {self.eid!r}: label confidences sum to {total}, not 1")
        for _, p in self.labels:
            if not (0 < p <= 1):
                raise LogError(f"event {self.eid!r}: label confidence {p} outside (0, 1]")

    @property
    def certain(self) -> bool:
        return self.conf == 1

    def label_prob(self, activity: str) -> Optional[Fraction]:
        for b, p in self.labels:
            if b == activity:
                return p
        return None

    def label_names(self) -> Tuple[str, ...]:
        return tuple(b for b, _ in self.labels)

    def data_map(self) -> Dict[str, Spec]:
        return dict(self.data)


class UncertainTrace:
    """A finite set of uncertain events with distinct identifiers."""

    def __init__(self, events: Sequence[UncertainEvent]):
        self.events = tuple(events)
        ids = [e.eid for e in self.events]
        if len(set(ids)) != len(ids):
            raise LogError("duplicate event identifiers in trace")
        self._by_id = {e.eid: e for e in self.events}

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def by_id(self, eid: str) -> UncertainEvent:
        return self._by_id[eid]

    def has_id(self, eid: str) -> bool:
        return eid in self._by_id

    @property
    def m1(self) -> int:
        return sum(1 for e in self.events if e.certain)

    @property
    def m2(self) -> int:
        return sum(1 for e in self.events if not e.certain)

    def sequential(self) -> bool:
        """True when every event has a single timestamp and all are distinct."""
        stamps = []
        for e in self.events:
            if not e.ts.singleton():
                return False
            stamps.append(e.ts.payload[0])
        return len(set(stamps)) == len(stamps)

    def time_sorted(self) -> Tuple[UncertainEvent, ...]:
        return tuple(sorted(self.events, key=lambda e: e.ts.payload[0]))


@dataclass(frozen=True)
class Event:
    """An event without uncertainty: id, activity, variable assignment."""

    eid: str
    label: str
    assign: Tuple[Tuple[str, Value], ...] = ()

    @staticmethod
    def make(eid: str, label: str, assign: Mapping[str, Value]) -> "Event":
        return Event(eid, label, tuple(sorted(assign.items())))

    def assign_map(self) -> Dict[str, Value]:
        return dict(self.assign)


@dataclass(frozen=True)
class Realization:
    """An ordered resolution of (a subset of) an uncertain trace.

    ``witnesses`` holds one admissible, monotone timestamp per event; it is
    evidence for the ordering and not part of the realization's identity.
    """

    events: Tuple[Event, ...]
    witnesses: Optional[Tuple[int, ...]] = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.events)

    def ids(self) -> Tuple[str, ...]:
        return tuple(e.eid for e in self.events)


def is_admissible_label(ue: UncertainEvent, activity: str) -> bool:
    return ue.label_prob(activity) is not None


def greedy_witnesses(events: Sequence[UncertainEvent]) -> Optional[Tuple[int, ...]]:
    """Earliest-feasible monotone timestamps for the given event order."""
    out = []
    floor = 0
    for ue in events:
        t = ue.ts.min_at_least(floor)
        if t is None:
            return None
        out.append(t)
        floor = t
    return tuple(out)


def validate_diagnose(real: Realization, trace: UncertainTrace) -> Tuple[bool, Optional[str]]:
    """Check the realization conditions; return (ok, first violation)."""
    seen = set()
    for e in real.events:
        if not trace.has_id(e.eid):
            return False, f"event id {e.eid!r} does not occur in the trace"
        if e.eid in seen:
            return False, f"event id {e.eid!r} used twice"
        seen.add(e.eid)
    for ue in trace:
        if ue.certain and ue.eid not in seen:
            return False, f"certain event {ue.eid!r} was discarded"
    for e in real.events:
        ue = trace.by_id(e.eid)
        if not is_admissible_label(ue, e.label):
            return False, f"label {e.label!r} not admissible for {e.eid!r}"
        assign = e.assign_map()
        for v, spec in ue.data:
            if v not in assign:
                return False, f"event {e.eid!r} leaves constrained variable {v!r} unset"
            if not spec.admits(assign[v]):
                return False, f"value {assign[v]!r} for {v!r} not admissible in {e.eid!r}"
    if real.witnesses is not None:
        if len(real.witnesses) != len(real.events):
            return False, "witness count differs from event count"
        prev = None
        for e, t in zip(real.events, real.witnesses):
            ue = trace.by_id(e.eid)
            if not ue.ts.admits(t):
                return False, f"timestamp {t} not admissible for {e.eid!r}"
            if prev is not None and t < prev:
                return False, f"timestamps not monotone at {e.eid!r}"
            prev = t
    else:
        order = [trace.by_id(e.eid) for e in real.events]
        if greedy_witnesses(order) is None:
            return False, "no monotone admissible timestamps exist for this order"
    return True, None


def validate_realization(real: Realization, trace: UncertainTrace) -> bool:
    ok, _ = validate_diagnose(real, trace)
    return ok


class DenseIntervalError(ValueError):
    """Realizations over a dense interval cannot be enumerated."""


class EnumerationLimitError(RuntimeError):
    pass


def enumerate_realizations(
    trace: UncertainTrace,
    var_types: Optional[Mapping[str, str]] = None,
    cap: int = 1_000_000,
) -> List[Realization]:
    """The exact finite realization set of a trace.

    Realizations are distinct when they differ in event subset, order, label
    choice or data choice.  Variables an event does not constrain stay out of
    the produced assignments (they are free).  Interval data is enumerable
    only for integer-typed variables; dense intervals are an error.
    """
    droppable = [e for e in trace if not e.certain]
    fixed = [e for e in trace if e.certain]

    def data_choices(ue: UncertainEvent):
        pools = []
        names = []
        for v, spec in ue.data:
            if spec.kind == SET:
                pools.append(list(spec.payload))
            else:
                lo, hi = spec.payload
                vtype = (var_types or {}).get(v)
                if vtype == INT or (
                    vtype is None and isinstance(lo, int) and isinstance(hi, int)
                ):
                    if vtype is None:
                        raise DenseIntervalError(
                            f"interval for {v!r} in {ue.eid!r}: cannot enumerate without a type"
                        )
                    pools.append(list(range(lo, hi + 1)))
                else:
                    raise DenseIntervalError(
                        f"interval for {v!r} in {ue.eid!r} ranges over a dense domain"
                    )
            names.append(v)
        for combo in itertools.product(*pools) if pools else [()]:
            yield dict(zip(names, combo))

    def event_choices(ue: UncertainEvent):
        for b, _ in ue.labels:
            for assign in data_choices(ue):
                yield Event.make(ue.eid, b, assign)

    out: List[Realization] = []
    seen = set()
    for r in range(len(droppable) + 1):
        for dropped in itertools.combinations(droppable, r):
            kept = [e for e in trace if e not in dropped]
            for order in itertools.permutations(kept):
                witnesses = greedy_witnesses(order)
                if witnesses is None:
                    continue
                choice_pools = [list(event_choices(ue)) for ue in order]
                for combo in itertools.product(*choice_pools) if choice_pools else [()]:
                    real = Realization(tuple(combo), witnesses)
                    if real in seen:
                        continue
                    seen.add(real)
                    out.append(real)
                    if len(out) > cap:
                        raise EnumerationLimitError(
                            f"more than {cap} realizations; raise the cap to proceed"
                        )
    return out


# -- JSON log format ---------------------------------------------------------
#
# {"traces": [{"events": [{"id": ..., "conf": ..., "labels": {...},
#                          "ts": {"set": [...]} | {"interval": [lo, hi]},
#                          "data": {var: {"set": [...]} | {"interval": [lo, hi]}}}]}]}


def _conf_of(raw, where: str) -> Fraction:
    try:
        value = parse_exact(raw)
    except MalformedValueError as exc:
        raise LogError(f"{where}: {exc}") from exc
    return Fraction(value)


def _spec_of(obj, where: str, timestamps: bool = False) -> Spec:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise LogError(f"{where}: expected {{'set': [...]}} or {{'interval': [lo, hi]}}")
    kind, payload = next(iter(obj.items()))
    if kind == SET:
        if not isinstance(payload, list) or not payload:
            raise LogError(f"{where}: set must be a non-empty array")
        values = [_scalar(v, where, timestamps) for v in payload]
        return Spec.of_set(values)
    if kind == INTERVAL:
        if not isinstance(payload, list) or len(payload) != 2:
            raise LogError(f"{where}: interval must be [lo, hi]")
        lo, hi = (_scalar(v, where, timestamps) for v in payload)
        if isinstance(lo, (bool, str)) or isinstance(hi, (bool, str)):
            raise LogError(f"{where}: interval bounds must be numeric")
        if hi < lo:
            raise LogError(f"{where}: empty interval [{lo}, {hi}]")
        return Spec.of_interval(lo, hi)
    raise LogError(f"{where}: unknown spec kind {kind!r}")


def _scalar(v, where: str, timestamp: bool = False):
    if isinstance(v, bool):
        if timestamp:
            raise LogError(f"{where}: timestamps must be naturals")
        return v
    if isinstance(v, str):
        if timestamp:
            raise LogError(f"{where}: timestamps must be naturals")
        # strings that look numeric are exact numbers, anything else is a string value
        try:
            return parse_exact(v)
        except MalformedValueError:
            return v
    if isinstance(v, (int, Fraction)):
        if timestamp:
            if isinstance(v, Fraction) and v.denominator != 1:
                raise LogError(f"{where}: timestamps must be naturals")
            iv = int(v)
            if iv < 0:
                raise LogError(f"{where}: timestamps must be naturals")
            return iv
        return v
    raise LogError(f"{where}: unsupported scalar {v!r}")


def event_from_json_obj(obj, where: str) -> UncertainEvent:
    try:
        eid = obj["id"]
        conf = _conf_of(obj["conf"], f"{where}.conf")
        labels_obj = obj["labels"]
        ts = _spec_of(obj["ts"], f"{where}.ts", timestamps=True)
    except KeyError as exc:
        raise LogError(f"{where}: missing field {exc.args[0]!r}") from exc
    if not isinstance(labels_obj, dict) or not labels_obj:
        raise LogError(f"{where}.labels: expected a non-empty activity->confidence map")
    labels = tuple((b, _conf_of(p, f"{where}.labels[{b}]")) for b, p in labels_obj.items())
    data = tuple(
        (v, _spec_of(s, f"{where}.data[{v}]")) for v, s in obj.get("data", {}).items()
    )
    try:
        return UncertainEvent(str(eid), conf, labels, ts, data)
    except LogError as exc:
        raise LogError(f"{where}: {exc}") from exc


def parse_log_json_obj(obj) -> List[UncertainTrace]:
    if not isinstance(obj, dict) or "traces" not in obj:
        raise LogError("log JSON must be an object with a 'traces' array")
    traces = []
    for ti, tr in enumerate(obj["traces"]):
        events = [
            event_from_json_obj(ev, f"traces[{ti}].events[{ei}]")
            for ei, ev in enumerate(tr.get("events", []))
        ]
        try:
            traces.append(UncertainTrace(events))
        except LogError as exc:
            raise LogError(f"traces[{ti}]: {exc}") from exc
    return traces


def _spec_to_json(spec: Spec, timestamps: bool = False):
    def scalar(v):
        if isinstance(v, Fraction):
            return f"{v.numerator}/{v.denominator}"
        return v

    if spec.kind == SET:
        return {"set": [scalar(v) for v in spec.payload]}
    lo, hi = spec.payload
    return {"interval": [scalar(lo), scalar(hi)]}


def trace_to_json_obj(trace: UncertainTrace):
    return {
        "events": [
            {
                "id": e.eid,
                "conf": 1 if e.conf == 1 else f"{e.conf.numerator}/{e.conf.denominator}",
                "labels": {
                    b: (1 if p == 1 else f"{p.numerator}/{p.denominator}")
                    for b, p in e.labels
                },
                "ts": _spec_to_json(e.ts, timestamps=True),
                **({"data": {v: _spec_to_json(s) for v, s in e.data}} if e.data else {}),
            }
            for e in trace
        ]
    }


def serialize_log_json(traces: Sequence[UncertainTrace]) -> str:
    return json.dumps({"traces": [trace_to_json_obj(t) for t in traces]}, indent=2)


def parse_log(path: str, fmt: Optional[str] = None, strict: bool = False) -> List[UncertainTrace]:
    """Load a log from .json (normative schema) or .xes (best effort)."""
    name = str(path).lower()
    if fmt == "xes" or (fmt is None and name.endswith(".xes")):
        return parse_xes(path, strict=strict)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh, parse_float=Fraction)
        except json.JSONDecodeError as exc:
            raise LogError(f"{path}: {exc}") from exc
    return parse_log_json_obj(obj)


# -- XES (best effort) ---------------------------------------------------------
#
# Certain events use concept:name / time:timestamp; uncertainty rides on
# attributes prefixed "uncertainty:":
#   uncertainty:confidence            float on the event
#   uncertainty:labels                container of float entries (activity -> p)
#   uncertainty:timestamp:set         container of date/int entries
#   uncertainty:timestamp:interval    container with keys lo / hi
#   uncertainty:data:<var>:set        container of scalar entries
#   uncertainty:data:<var>:interval   container with keys lo / hi


import datetime as _dt
import warnings


def _epoch_ms(text: str) -> int:
    try:
        stamp = _dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        return int(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=_dt.timezone.utc)
    return int(stamp.timestamp() * 1000)


def _xes_scalar(el):
    tag = _strip_ns_tag(el.tag)
    value = el.get("value", "")
    if tag == "int":
        return int(value)
    if tag == "float":
        return parse_exact(value)
    if tag == "boolean":
        return value == "true"
    if tag == "date":
        return _epoch_ms(value)
    return value  # string


def _strip_ns_tag(tag: str) -> str:
    return tag.split("}", 1)[1] if tag.startswith("{") else tag


def parse_xes(path: str, strict: bool = False) -> List[UncertainTrace]:
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise LogError(f"unreadable XES: {exc}") from exc
    traces = []
    auto_id = itertools.count(1)
    for ti, trace_el in enumerate(e for e in tree.getroot() if _strip_ns_tag(e.tag) == "trace"):
        events = []
        for ei, ev_el in enumerate(e for e in trace_el if _strip_ns_tag(e.tag) == "event"):
            where = f"trace {ti}, event {ei}"
            eid = None
            conf = Fraction(1)
            labels = None
            ts = None
            data: List[Tuple[str, Spec]] = []
            for attr in ev_el:
                key = attr.get("key", "")
                if key == "concept:name":
                    if labels is None:
                        labels = ((attr.get("value"), Fraction(1)),)
                elif key == "identity:id" or key == "concept:instance":
                    eid = attr.get("value")
                elif key == "time:timestamp":
                    if ts is None:
                        ts = Spec.of_set([_epoch_ms(attr.get("value"))])
                elif key == "uncertainty:confidence":
                    conf = _conf_of(attr.get("value"), where)
                elif key == "uncertainty:labels":
                    labels = tuple(
                        (sub.get("key"), _conf_of(sub.get("value"), where))
                        for sub in attr
                    )
                elif key == "uncertainty:timestamp:set":
                    ts = Spec.of_set([_xes_scalar(sub) for sub in attr])
                elif key == "uncertainty:timestamp:interval":
                    bounds = {sub.get("key"): _xes_scalar(sub) for sub in attr}
                    ts = Spec.of_interval(bounds["lo"], bounds["hi"])
                elif key.startswith("uncertainty:data:"):
                    rest = key[len("uncertainty:data:"):]
                    var, _, kind = rest.rpartition(":")
                    if kind == SET:
                        data.append((var, Spec.of_set([_xes_scalar(sub) for sub in attr])))
                    elif kind == INTERVAL:
                        bounds = {sub.get("key"): _xes_scalar(sub) for sub in attr}
                        data.append((var, Spec.of_interval(bounds["lo"], bounds["hi"])))
                    else:
                        raise LogError(f"{where}: malformed key {key!r}")
                elif key.startswith("uncertainty:"):
                    if strict:
                        raise LogError(f"{where}: unrecognized attribute {key!r}")
                    warnings.warn(f"{where}: ignoring unrecognized attribute {key!r}")
                elif _strip_ns_tag(attr.tag) in ("int", "float", "boolean", "string") and ":" not in key:
                    data.append((key, Spec.of_set([_xes_scalar(attr)])))
            if labels is None:
                raise LogError(f"{where}: no activity name")
            if ts is None:
                raise LogError(f"{where}: no timestamp")
            if eid is None:
                eid = f"e{next(auto_id)}"
            events.append(UncertainEvent(eid, conf, labels, ts, tuple(data)))
        traces.append(UncertainTrace(events))
    return traces


def serialize_xes(traces: Sequence[UncertainTrace]) -> str:
    root = ET.Element("log", {"xes.version": "1.0"})
    for trace in traces:
        trace_el = ET.SubElement(root, "trace")
        for e in trace:
            ev = ET.SubElement(trace_el, "event")
            ET.SubElement(ev, "string", {"key": "identity:id", "value": e.eid})
            if len(e.labels) == 1:
                ET.SubElement(ev, "string", {"key": "concept:name", "value": e.labels[0][0]})
            else:
                cont = ET.SubElement(ev, "container", {"key": "uncertainty:labels"})
                for b, p in e.labels:
                    ET.SubElement(cont, "float", {"key": b, "value": str(Fraction(p))})
            if e.conf != 1:
                ET.SubElement(ev, "float", {"key": "uncertainty:confidence", "value": str(e.conf)})
            if e.ts.kind == SET:
                if e.ts.singleton():
                    ET.SubElement(ev, "int", {"key": "time:timestamp", "value": str(e.ts.payload[0])})
                else:
                    cont = ET.SubElement(ev, "container", {"key": "uncertainty:timestamp:set"})
                    for t in e.ts.payload:
                        ET.SubElement(cont, "int", {"key": "t", "value": str(t)})
            else:
                cont = ET.SubElement(ev, "container", {"key": "uncertainty:timestamp:interval"})
                ET.SubElement(cont, "int", {"key": "lo", "value": str(e.ts.payload[0])})
                ET.SubElement(cont, "int", {"key": "hi", "value": str(e.ts.payload[1])})
            for v, spec in e.data:
                if spec.kind == SET:
                    cont = ET.SubElement(ev, "container", {"key": f"uncertainty:data:{v}:set"})
                    for val in spec.payload:
                        _xes_emit(cont, "v", val)
                else:
                    cont = ET.SubElement(ev, "container", {"key": f"uncertainty:data:{v}:interval"})
                    _xes_emit(cont, "lo", spec.payload[0])
                    _xes_emit(cont, "hi", spec.payload[1])
    return ET.tostring(root, encoding="unicode")


def _xes_emit(parent, key: str, value) -> None:
    if isinstance(value, bool):
        ET.SubElement(parent, "boolean", {"key": key, "value": "true" if value else "false"})
    elif isinstance(value, int):
        ET.SubElement(parent, "int", {"key": key, "value": str(value)})
    elif isinstance(value, Fraction):
        ET.SubElement(parent, "float", {"key": key, "value": str(value)})
    else:
        ET.SubElement(parent, "string", {"key": key, "value": str(value)})
