"""Data Petri nets: model, execution semantics, and net-level precomputations.

A net is immutable after construction and safe to share across workers; the
operations here are pure functions of their inputs.
"""

from __future__ import annotations

import heapq
import itertools
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from . import guards
from .values import BOOL, INT, RAT, STRING, VAR_TYPES, Value, coerce_value, values_compatible
from .guards import Constraint, MalformedGuardError

SYNTHETIC_FINAL_ID = "__t_fin__"


class ModelError(ValueError):
    """Raised for structurally invalid nets or unreadable model files."""


class InvalidFiringError(ValueError):
    """A firing violated enabledness, read agreement, or its guard."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


class NoRunFoundError(RuntimeError):
    """No process run could be located within the configured limits."""


@dataclass(frozen=True)
class Variable:
    name: str
    vtype: str
    init: Value


@dataclass(frozen=True)
class Transition:
    tid: str
    label: Optional[str]  # None for silent transitions
    guard: Constraint
    synthetic: bool = False

    @property
    def silent(self) -> bool:
        return self.label is None


@dataclass(frozen=True)
class TransitionFiring:
    """A transition together with the assignment used when it fired.

    ``reads`` may mention any subset of the variables (they must agree with
    the state); ``writes`` must cover exactly the written variables.
    """

    transition: Transition
    reads: Mapping[str, Value] = field(default_factory=dict)
    writes: Mapping[str, Value] = field(default_factory=dict)


@dataclass(frozen=True)
class State:
    marking: Mapping[str, int]
    assign: Mapping[str, Value]

    def tokens(self, place: str) -> int:
        return self.marking.get(place, 0)


class DPN:
    """Places, transitions, flow multiplicities, typed variables, guards,
    initial/final markings, and the initial assignment."""

    def __init__(
        self,
        places: Sequence[str],
        transitions: Sequence[Transition],
        arcs: Mapping[Tuple[str, str], int],
        variables: Sequence[Variable],
        m_initial: Mapping[str, int],
        m_final: Mapping[str, int],
    ):
        self.places = tuple(places)
        self.transitions = tuple(transitions)
        self.arcs = dict(arcs)
        self.variables = {v.name: v for v in variables}
        self.m_initial = {p: c for p, c in m_initial.items() if c}
        self.m_final = {p: c for p, c in m_final.items() if c}
        self._by_id = {t.tid: t for t in self.transitions}
        self._pre: Dict[str, Dict[str, int]] = {t.tid: {} for t in self.transitions}
        self._post: Dict[str, Dict[str, int]] = {t.tid: {} for t in self.transitions}
        for (src, dst), w in self.arcs.items():
            if src in self._by_id:
                self._post[src][dst] = w
            else:
                self._pre[dst][src] = w
        self._validate()

    # -- construction-time validation ----------------------------------------

    def _validate(self) -> None:
        if not self.places or not self.transitions:
            raise ModelError("places and transitions must both be non-empty")
        place_set = set(self.places)
        tid_set = {t.tid for t in self.transitions}
        if len(place_set) != len(self.places) or len(tid_set) != len(self.transitions):
            raise ModelError("duplicate place or transition identifiers")
        if place_set & tid_set:
            raise ModelError("places and transitions must be disjoint")
        for (src, dst), w in self.arcs.items():
            if w < 1:
                raise ModelError(f"arc {src}->{dst} has multiplicity {w}")
            ok_pt = src in place_set and dst in tid_set
            ok_tp = src in tid_set and dst in place_set
            if not (ok_pt or ok_tp):
                raise ModelError(f"arc {src}->{dst} does not connect a place and a transition")
        for m, which in ((self.m_initial, "initial"), (self.m_final, "final")):
            for p, c in m.items():
                if p not in place_set:
                    raise ModelError(f"{which} marking mentions unknown place {p!r}")
                if c < 0:
                    raise ModelError(f"{which} marking has negative count at {p!r}")
        var_types = {v.name: v.vtype for v in self.variables.values()}
        for v in self.variables.values():
            if v.vtype not in VAR_TYPES:
                raise ModelError(f"variable {v.name!r} has unknown type {v.vtype!r}")
            if not values_compatible(v.init, v.vtype):
                raise ModelError(f"initial value of {v.name!r} is not of type {v.vtype}")
        for t in self.transitions:
            try:
                guards.check_types(t.guard, var_types)
            except MalformedGuardError as exc:
                raise ModelError(f"guard of transition {t.tid!r}: {exc}") from exc
            if t.silent and guards.write_vars(t.guard):
                raise ModelError(
                    f"silent transition {t.tid!r} must not write variables"
                )

    # -- lookups ---------------------------------------------------------------

    def transition(self, tid: str) -> Transition:
        return self._by_id[tid]

    def pre(self, t: Transition) -> Mapping[str, int]:
        return self._pre[t.tid]

    def post(self, t: Transition) -> Mapping[str, int]:
        return self._post[t.tid]

    def write_set(self, t: Transition) -> frozenset:
        return guards.write_vars(t.guard)

    def labels(self) -> Tuple[str, ...]:
        seen = []
        for t in self.transitions:
            if t.label is not None and t.label not in seen:
                seen.append(t.label)
        return tuple(seen)

    def initial_assignment(self) -> Dict[str, Value]:
        return {v.name: v.init for v in self.variables.values()}

    def initial_state(self) -> State:
        return State(dict(self.m_initial), self.initial_assignment())

    def var_types(self) -> Dict[str, str]:
        return {v.name: v.vtype for v in self.variables.values()}


# -- execution semantics --------------------------------------------------------


def eval_constraint(c: Constraint, read: Mapping[str, Value], write: Mapping[str, Value]) -> bool:
    return guards.eval_constraint(c, read, write)


def is_enabled(state: State, t: Transition, net: DPN) -> bool:
    return all(state.tokens(p) >= w for p, w in net.pre(t).items())


def fire(state: State, firing: TransitionFiring, net: DPN) -> State:
    """Fire a transition; raises InvalidFiringError naming the failed check."""
    t = firing.transition
    if not is_enabled(state, t, net):
        raise InvalidFiringError("not-enabled", f"transition {t.tid}")
    for v, value in firing.reads.items():
        if v not in state.assign:
            raise InvalidFiringError("read-mismatch", f"unknown variable {v}")
        if state.assign[v] != value:
            raise InvalidFiringError(
                "read-mismatch", f"{v}: state has {state.assign[v]!r}, firing read {value!r}"
            )
    expected_writes = net.write_set(t)
    if set(firing.writes) != set(expected_writes):
        raise InvalidFiringError(
            "write-set-mismatch",
            f"transition {t.tid} writes {sorted(expected_writes)}, firing assigns {sorted(firing.writes)}",
        )
    try:
        ok = eval_constraint(t.guard, state.assign, firing.writes)
    except MalformedGuardError as exc:
        raise InvalidFiringError("guard-error", str(exc)) from exc
    if not ok:
        raise InvalidFiringError("guard-unsatisfied", f"transition {t.tid}")
    marking = dict(state.marking)
    for p, w in net.pre(t).items():
        marking[p] = marking.get(p, 0) - w
    for p, w in net.post(t).items():
        marking[p] = marking.get(p, 0) + w
    marking = {p: c for p, c in marking.items() if c}
    assign = dict(state.assign)
    assign.update(firing.writes)
    return State(marking, assign)


def replay_diagnose(seq: Sequence[TransitionFiring], net: DPN) -> Tuple[bool, Optional[str]]:
    """Replay a firing sequence from the initial state; report the first violation."""
    state = net.initial_state()
    for idx, firing in enumerate(seq):
        try:
            state = fire(state, firing, net)
        except InvalidFiringError as exc:
            return False, f"step {idx + 1} ({firing.transition.tid}): {exc}"
    if dict(state.marking) != dict(net.m_final):
        return False, f"final marking {dict(state.marking)} differs from {dict(net.m_final)}"
    return True, None


def is_process_run(seq: Sequence[TransitionFiring], net: DPN) -> bool:
    ok, _ = replay_diagnose(seq, net)
    return ok


def augment_final_loop(net: DPN) -> DPN:
    """Add one synthetic silent self-loop on the final marking (idempotent).

    The loop lets a run of any length <= n be padded to length exactly n
    without changing reachability or cost.
    """
    if any(t.synthetic for t in net.transitions):
        return net
    if not net.m_final:
        raise ModelError("cannot augment a net with an empty final marking")
    t_fin = Transition(SYNTHETIC_FINAL_ID, None, guards.TRUE, synthetic=True)
    arcs = dict(net.arcs)
    for p, c in net.m_final.items():
        arcs[(p, SYNTHETIC_FINAL_ID)] = c
        arcs[(SYNTHETIC_FINAL_ID, p)] = c
    return DPN(
        net.places,
        (*net.transitions, t_fin),
        arcs,
        tuple(net.variables.values()),
        net.m_initial,
        net.m_final,
    )


def silent_chain_bound(net: DPN) -> int:
    """Length of the longest simple path in the silent-transition graph.

    Edges t -> t' whenever some output place of t feeds t' and both are
    silent; the length counts transitions on the path.
    """
    silent = [t for t in net.transitions if t.silent]
    if not silent:
        return 0
    succ = {
        t.tid: [
            u.tid
            for u in silent
            if any(p in net._pre[u.tid] for p in net._post[t.tid])
        ]
        for t in silent
    }

    best = 1

    def extend(tid: str, visited: frozenset, depth: int) -> None:
        nonlocal best
        best = max(best, depth)
        for nxt in succ[tid]:
            if nxt not in visited:
                extend(nxt, visited | {nxt}, depth + 1)

    for t in silent:
        extend(t.tid, frozenset({t.tid}), 1)
    return best


def cheapest_run_cost_ub(
    net: DPN,
    pm,
    depth_limit: int = 0,
    universe: Optional[Mapping[str, Sequence[Value]]] = None,
    smt_fallback=None,
) -> Fraction:
    """Model-move cost of some process run, found by bounded best-first search.

    Any run's cost is a sound ingredient for the run-length bound; the search
    returns the cheapest run it can see with written values drawn from the
    candidate universe.  If the search fails and ``smt_fallback`` is given, it
    is invoked to locate a run by satisfiability queries at growing lengths.
    """
    if depth_limit <= 0:
        depth_limit = 2 * (len(net.places) + len(net.transitions)) + 2
    if universe is None:
        universe = _default_universe(net)

    start = net.initial_state()
    goal = dict(net.m_final)

    def key(state: State):
        return (
            tuple(sorted(state.marking.items())),
            tuple(sorted(state.assign.items(), key=lambda kv: kv[0])),
        )

    frontier = [(Fraction(0), 0, 0, start)]
    seen = {}
    counter = itertools.count(1)
    expansions = 0
    cap = 200_000
    while frontier:
        cost, depth, _, state = heapq.heappop(frontier)
        k = key(state)
        if k in seen and seen[k] <= cost:
            continue
        seen[k] = cost
        if dict(state.marking) == goal:
            return cost
        if depth >= depth_limit:
            continue
        expansions += 1
        if expansions > cap:
            break
        for t in net.transitions:
            if not is_enabled(state, t, net):
                continue
            for writes in _write_choices(net, t, universe):
                try:
                    nxt = fire(state, TransitionFiring(t, {}, writes), net)
                except InvalidFiringError:
                    continue
                heapq.heappush(
                    frontier, (cost + pm(t), depth + 1, next(counter), nxt)
                )
    if smt_fallback is not None:
        found = smt_fallback(net)
        if found is not None:
            return found
    raise NoRunFoundError(
        f"no process run found within depth {depth_limit}; "
        "the net may violate the reachable-final-state assumption"
    )


def _write_choices(net: DPN, t: Transition, universe) -> Iterable[Dict[str, Value]]:
    ws = sorted(net.write_set(t))
    if not ws:
        return [{}]
    pools = []
    for v in ws:
        pool = universe.get(v, ())
        if not pool:
            return []
        pools.append(pool)
    return ({v: choice[i] for i, v in enumerate(ws)} for choice in itertools.product(*pools))


def _default_universe(net: DPN) -> Dict[str, list]:
    consts = []
    for t in net.transitions:
        consts.extend(guards.guard_constants(t.guard))
    out = {}
    for v in net.variables.values():
        pool = [v.init]
        for c in consts:
            if values_compatible(c, v.vtype) and c not in pool:
                pool.append(c)
        if v.vtype in (INT, RAT):
            for c in list(pool):
                if not isinstance(c, (bool, str)):
                    for shifted in (c + 1, c - 1):
                        if shifted not in pool:
                            pool.append(shifted)
        out[v.name] = pool
    return out


# -- model files ------------------------------------------------------------------


def dpn_from_json_obj(obj) -> DPN:
    try:
        places = list(obj["places"])
        transitions = []
        for spec in obj["transitions"]:
            guard_spec = spec.get("guard")
            guard = guards.TRUE if guard_spec is None else guards.guard_from_json(guard_spec)
            transitions.append(Transition(spec["id"], spec.get("label"), guard))
        arcs = {}
        for arc in obj["arcs"]:
            w = int(arc.get("weight", 1))
            arcs[(arc["from"], arc["to"])] = w
        variables = []
        for name, vs in obj.get("variables", {}).items():
            vtype = vs["type"]
            variables.append(Variable(name, vtype, coerce_value(vs["init"], vtype)))
        m_init = {p: int(c) for p, c in obj["marking_initial"].items()}
        m_final = {p: int(c) for p, c in obj["marking_final"].items()}
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model JSON: {exc}") from exc
    except MalformedGuardError as exc:
        raise ModelError(str(exc)) from exc
    return DPN(places, transitions, arcs, variables, m_init, m_final)


def dpn_to_json_obj(net: DPN):
    return {
        "places": list(net.places),
        "transitions": [
            {
                "id": t.tid,
                "label": t.label,
                "guard": guards.guard_to_json(t.guard),
            }
            for t in net.transitions
            if not t.synthetic
        ],
        "arcs": [
            {"from": src, "to": dst, "weight": w}
            for (src, dst), w in sorted(net.arcs.items())
            if SYNTHETIC_FINAL_ID not in (src, dst)
        ],
        "variables": {
            v.name: {
                "type": v.vtype,
                "init": f"{v.init.numerator}/{v.init.denominator}"
                if isinstance(v.init, Fraction)
                else v.init,
            }
            for v in net.variables.values()
        },
        "marking_initial": dict(net.m_initial),
        "marking_final": dict(net.m_final),
    }


def load_dpn(path: str) -> DPN:
    """Load a model from a .json file (normative) or .pnml (common subset)."""
    if str(path).lower().endswith((".pnml", ".xml")):
        return _load_pnml(path)
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh, parse_float=Fraction)
    return dpn_from_json_obj(obj)


_PNML_SKIP = {"graphics", "toolspecific", "name"}
_PNML_NS = "{http://www.pnml.org/version-2009/grammar/pnml}"


def _strip_ns(tag: str) -> str:
    return tag.split("}", 1)[1] if tag.startswith("{") else tag


def _load_pnml(path: str) -> DPN:
    """PNML reader for the plain place/transition/arc subset.

    Guards come from a ``guard`` attribute or child element holding infix
    text; variables from ``<variable name= type= initial=>`` declarations.
    Anything structural beyond that subset is a load error rather than
    being silently dropped.
    """
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise ModelError(f"unreadable PNML: {exc}") from exc
    root = tree.getroot()
    if _strip_ns(root.tag) != "pnml":
        raise ModelError("not a PNML document")
    nets = [el for el in root if _strip_ns(el.tag) == "net"]
    if len(nets) != 1:
        raise ModelError(f"expected exactly one <net>, found {len(nets)}")
    net_el = nets[0]

    pages = [el for el in net_el if _strip_ns(el.tag) == "page"]
    if len(pages) > 1:
        raise ModelError("multi-page PNML is outside the supported subset")
    container = pages[0] if pages else net_el

    places, transitions, arcs, variables = [], [], {}, []
    m_init: Dict[str, int] = {}
    m_final: Dict[str, int] = {}

    def text_of(el, child: str) -> Optional[str]:
        for sub in el:
            if _strip_ns(sub.tag) == child:
                for t in sub:
                    if _strip_ns(t.tag) == "text":
                        return (t.text or "").strip()
                return (sub.text or "").strip()
        return None

    for el in itertools.chain(container, net_el if pages else ()):
        tag = _strip_ns(el.tag)
        if tag in _PNML_SKIP or tag == "page":
            continue
        if tag == "place":
            pid = el.get("id")
            places.append(pid)
            marking = text_of(el, "initialMarking")
            if marking:
                m_init[pid] = int(marking)
            final = text_of(el, "finalMarking")
            if final:
                m_final[pid] = int(final)
        elif tag == "transition":
            tid = el.get("id")
            label = text_of(el, "name") or None
            if el.get("invisible") in ("true", "1"):
                label = None
            guard_text = el.get("guard") or text_of(el, "guard")
            try:
                guard = guards.parse_guard_text(guard_text) if guard_text else guards.TRUE
            except MalformedGuardError as exc:
                raise ModelError(f"guard of {tid!r}: {exc}") from exc
            transitions.append(Transition(tid, label, guard))
        elif tag == "arc":
            w_text = text_of(el, "inscription")
            arcs[(el.get("source"), el.get("target"))] = int(w_text) if w_text else 1
        elif tag == "variable":
            vtype = el.get("type")
            raw = el.get("initial")
            if vtype is None or raw is None:
                raise ModelError("<variable> needs name, type and initial attributes")
            if vtype == BOOL:
                init: Value = raw == "true"
            elif vtype == STRING:
                init = raw
            else:
                init = coerce_value(raw, vtype)
            variables.append(Variable(el.get("name"), vtype, init))
        elif tag == "finalmarkings":
            for state_el in el:
                for pl in state_el:
                    count = "1"
                    for sub in pl:
                        if _strip_ns(sub.tag) == "text":
                            count = (sub.text or "1").strip()
                    m_final[pl.get("idref")] = int(count)
        else:
            raise ModelError(f"PNML element <{tag}> is outside the supported subset")

    if not m_final:
        raise ModelError("PNML net declares no final marking")
    return DPN(places, transitions, arcs, variables, m_init, m_final)
