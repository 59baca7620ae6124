"""Drive an external SMT/OMT solver process over an SMT-LIB2 text pipe.

Two profiles: ``optimize`` sends a native minimize objective in one query;
``tighten`` runs plain satisfiability and iteratively strengthens a strict
upper bound on the objective until unsat, returning the last model.  Every
returned model is re-checked against the problem's assertions by a pure
term evaluator, independently of the solver.
"""

from __future__ import annotations

import importlib.resources
import os
import select
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import terms
from .encoding import SmtProblem
from .terms import eval_term, parse_sexps, sexp, value_from_sexp

PROFILE_OPTIMIZE = "optimize"
PROFILE_TIGHTEN = "tighten"

_SYNC = "ucheck-sync-7f3a"


class SolverError(RuntimeError):
    pass


class SolverCrashError(SolverError):
    """Nonzero exit, malformed output, or a model failing re-verification."""


class SolverTimeout(SolverError):
    pass


class ModelParseError(SolverError):
    pass


def default_solver_command() -> Tuple[str, ...]:
    env = os.environ.get("UCHECK_SOLVER")
    if env:
        return tuple(shlex.split(env))
    node = shutil.which("node")
    if node is None:
        raise SolverError(
            "no SMT solver configured: set UCHECK_SOLVER to a solver command "
            "(e.g. 'z3 -in') or install node plus the z3-solver npm package"
        )
    server = importlib.resources.files("ucheck").joinpath("z3server.js")
    return (node, str(server))


@dataclass(frozen=True)
class SolverConfig:
    command: Optional[Tuple[str, ...]] = None
    profile: str = PROFILE_OPTIMIZE
    timeout: float = 120.0  # seconds per query
    startup_timeout: float = 90.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def resolved_command(self) -> Tuple[str, ...]:
        return self.command if self.command else default_solver_command()

    @property
    def supports_native_optimization(self) -> bool:
        return self.profile == PROFILE_OPTIMIZE


@dataclass
class SolveResult:
    status: str  # "sat", "unsat", "timeout", "unknown"
    assignment: Optional[Dict[str, object]] = None
    objective: Optional[Fraction] = None
    incomplete: bool = False
    wall_time: float = 0.0


class SolverSession:
    """One solver process serving sequential queries for one caller.

    Sessions are not shared across concurrent queries; each worker owns its
    own session.  A query always starts with ``(reset)``, so successive
    problems do not interact.
    """

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.proc: Optional[subprocess.Popen] = None
        self._buffer = b""

    def _ensure(self) -> subprocess.Popen:
        if self.proc is None or self.proc.poll() is not None:
            cmd = self.cfg.resolved_command()
            try:
                self.proc = subprocess.Popen(
                    cmd,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                )
            except OSError as exc:
                raise SolverError(f"cannot start solver {cmd!r}: {exc}") from exc
            self._buffer = b""
        return self.proc

    def request(self, commands: str, timeout: Optional[float] = None) -> str:
        """Send commands, follow with an echo marker, read until the marker."""
        proc = self._ensure()
        payload = commands
        if not payload.endswith("\n"):
            payload += "\n"
        payload += f'(echo "{_SYNC}")\n'
        try:
            proc.stdin.write(payload.encode())
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SolverCrashError(f"solver process died: {self._stderr_tail()}") from exc
        return self._read_until_marker(timeout if timeout is not None else self.cfg.timeout)

    def _read_until_marker(self, timeout: float) -> str:
        proc = self.proc
        deadline = time.monotonic() + timeout
        while True:
            marker_at = self._buffer.find(_SYNC.encode())
            if marker_at >= 0:
                response = self._buffer[:marker_at]
                rest = self._buffer[marker_at + len(_SYNC):]
                self._buffer = rest.lstrip(b"\n")
                return response.decode(errors="replace")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.close(kill=True)
                raise SolverTimeout(f"no solver response within {timeout}s")
            ready, _, _ = select.select([proc.stdout], [], [], min(remaining, 0.5))
            if ready:
                chunk = os.read(proc.stdout.fileno(), 65536)
                if not chunk:
                    raise SolverCrashError(
                        f"solver closed its output: {self._stderr_tail()}"
                    )
                self._buffer += chunk
            elif proc.poll() is not None:
                raise SolverCrashError(
                    f"solver exited with code {proc.returncode}: {self._stderr_tail()}"
                )

    def _stderr_tail(self) -> str:
        if self.proc is None or self.proc.stderr is None:
            return ""
        try:
            os.set_blocking(self.proc.stderr.fileno(), False)
            data = self.proc.stderr.read() or b""
        except (OSError, ValueError):
            return ""
        return data.decode(errors="replace").strip()[-500:]

    def close(self, kill: bool = False) -> None:
        if self.proc is None:
            return
        try:
            if not kill and self.proc.poll() is None:
                self.proc.stdin.write(b"(exit)\n")
                self.proc.stdin.flush()
                self.proc.wait(timeout=2)
        except (OSError, subprocess.TimeoutExpired, ValueError):
            kill = True
        if kill and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()
        self.proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# -- model parsing -----------------------------------------------------------------


def parse_model(text: str) -> Dict[str, object]:
    """Parse a get-value response into an exact name -> value map."""
    if "error" in text and "(error" in text:
        raise SolverCrashError(f"solver error: {text.strip()}")
    nodes = [n for n in parse_sexps(text) if isinstance(n, list)]
    if not nodes:
        raise ModelParseError(f"no value bindings in solver response: {text!r}")
    out: Dict[str, object] = {}
    for group in nodes:
        for pair in group:
            if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str)):
                raise ModelParseError(f"malformed binding {pair!r}")
            try:
                out[pair[0]] = value_from_sexp(pair[1])
            except terms.TermError as exc:
                raise ModelParseError(str(exc)) from exc
    return out


def _status_of(response: str) -> str:
    for line in reversed([l.strip() for l in response.splitlines() if l.strip()]):
        if line in ("sat", "unsat", "unknown"):
            return line
        if line.startswith("(error"):
            raise SolverCrashError(f"solver error: {line}")
    raise SolverCrashError(f"no sat/unsat verdict in solver response: {response!r}")


def check_model(problem: SmtProblem, assignment: Dict[str, object]) -> None:
    """Re-verify that the assignment satisfies every assertion (solver-free)."""
    for a in problem.assertions:
        try:
            ok = eval_term(a, assignment)
        except terms.TermError as exc:
            raise SolverCrashError(f"model is not total: {exc}") from exc
        if ok is not True:
            raise SolverCrashError(f"model violates assertion {sexp(a)[:200]}")


# -- solving -----------------------------------------------------------------------


def _preamble(problem: SmtProblem, cfg: SolverConfig) -> str:
    ms = max(int(cfg.timeout * 1000), 1)
    lines = [
        "(reset)",
        "(set-option :produce-models true)",
        f"(set-option :timeout {ms})",
    ]
    lines.extend(terms.declarations(problem.declarations()))
    lines.extend(f"(assert {sexp(a)})" for a in problem.assertions)
    return "\n".join(lines)


def _get_values(session: SolverSession, problem: SmtProblem, timeout: float) -> Dict[str, object]:
    names = " ".join(v.name for v in problem.declarations())
    response = session.request(f"(get-value ({names}))", timeout=timeout)
    return parse_model(response)


def solve_optimize(
    problem: SmtProblem,
    cfg: Optional[SolverConfig] = None,
    session: Optional[SolverSession] = None,
) -> SolveResult:
    """Obtain an optimal assignment for the problem's objective."""
    cfg = cfg or SolverConfig()
    own_session = session is None
    if own_session:
        session = SolverSession(cfg)
    started = time.monotonic()
    try:
        if cfg.supports_native_optimization:
            result = _solve_native(problem, cfg, session)
        else:
            result = _solve_tightening(problem, cfg, session)
    finally:
        if own_session:
            session.close()
    result.wall_time = time.monotonic() - started
    return result


def _solve_native(problem: SmtProblem, cfg: SolverConfig, session: SolverSession) -> SolveResult:
    query = _preamble(problem, cfg) + f"\n(minimize {problem.objective.name})\n(check-sat)"
    try:
        status = _status_of(session.request(query))
    except SolverTimeout:
        return SolveResult(status="timeout", incomplete=True)
    if status != "sat":
        return SolveResult(status=status)
    assignment = _get_values(session, problem, cfg.timeout)
    check_model(problem, assignment)
    objective = Fraction(assignment[problem.objective.name])
    return SolveResult(status="sat", assignment=assignment, objective=objective)


def _solve_tightening(problem: SmtProblem, cfg: SolverConfig, session: SolverSession) -> SolveResult:
    """Solve, then repeatedly assert objective < value until unsat.

    All cost atoms are rationals over a common denominator, so the strict
    decrease per round is bounded below and the loop terminates.
    """
    obj = problem.objective.name
    deadline = time.monotonic() + cfg.timeout
    best: Optional[Dict[str, object]] = None

    def remaining() -> float:
        return deadline - time.monotonic()

    try:
        status = _status_of(session.request(_preamble(problem, cfg) + "\n(check-sat)", timeout=cfg.timeout))
    except SolverTimeout:
        return SolveResult(status="timeout", incomplete=True)
    if status != "sat":
        return SolveResult(status=status)
    while True:
        if remaining() <= 0:
            break
        try:
            assignment = _get_values(session, problem, max(remaining(), 0.1))
        except SolverTimeout:
            break
        best = assignment
        value = Fraction(assignment[obj])
        bound = terms.Const(value, terms.SORT_REAL)
        try:
            status = _status_of(
                session.request(
                    f"(assert (< {obj} {terms.sexp(bound)}))\n(check-sat)",
                    timeout=max(remaining(), 0.1),
                )
            )
        except SolverTimeout:
            return _finish_tightening(problem, best, incomplete=True)
        if status == "unsat":
            return _finish_tightening(problem, best, incomplete=False)
        if status == "unknown":
            return _finish_tightening(problem, best, incomplete=True)
    return _finish_tightening(problem, best, incomplete=True)


def _finish_tightening(problem: SmtProblem, best, incomplete: bool) -> SolveResult:
    if best is None:
        return SolveResult(status="timeout", incomplete=True)
    check_model(problem, best)
    objective = Fraction(best[problem.objective.name])
    return SolveResult(
        status="sat", assignment=best, objective=objective, incomplete=incomplete
    )
