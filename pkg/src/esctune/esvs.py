"""When to verify, and the stop decision itself.

The controller is driven by the tuner: ``on_call`` after every what-if call
and ``on_step_boundary`` at the start of every workload-level greedy step.
Grid points fall every ``step`` calls (initialization calls included).  At a
grid point the observed improvement I_j is recorded and, depending on the
scheme, a verification (ESV) may run.  A verification that finds the bound
gap within epsilon raises :class:`EarlyStop`.
"""
from __future__ import annotations

import csv
import io
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .bounds import WorkloadBounds
from .errors import ContractViolation, ValidationError

SCHEMES = ("heuristic", "generic", "fixed")

SKIP_HISTORY = "skip-history"
SKIP_CONVEX = "skip-convex"
SKIP_FAST = "skip-fast"
SKIP_FLAT = "skip-insignificant"
SKIP_GATE = "skip-gate"
INVOKE = "invoke"
RECORD = "record"
OFF = "off"


@dataclass
class EsvConfig:
    epsilon: float = 0.05
    scheme: str = "heuristic"
    step: int = 100
    sigma: float = 0.5
    seed: int = 0
    origin: tuple = (0, 0.0)

    def validate(self) -> None:
        if not 0 < self.epsilon < 1:
            raise ValidationError("epsilon must lie in (0, 1)")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.step < 1:
            raise ValidationError("step must be >= 1")
        if not 0 < self.sigma < 1:
            raise ValidationError("sigma must lie in (0, 1)")


class EarlyStop(Exception):
    """Raised through the tuner when a verification decides to stop."""

    def __init__(self, bounds: WorkloadBounds, calls: int):
        super().__init__(f"early stop at {calls} calls")
        self.bounds = bounds
        self.calls = calls


@dataclass
class CurveRow:
    calls: int
    I: float
    r: Optional[float]
    l: Optional[float]
    decision: str
    sigma: Optional[float] = None
    lam: Optional[float] = None
    etaL: Optional[float] = None
    etaU: Optional[float] = None
    stopped: bool = False


@dataclass
class EsvRecord:
    calls: int
    bounds: WorkloadBounds
    stop: bool
    seconds: float
    L_b: Optional[float] = None


def improvement_rate(i_j: float, b_j: int, i_0: float = 0.0, b_0: int = 0) -> float:
    return (i_j - i_0) / (b_j - b_0)


def latest_rate(i_j: float, b_j: int, i_prev: float, b_prev: int) -> float:
    return (i_j - i_prev) / (b_j - b_prev)


def projected_improvement(i_j: float, b_j: int, rate: float, b: float) -> float:
    return i_j + rate * (b - b_j)


def significance(p_left: float, p_right: float, observed: float) -> float:
    width = p_right - p_left
    if width <= 0:
        return 1.0
    return (p_right - observed) / width


def generic_decision(i_j: float, b_j: int, r_j: float, l_j: float, i_next: float, b_next: int,
                     sigma: float) -> tuple:
    """Concavity test for the next grid point.  Returns (decision, sigma_{j+1})."""
    if l_j >= r_j:
        return SKIP_CONVEX, None
    p_right = projected_improvement(i_j, b_j, r_j, b_next)
    p_left = projected_improvement(i_j, b_j, l_j, b_next)
    if i_next > p_right:
        return SKIP_FAST, None
    sig = significance(p_left, p_right, i_next)
    if i_next < p_left or sig >= sigma:
        return INVOKE, sig
    return SKIP_FLAT, sig


def invocation_probability(last: Optional[WorkloadBounds], epsilon: float) -> float:
    if last is None:
        return 1.0
    rho = (last.eta_U - last.eta_L) / epsilon
    if rho <= 0:
        return 1.0
    return min(1.0, 1.0 / rho)


def check_early_stop(bounds: WorkloadBounds, epsilon: float, strict: bool = True,
                     tol: float = 1e-9) -> bool:
    gap = bounds.eta_U - bounds.eta_L
    if strict and gap < -tol:
        raise ContractViolation(
            f"eta_U {bounds.eta_U!r} below eta_L {bounds.eta_L!r}: bounds are broken")
    return gap <= epsilon


def refine_cap(eta_u: float, i_next: float, step: int) -> float:
    return max(0.0, (eta_u - i_next) / step)


class EsvController:
    """Keeps the tuning curve, decides on verifications and fires stops.

    ``monitor`` computes and records bounds at every decision point but
    never stops; it is how the soundness checks watch a full run.
    """

    def __init__(self, config: EsvConfig, bounds_fn: Callable[[], WorkloadBounds],
                 improvement_fn: Callable[[], float], mode: str = "b",
                 monitor: bool = False, lower_b_fn: Optional[Callable[[], float]] = None):
        config.validate()
        if mode not in ("off", "b", "i"):
            raise ValidationError(f"unknown esc mode {mode!r}")
        self.config = config
        self.bounds_fn = bounds_fn
        self.improvement_fn = improvement_fn
        self.lower_b_fn = lower_b_fn
        self.mode = mode
        self.monitor = monitor
        self.rng = random.Random(config.seed)
        self.curve: list = []
        self.esvs: list = []
        self.esv_seconds = 0.0
        self.enabled = True
        b0, i0 = config.origin
        self.points = [(int(b0), float(i0))]
        self.rates: list = [None]
        self.cap: Optional[float] = None
        self.last_bounds: Optional[WorkloadBounds] = None

    @property
    def active(self) -> bool:
        return self.enabled and (self.mode != "off" or self.monitor)

    @property
    def esv_count(self) -> int:
        return len(self.esvs)

    def disable(self) -> None:
        self.enabled = False

    # -- events

    def on_call(self, calls: int) -> None:
        if calls % self.config.step == 0 and calls > self.points[-1][0]:
            self._grid_point(calls)

    def on_step_boundary(self, phase: int, step: int, calls: int) -> None:
        if self.config.scheme != "heuristic" or phase != 2 or not self.active:
            return
        started = time.perf_counter()
        i_now = self.improvement_fn()
        row = CurveRow(calls, i_now, None, None, INVOKE)
        self.curve.append(row)
        self._verify(row, calls, started)

    # -- internals

    def _grid_point(self, calls: int) -> None:
        started = time.perf_counter()
        i_next = self.improvement_fn()
        b_j, i_j = self.points[-1]
        prev = self.rates[-1]
        self.points.append((calls, i_next))
        b0, i0 = self.points[0]
        r = improvement_rate(i_next, calls, i0, b0)
        l = latest_rate(i_next, calls, i_j, b_j)
        if self.cap is not None:
            r, l = min(r, self.cap), min(l, self.cap)
        row = CurveRow(calls, i_next, r, l, RECORD)
        self.curve.append(row)
        self.rates.append((r, l))
        scheme = self.config.scheme
        if not self.active:
            row.decision = OFF if self.mode == "off" and not self.monitor else RECORD
            return
        if scheme == "heuristic":
            return
        if scheme == "fixed":
            row.decision = INVOKE
        else:
            if prev is None:
                row.decision = SKIP_HISTORY
                return
            r_j, l_j = prev
            decision, sig = generic_decision(i_j, b_j, r_j, l_j, i_next, calls, self.config.sigma)
            row.sigma = sig
            if decision != INVOKE:
                row.decision = decision
                return
            lam = invocation_probability(self.last_bounds, self.config.epsilon)
            row.lam = lam
            if lam < 1.0 and self.rng.random() >= lam:
                row.decision = SKIP_GATE
                return
            row.decision = INVOKE
        self._verify(row, calls, started, refine_index=len(self.rates) - 1)

    def _verify(self, row: CurveRow, calls: int, started: float,
                refine_index: Optional[int] = None) -> None:
        bounds = self.bounds_fn()
        lower_b = self.lower_b_fn() if self.lower_b_fn is not None else None
        self.last_bounds = bounds
        row.etaL, row.etaU = bounds.eta_L, bounds.eta_U
        stop = False
        if self.mode != "off":
            stop = check_early_stop(bounds, self.config.epsilon, strict=(self.mode == "b"))
        stop = stop and not self.monitor
        if not stop and refine_index is not None:
            self.cap = refine_cap(bounds.eta_U, row.I, self.config.step)
            r, l = self.rates[refine_index]
            self.rates[refine_index] = (min(r, self.cap), min(l, self.cap))
            row.r, row.l = self.rates[refine_index]
        elapsed = time.perf_counter() - started
        self.esv_seconds += elapsed
        self.esvs.append(EsvRecord(calls, bounds, stop, elapsed, lower_b))
        if stop:
            row.stopped = True
            raise EarlyStop(bounds, calls)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def curve_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["calls", "I", "r", "l", "decision", "sigma", "lambda", "etaL", "etaU",
                     "stopped"])
    for row in rows:
        writer.writerow([_fmt(row.calls), _fmt(row.I), _fmt(row.r), _fmt(row.l), row.decision,
                         _fmt(row.sigma), _fmt(row.lam), _fmt(row.etaL), _fmt(row.etaU),
                         _fmt(row.stopped)])
    return buf.getvalue()
