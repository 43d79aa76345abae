"""Nevanlinna functionals of entire family members.

Proximity functions are trapezoid sums on circles.  Counting functions are
exact from the roots for polynomial members; for other members the zero
count n(t) inside |z| = t comes from the argument principle, and each jump
of n is located by bisection in t so that N(r) = sum k_j log(r / t_j) is
integrated exactly over the located jumps.

All circle evaluations go through a log-space evaluator returning
(log f, f'/f), so members like (z - n) e^z stay finite at radii where f
itself overflows.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr, polyroots
from .expr import Add, BinOp, Bindings, Call, Const, Div, Mul, Neg, Node, Num, Pow, Sub, Var
from .family import BoundMember

log = logging.getLogger(__name__)

M_START = 4096
M_MAX = 2**20
QUAD_RTOL = 1e-6
WIND_START = 1024
WIND_MAX = 2**18
MAX_PHASE_STEP = np.pi / 8
BRACKET_RTOL = 1e-3
WINDING_BUDGET = 4000


class NotEntire(ValueError):
    pass


class WindingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# log-space evaluation: value w = log f (any branch), slope g = f'/f

LogFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def _principal(w: np.ndarray) -> np.ndarray:
    return w.real + 1j * (np.mod(w.imag + np.pi, 2 * np.pi) - np.pi)


def _log_sin(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log sin(u) and cot(u), computed without overflow for large |Im u|."""
    upper = u.imag >= 0
    s = np.where(upper, 1, -1)
    t = np.expm1(2j * s * u)  # |exp(±2iu)| <= 1 on the chosen side
    log_sin = -1j * s * u + np.log(s * t) - np.log(2j)
    cot = 1j * s * (t + 2) / t
    return log_sin, cot


def _combine(w1, g1, w2, g2, sign: int):
    """log and log-derivative of f1 + sign*f2 from those of f1 and f2."""
    m = np.maximum(w1.real, w2.real)
    m = np.where(np.isfinite(m), m, 0.0)
    e1 = np.exp(w1 - m)
    e2 = sign * np.exp(w2 - m)
    s = e1 + e2
    w = m + np.log(s)
    g = (np.where(e1 == 0, 0, e1 * g1) + np.where(e2 == 0, 0, e2 * g2)) / s
    return w, g


def _const(c) -> LogFn:
    c = complex(c)
    w = np.log(c) if c != 0 else complex(-np.inf, 0)
    return lambda z: (np.full(z.shape, w), np.zeros(z.shape, dtype=complex))


def compile_log(node: Node, env: Bindings) -> LogFn:
    if not expr.depends_on(node):
        return _const(expr.eval(node, Bindings(0j, env.indices, env.params)))
    if isinstance(node, Var):
        return lambda z: (np.log(z), 1 / z)
    if isinstance(node, Neg):
        inner = compile_log(node.operand, env)

        def neg(z):
            w, g = inner(z)
            return w + 1j * np.pi, g

        return neg
    if isinstance(node, BinOp):
        left = compile_log(node.left, env)
        right = compile_log(node.right, env)
        if isinstance(node, (Add, Sub)):
            sign = 1 if isinstance(node, Add) else -1

            def add(z):
                w1, g1 = left(z)
                w2, g2 = right(z)
                return _combine(w1, g1, w2, g2, sign)

            return add
        k = 1 if isinstance(node, Mul) else -1

        def mul(z):
            w1, g1 = left(z)
            w2, g2 = right(z)
            return w1 + k * w2, g1 + k * g2

        return mul
    if isinstance(node, Pow):
        base = compile_log(node.base, env)
        if node.integer_exponent:
            k = expr._integer_value(node.exponent, env)

            def ipow(z):
                w, g = base(z)
                return k * w, k * g

            return ipow
        exponent = compile_log(node.exponent, env)

        def cpow(z):
            wb, gb = base(z)
            wp, gp = exponent(z)
            lb = _principal(wb)
            p = np.exp(wp)
            return p * lb, p * gp * lb + p * gb

        return cpow
    if isinstance(node, Call):
        return _compile_call(node.func, compile_log(node.arg, env))
    raise TypeError(f"not an expression node: {node!r}")


def _compile_call(name: str, arg: LogFn) -> LogFn:
    def fn(z):
        wu, gu = arg(z)
        u = np.exp(wu)
        du = u * gu
        if name == "exp":
            return u, du
        if name == "log":
            lu = _principal(wu)
            return np.log(lu), gu / lu
        if name == "sin":
            ls, cot = _log_sin(u)
            return ls, cot * du
        if name == "cos":
            ls, cot = _log_sin(u + np.pi / 2)
            return ls, cot * du
        if name == "sinh":
            ls, cot = _log_sin(1j * u)
            return ls - 0.5j * np.pi, 1j * cot * du
        if name == "cosh":
            ls, cot = _log_sin(1j * u + np.pi / 2)
            return ls, 1j * cot * du
        if name == "tan":
            ls, cot_s = _log_sin(u)
            lc, cot_c = _log_sin(u + np.pi / 2)
            return ls - lc, (cot_s - cot_c) * du
        raise NotEntire(f"no log-space rule for {name!r}")

    return fn


def check_entire(node: Node) -> None:
    """Reject expressions that are not syntactically entire in z."""
    for sub in expr.walk(node):
        if isinstance(sub, Div) and expr.depends_on(sub.right):
            raise NotEntire("division by a z-dependent expression: meromorphic members are not supported")
        if isinstance(sub, Call) and sub.func in ("tan", "log") and expr.depends_on(sub.arg):
            raise NotEntire(f"{sub.func} of a z-dependent argument is not entire")
        if isinstance(sub, Pow) and expr.depends_on(sub.base):
            exponent = sub.exponent
            negative = False
            while isinstance(exponent, Neg):
                negative = not negative
                exponent = exponent.operand
            if not sub.integer_exponent or negative:
                raise NotEntire("only non-negative integer powers of z-dependent bases are entire")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusSchedule:
    radii: tuple[float, ...]

    def __post_init__(self):
        r = self.radii
        if not r or r[0] <= 0 or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("radii must be positive and strictly increasing")

    @classmethod
    def log_spaced(cls, r_min: float = 1.0, r_max: float = 1e4, per_decade: int = 9) -> "RadiusSchedule":
        decades = math.log10(r_max / r_min)
        n = max(1, round(decades * per_decade))
        return cls(tuple(float(r_min * 10 ** (k * decades / n)) for k in range(n + 1)))

    def limsup_window(self) -> tuple[float, ...]:
        """Radii in the final half-decade [r_max/sqrt(10), r_max]."""
        r_max = self.radii[-1]
        return tuple(r for r in self.radii if r >= r_max / math.sqrt(10))


class _Member:
    """Evaluation helpers for one member and one target value a."""

    def __init__(self, m: BoundMember):
        check_entire(m.ast)
        self.m = m
        self.logf = compile_log(m.ast, Bindings(0j, m.indices, m.params))

    def log_minus(self, z: np.ndarray, a: complex | None):
        w, g = self.logf(z)
        if a is None or a == 0:
            return w, g
        return _combine(w, g, np.full(z.shape, np.log(complex(a))), np.zeros(z.shape, dtype=complex), -1)


def _circle(r: float, count: int, offset: float = 0.0) -> np.ndarray:
    return r * np.exp(1j * (2 * np.pi * np.arange(count) / count + offset))


def _proximity(mem: _Member, a: complex | None, r: float, warnings: list[str]) -> float:
    sign = 1.0 if a is None else -1.0

    def integrand(count, offset):
        with np.errstate(all="ignore"):
            w, _ = mem.log_minus(_circle(r, count, offset), a)
        return np.maximum(0.0, sign * w.real)

    offset = 0.0
    vals = integrand(M_START, offset)
    if not np.all(np.isfinite(vals)):
        offset = np.pi / M_START
        vals = integrand(M_START, offset)
    count = M_START
    value = _finite_mean(vals, warnings, r)
    while count < M_MAX:
        # refine: the new midpoints interleave with the existing samples
        mid = integrand(count, offset + np.pi / count)
        vals = np.concatenate([vals, mid])
        count *= 2
        new = _finite_mean(vals, warnings, r)
        done = abs(new - value) < QUAD_RTOL * (1 + abs(new))
        value = new
        if done:
            break
    return value


def _finite_mean(vals: np.ndarray, warnings: list[str], r: float) -> float:
    ok = np.isfinite(vals)
    if not ok.all():
        msg = f"r={r:g}: skipped {int((~ok).sum())} singular samples"
        if msg not in warnings:
            warnings.append(msg)
    return float(vals[ok].mean())


class _ZeroCounter:
    """n(t) for f - a via the argument principle, with located jumps.

    A jump of n between two checkpoint radii is bracketed by bisection on
    log t until the bracket is narrow, then the zeros inside it are pinned
    down by Newton's method and their multiplicities read off windings on
    small circles around them.
    """

    def __init__(self, mem: _Member, a: complex, warnings: list[str]):
        self.mem = mem
        self.a = complex(a)
        self.warnings = warnings
        self.evals = 0
        self.jumps: list[tuple[float, int, int]] = []  # (radius, count, distinct)
        self.eps: float | None = None
        self.n0 = 0

    def _warn(self, msg: str) -> None:
        if msg not in self.warnings:
            self.warnings.append(msg)

    def _try_winding(self, t: float, center: complex = 0j) -> int | None:
        """Winding number of f - a around |z - center| = t by phase tracking.

        The argument increments between consecutive samples are summed on
        the principal branch; the count is accepted once every increment is
        below MAX_PHASE_STEP, so no turn can be missed.  None when a zero
        lies on (or too close to) the contour.
        """
        count = WIND_START
        while count <= WIND_MAX:
            z = center + _circle(t, count)
            with np.errstate(all="ignore"):
                w, _ = self.mem.log_minus(z, self.a)
            if not np.all(np.isfinite(w)):
                return None
            step = np.diff(w.imag, append=w.imag[:1])
            step = np.mod(step + np.pi, 2 * np.pi) - np.pi
            if np.max(np.abs(step)) < MAX_PHASE_STEP:
                return int(round(step.sum() / (2 * np.pi)))
            count *= 4
        return None

    def winding(self, t: float, lo: float | None = None, hi: float | None = None) -> tuple[float, int]:
        """Winding number of f - a on |z| = t, nudging t inside (lo, hi) if a zero sits near the circle."""
        self.evals += 1
        lo = t / 1.01 if lo is None else lo
        hi = t * 1.01 if hi is None else hi
        for shift in (0.0, 0.25, -0.25, 0.125, -0.125, 0.375, -0.375):
            s = t * (hi / lo) ** shift if shift else t
            n = self._try_winding(s)
            if n is not None:
                return s, n
        raise WindingError(f"winding number near r={t:g} did not settle on an integer")

    def start(self, t_first: float) -> None:
        with np.errstate(all="ignore"):
            f0 = self.mem.m(np.array([0j]))[0]
        if f0 == self.a:
            self.eps, self.n0 = self.winding(1e-8 * t_first, 0.5e-8 * t_first, 2e-8 * t_first)
        else:
            self.eps, self.n0 = 1e-12 * t_first, 0
        self.covered, self.n_covered = self.eps, self.n0

    def extend(self, radii) -> None:
        """Locate all jumps of n(t) up to max(radii), checkpointing at each radius."""
        if self.eps is None:
            self.start(min(radii))
        for t in sorted(radii):
            if t <= self.covered:
                continue
            s, nt = self.winding(t, self.covered, t)
            self._locate(self.covered, s, self.n_covered, nt)
            self.covered, self.n_covered = s, nt

    def _locate(self, lo: float, hi: float, n_lo: int, n_hi: int) -> None:
        if n_hi == n_lo:
            return
        if n_hi < n_lo:
            self._warn(f"zero count decreased between r={lo:g} and r={hi:g}")
            return
        if hi / lo - 1 < BRACKET_RTOL or self.evals > WINDING_BUDGET:
            self._pin(lo, hi, n_hi - n_lo)
            return
        mid, n_mid = self.winding(math.sqrt(lo * hi), lo, hi)
        self._locate(lo, mid, n_lo, n_mid)
        self._locate(mid, hi, n_mid, n_hi)

    def _pin(self, lo: float, hi: float, k: int) -> None:
        """Find the k zeros (with multiplicity) in lo < |z| <= hi."""
        t = math.sqrt(lo * hi)
        zeros = self._newton_zeros(t, k, lo, hi)
        mults = []
        for i, z in enumerate(zeros):
            others = [abs(z - w) for j, w in enumerate(zeros) if j != i]
            rho = min([0.4 * d for d in others] + [0.5 * (hi - lo), 1e-3 * t])
            try:
                mults.append(self._try_winding(rho, z) or 0)
            except FloatingPointError:
                mults.append(0)
        if zeros and sum(mults) == k and all(mults):
            for z, mult in zip(zeros, mults):
                self.jumps.append((abs(z), mult, 1))
            return
        self._warn(f"could not resolve {k} zero(s) near r={t:g}; jump placed at the bracket midpoint")
        self.jumps.append((t, k, max(1, min(k, len(zeros)))))

    def _newton_zeros(self, t: float, k: int, lo: float, hi: float) -> list[complex]:
        count = max(4096, 64 * k)
        z = _circle(t, count)
        with np.errstate(all="ignore"):
            w, _ = self.mem.log_minus(z, self.a)
        mag = w.real
        is_min = (mag < np.roll(mag, 1)) & (mag <= np.roll(mag, -1))
        cand = z[is_min][np.argsort(mag[is_min])[: 4 * k]]
        found = []
        for w0 in cand:
            w0 = self._damped_newton(w0)
            if lo * (1 - 1e-9) < abs(w0) <= hi * (1 + 1e-9):
                found.append(w0)
        return polyroots.dedup(found, 1e-7 * (1 + t))

    def _damped_newton(self, w0: complex) -> complex:
        """Newton on f - a with step halving until |f - a| decreases."""
        def logabs(w):
            with np.errstate(all="ignore"):
                lw, g = self.mem.log_minus(np.array([w]), self.a)
            return lw[0].real, g[0]

        cur, g = logabs(w0)
        for _ in range(80):
            if cur == -np.inf:
                break
            with np.errstate(all="ignore"):
                step = 1 / g  # (f - a) / f'
            if not np.isfinite(step):
                break
            for _ in range(30):
                new, g_new = logabs(w0 - step)
                if new < cur or abs(step) < 1e-15 * (1 + abs(w0)):
                    break
                step /= 2
            w0, cur, g = w0 - step, new, g_new
            if abs(step) < 1e-15 * (1 + abs(w0)):
                break
        return w0

    def counts(self, r: float) -> tuple[float, float]:
        self.extend([r])
        log_r = math.log(r)
        N = self.n0 * log_r
        Nbar = (1 if self.n0 else 0) * log_r
        for t, k, d in self.jumps:
            if t <= r:
                N += k * math.log(r / t)
                Nbar += d * math.log(r / t)
        return N, Nbar


class _PolyCounter:
    def __init__(self, coeffs: np.ndarray, a: complex):
        c = coeffs.copy()
        c[0] -= a
        c = polyroots.trim(c)
        if len(c) == 1 and c[0] == 0:
            raise ValueError("member is identically equal to the target value")
        self.clusters = polyroots.root_clusters(c)

    def counts(self, r: float) -> tuple[float, float]:
        log_r = math.log(r)
        N = Nbar = 0.0
        for z, k in self.clusters:
            if z == 0:
                N += k * log_r
                Nbar += log_r
            elif abs(z) <= r:
                N += k * math.log(r / abs(z))
                Nbar += math.log(r / abs(z))
        return N, Nbar


# ---------------------------------------------------------------------------
# Public operations


def proximity(m: BoundMember, a: complex | None, r: float) -> float:
    """m(r, a, f); ``a=None`` means a = infinity, i.e. m(r, f)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    warnings: list[str] = []
    value = _proximity(_Member(m), a, r, warnings)
    for w in warnings:
        log.warning("%s: %s", m.id, w)
    return value


def counting(
    m: BoundMember, a: complex, r: float, method: str = "auto", schedule: RadiusSchedule | None = None
) -> tuple[float, float]:
    """(N(r, a, f), N̄(r, a, f)) with the n(0)·log r convention at the origin.

    ``method`` is ``"auto"`` (roots for polynomials, argument principle
    otherwise), ``"roots"`` or ``"argument"``.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    counter = _counter(m, a, method, [])
    if isinstance(counter, _ZeroCounter):
        sched = schedule or RadiusSchedule.log_spaced(1.0, max(r, 1.0) * 1.0000001)
        counter.extend([t for t in sched.radii if t <= r] + [r])
    return counter.counts(r)


def _counter(m: BoundMember, a: complex, method: str, warnings: list[str]):
    coeffs = m.polynomial()
    if method == "roots" or (method == "auto" and coeffs is not None):
        if coeffs is None:
            raise ValueError(f"{m.id} is not a polynomial")
        return _PolyCounter(coeffs, a)
    if method not in ("auto", "argument"):
        raise ValueError(f"unknown counting method {method!r}")
    return _ZeroCounter(_Member(m), a, warnings)


def characteristic(m: BoundMember, r: float) -> float:
    """T(r, f) = m(r, f) + N(r, f); N(r, f) = 0 for the entire members accepted here."""
    return proximity(m, None, r)


def max_modulus_log(m: BoundMember, r: float, count: int = M_START) -> float:
    """log⁺ M(r, f) from circle sampling."""
    with np.errstate(all="ignore"):
        w, _ = _Member(m).logf(_circle(r, count))
    return max(0.0, float(np.nanmax(w.real)))


@dataclass
class NevanlinnaRow:
    r: float
    m_a: float
    N_a: float
    Nbar_a: float
    m_inf: float
    N_inf: float
    T: float
    log_max_modulus: float

    @property
    def ratio_delta(self) -> float:
        return self.N_a / self.T if self.T > 0 else math.nan

    @property
    def ratio_theta(self) -> float:
        return self.Nbar_a / self.T if self.T > 0 else math.nan


@dataclass
class NevanlinnaReport:
    member: str
    a: complex
    rows: list[NevanlinnaRow]
    delta: float
    theta: float
    window: tuple[float, ...]
    warnings: list[str] = field(default_factory=list)

    @property
    def theta_below_half(self) -> bool:
        return self.theta < 0.5

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "m_a", "N_a", "Nbar_a", "T", "ratio_delta", "ratio_theta"])
        for row in self.rows:
            writer.writerow(
                ["%.17g" % v for v in (row.r, row.m_a, row.N_a, row.Nbar_a, row.T, row.ratio_delta, row.ratio_theta)]
            )
        return buf.getvalue().encode("utf-8")

    def to_json(self) -> bytes:
        data = {
            "member": self.member,
            "a": [self.a.real, self.a.imag],
            "delta_hat": self.delta,
            "theta_hat": self.theta,
            "theta_below_half": self.theta_below_half,
            "limsup_window": list(self.window),
            "log_max_modulus_at_rmax": self.rows[-1].log_max_modulus,
            "T_at_rmax": self.rows[-1].T,
            "warnings": self.warnings,
        }
        return (json.dumps(data, indent=2) + "\n").encode("utf-8")


def nevanlinna_report(m: BoundMember, a: complex, rs: RadiusSchedule | None = None) -> NevanlinnaReport:
    rs = rs or RadiusSchedule.log_spaced()
    warnings: list[str] = []
    mem = _Member(m)
    counter = _counter(m, a, "auto", warnings)
    if isinstance(counter, _ZeroCounter):
        counter.extend(rs.radii)
    rows = []
    for r in rs.radii:
        N, Nbar = counter.counts(r)
        m_inf = _proximity(mem, None, r, warnings)
        rows.append(
            NevanlinnaRow(
                r=r,
                m_a=_proximity(mem, a, r, warnings),
                N_a=N,
                Nbar_a=Nbar,
                m_inf=m_inf,
                N_inf=0.0,
                T=m_inf,
                log_max_modulus=max_modulus_log(m, r),
            )
        )
    window = rs.limsup_window()
    top = [row for row in rows if row.r in window]
    if top[-1].T <= 0:
        raise ValueError("T(r_max, f) must be positive to form defects")
    delta = _clamp(1 - max(row.ratio_delta for row in top if row.T > 0))
    theta = _clamp(1 - max(row.ratio_theta for row in top if row.T > 0))
    return NevanlinnaReport(m.id, complex(a), rows, delta, theta, window, warnings)


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def defects(m: BoundMember, a: complex, rs: RadiusSchedule | None = None) -> tuple[float, float]:
    """(δ̂, Θ̂): one minus the largest N/T and N̄/T over the final half-decade of radii."""
    rep = nevanlinna_report(m, a, rs)
    return rep.delta, rep.theta
