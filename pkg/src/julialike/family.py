"""Families of holomorphic functions as finite unions of parametrized pieces.

Text format, one piece per line::

    domain disk(0, 1)                       # optional header
    n*(z-a) ; index n=1..64 ; param a in disk(0, 1)
    z^n ; index n=1..64
    sin(k*z) ; index k=1..64 ; param c in {0, 1, 0.5+0.5*i}

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr
from .expr import Bindings, Jet, Node

DEFAULT_N_MAX = 64
# Default ring spacing of the disk sampler (per unit radius).
DEFAULT_RINGS_PER_UNIT = 24
DEFAULT_POINTS_PER_RING = 8


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius

    def describe(self) -> str:
        return f"disk({_fmt_complex(self.center)},{self.radius!r})"


@dataclass(frozen=True)
class ExplicitSampler:
    values: tuple[complex, ...]

    def __post_init__(self):
        if not self.values:
            raise FamilyError("parameter sample set is empty")

    def samples(self) -> tuple[complex, ...]:
        return self.values

    def describe(self) -> str:
        return "{" + ", ".join(_fmt_complex(v) for v in self.values) + "}"


@dataclass(frozen=True)
class DiskSampler:
    """Center plus ``rings`` concentric circles out to the closed boundary.

    Ring ``j`` (radius ``radius*j/rings``) carries ``per_ring*j`` equally
    spaced points, so the arc spacing is the same on every ring.
    """

    center: complex
    radius: float
    rings: int
    per_ring: int

    def __post_init__(self):
        if self.radius <= 0 or self.rings < 1 or self.per_ring < 1:
            raise FamilyError("disk sampler needs radius > 0, rings >= 1, per_ring >= 1")

    def samples(self) -> tuple[complex, ...]:
        out = [complex(self.center)]
        for j in range(1, self.rings + 1):
            r = self.radius * j / self.rings
            count = self.per_ring * j
            for k in range(count):
                out.append(complex(self.center + r * np.exp(2j * np.pi * k / count)))
        return tuple(out)

    def describe(self) -> str:
        return f"disk({_fmt_complex(self.center)},{self.radius!r},{self.rings},{self.per_ring})"


ParamSampler = ExplicitSampler | DiskSampler


@dataclass(frozen=True)
class IndexRange:
    name: str
    lo: int
    hi: int

    def __post_init__(self):
        if self.hi < 1 or self.lo > self.hi or self.lo < 0:
            raise FamilyError(f"bad index range {self.name}={self.lo}..{self.hi}")


@dataclass(frozen=True)
class FamilyPiece:
    ast: Node
    index_vars: tuple[IndexRange, ...] = ()
    param_vars: tuple[tuple[str, ParamSampler], ...] = ()
    text: str = field(default="", compare=False)

    def __post_init__(self):
        names = [r.name for r in self.index_vars] + [p for p, _ in self.param_vars]
        if len(set(names)) != len(names) or "z" in names:
            raise FamilyError("variable names must be distinct and not 'z'")
        unbound = expr.free_vars(self.ast) - {"z"} - set(names)
        if unbound:
            raise FamilyError(f"unbound variables {sorted(unbound)}")

    @property
    def index_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.index_vars)

    def describe(self) -> str:
        parts = [self.text or expr.format(self.ast)]
        parts += [f"index {r.name}={r.lo}..{r.hi}" for r in self.index_vars]
        parts += [f"param {name} in {s.describe()}" for name, s in self.param_vars]
        return " ; ".join(parts)


@dataclass(frozen=True)
class FamilySpec:
    pieces: tuple[FamilyPiece, ...]
    domain: Disk | None = None

    def __post_init__(self):
        if not self.pieces:
            raise FamilyError("empty family")

    def piece_set(self) -> frozenset[FamilyPiece]:
        return frozenset(self.pieces)

    def contains(self, z):
        if self.domain is None:
            return np.ones(np.shape(z), dtype=bool)
        return self.domain.contains(z)

    def describe(self) -> str:
        lines = [f"domain {self.domain.describe()}"] if self.domain else []
        return "\n".join(lines + [p.describe() for p in self.pieces])


@dataclass(frozen=True)
class IndexSchedule:
    """Finite truncation of each index variable's range."""

    values: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        for name, vals in self.values.items():
            if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
                raise FamilyError(f"schedule for {name!r} must be nonempty and strictly increasing")

    @classmethod
    def geometric(cls, family: FamilySpec, n_max: int | None = None) -> "IndexSchedule":
        """lo, powers of two inside the range, and hi (optionally capped at n_max)."""
        out = {}
        for name, (lo, hi) in _merged_ranges(family, n_max).items():
            vals = {lo, hi}
            k = 1
            while k < hi:
                if k > lo:
                    vals.add(k)
                k *= 2
            out[name] = tuple(sorted(vals))
        return cls(out)

    @classmethod
    def full(cls, family: FamilySpec, n_max: int | None = None) -> "IndexSchedule":
        return cls({name: tuple(range(lo, hi + 1)) for name, (lo, hi) in _merged_ranges(family, n_max).items()})

    def for_piece(self, piece: FamilyPiece) -> list[tuple[int, ...]]:
        out = []
        for r in piece.index_vars:
            if r.name not in self.values:
                raise FamilyError(f"no schedule for index {r.name!r}")
            vals = tuple(v for v in self.values[r.name] if r.lo <= v <= r.hi)
            if not vals:
                raise FamilyError(f"schedule for {r.name!r} has no values in {r.lo}..{r.hi}")
            out.append(vals)
        return out

    def prefix(self, fraction: float) -> "IndexSchedule":
        return IndexSchedule(
            {name: vals[: max(1, math.ceil(fraction * len(vals)))] for name, vals in self.values.items()}
        )

    @property
    def n_max(self) -> int:
        return max(v[-1] for v in self.values.values()) if self.values else 0

    def __len__(self) -> int:
        return max((len(v) for v in self.values.values()), default=1)

    def to_dict(self) -> dict:
        return {"n_max": self.n_max, "values": {k: list(v) for k, v in sorted(self.values.items())}}


def _merged_ranges(family: FamilySpec, n_max: int | None) -> dict[str, tuple[int, int]]:
    ranges: dict[str, tuple[int, int]] = {}
    for piece in family.pieces:
        for r in piece.index_vars:
            lo, hi = ranges.get(r.name, (r.lo, r.hi))
            ranges[r.name] = (min(lo, r.lo), max(hi, r.hi))
    if n_max is not None:
        ranges = {k: (lo, max(lo, min(hi, n_max))) for k, (lo, hi) in ranges.items()}
    return ranges


class BoundMember:
    """One member f of the family: all index and parameter values fixed."""

    def __init__(self, piece_index: int, piece: FamilyPiece, indices: Mapping[str, int], params: Mapping[str, complex]):
        self.piece_index = piece_index
        self.piece = piece
        self.ast = piece.ast
        self.indices = dict(indices)
        self.params = dict(params)
        self._env = Bindings(0j, self.indices, self.params)
        self._fn = expr.compile_jet(self.ast, self._env)
        self._poly: np.ndarray | None | bool = False

    @property
    def id(self) -> str:
        items = [f"{k}={v}" for k, v in self.indices.items()]
        items += [f"{k}={_fmt_complex(v)}" for k, v in self.params.items()]
        return f"p{self.piece_index}[" + ",".join(items) + "]"

    def jet(self, z) -> Jet:
        return expr.run_jet(self._fn, z)

    def __call__(self, z):
        return self.jet(z).value

    def polynomial(self) -> np.ndarray | None:
        """Coefficients (constant first) if syntactically polynomial, else None."""
        if self._poly is False:
            self._poly = expr.to_polynomial(self.ast, self._env)
        return self._poly

    def __repr__(self) -> str:
        return f"BoundMember({self.id}: {expr.format(self.ast)})"


# ---------------------------------------------------------------------------
# Algebra


def _check_domains(F: FamilySpec, G: FamilySpec) -> None:
    if F.domain != G.domain:
        raise FamilyError("mismatched domain clips")


def _dedup(pieces: Iterable[FamilyPiece]) -> tuple[FamilyPiece, ...]:
    seen = set()
    out = []
    for p in pieces:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return tuple(out)


def union(F: FamilySpec, G: FamilySpec) -> FamilySpec:
    _check_domains(F, G)
    return FamilySpec(_dedup(F.pieces + G.pieces), F.domain)


def intersect(F: FamilySpec, G: FamilySpec) -> FamilySpec:
    """Pieces structurally present in both families."""
    _check_domains(F, G)
    other = G.piece_set()
    return FamilySpec(_dedup(p for p in F.pieces if p in other), F.domain)


def enumerate_members(F: FamilySpec, schedule: IndexSchedule) -> list[BoundMember]:
    members = []
    for k, piece in enumerate(F.pieces):
        index_values = schedule.for_piece(piece)
        param_names = [name for name, _ in piece.param_vars]
        param_samples = [s.samples() for _, s in piece.param_vars]
        for idx in itertools.product(*index_values):
            for prm in itertools.product(*param_samples):
                members.append(BoundMember(k, piece, dict(zip(piece.index_names, idx)), dict(zip(param_names, prm))))
    return members


def tail_mask(members: Sequence[BoundMember], schedule: IndexSchedule, tail_fraction: float, tail_start: int | None = None) -> np.ndarray:
    """Members whose every index lies in the top ``tail_fraction`` of its values.

    The tail of an index with largest scheduled value N is {n >= (1-f)*N};
    ``tail_start`` overrides the cutoff with a fixed index.  Pieces without
    index variables are entirely tail.
    """
    out = np.zeros(len(members), dtype=bool)
    for i, m in enumerate(members):
        ok = True
        for r in m.piece.index_vars:
            vals = [v for v in schedule.values[r.name] if r.lo <= v <= r.hi]
            cutoff = tail_start if tail_start is not None else (1 - tail_fraction) * vals[-1]
            if m.indices[r.name] < min(cutoff, vals[-1]):
                ok = False
        out[i] = ok
    return out


# ---------------------------------------------------------------------------
# Text format


def _fmt_complex(c) -> str:
    c = complex(c)
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}*i"
    return f"{c.real!r}+{c.imag!r}*i"


def parse_value(text: str) -> complex:
    """A z-free expression such as ``0.5+0.5*i`` or ``-1``."""
    node = expr.parse_expression(text.strip(), {"z"})
    if expr.depends_on(node):
        raise FamilyError(f"value {text!r} must not depend on z")
    return complex(expr.eval(node, Bindings(0j, {}, {})))


def _split_args(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


_DISK = re.compile(r"^disk\s*\((.*)\)$", re.S)


def parse_disk_args(text: str) -> list[str]:
    m = _DISK.match(text.strip())
    if not m:
        raise FamilyError(f"expected disk(...), got {text!r}")
    return _split_args(m.group(1))


def parse_sampler(text: str) -> ParamSampler:
    text = text.strip()
    if text.startswith("{") and text.endswith("}"):
        inner = text[1:-1].strip()
        if not inner:
            raise FamilyError("parameter sample set is empty")
        return ExplicitSampler(tuple(parse_value(v) for v in _split_args(inner)))
    args = parse_disk_args(text)
    if len(args) not in (2, 4):
        raise FamilyError("disk sampler takes (center, radius) or (center, radius, rings, per_ring)")
    center = parse_value(args[0])
    radius = parse_value(args[1])
    if radius.imag != 0 or radius.real <= 0:
        raise FamilyError("disk radius must be a positive real")
    if len(args) == 4:
        rings, per_ring = int(args[2]), int(args[3])
    else:
        rings = max(1, math.ceil(DEFAULT_RINGS_PER_UNIT * radius.real))
        per_ring = DEFAULT_POINTS_PER_RING
    return DiskSampler(center, radius.real, rings, per_ring)


_INDEX = re.compile(r"^index\s+([A-Za-z_]\w*)\s*=\s*(\d+)\s*\.\.\s*(\d+)$")
_PARAM = re.compile(r"^param\s+([A-Za-z_]\w*)\s+in\s+(.+)$", re.S)


def parse_piece(line: str) -> FamilyPiece:
    fields = [f.strip() for f in line.split(";")]
    text, clauses = fields[0], fields[1:]
    index_vars, param_vars = [], []
    for clause in clauses:
        if m := _INDEX.match(clause):
            index_vars.append(IndexRange(m.group(1), int(m.group(2)), int(m.group(3))))
        elif m := _PARAM.match(clause):
            param_vars.append((m.group(1), parse_sampler(m.group(2))))
        else:
            raise FamilyError(f"unrecognized clause {clause!r}")
    names = [r.name for r in index_vars] + [p for p, _ in param_vars]
    ast = expr.parse_expression(text, {"z", *names}, {r.name for r in index_vars})
    return FamilyPiece(ast, tuple(index_vars), tuple(param_vars), text)


def parse_family(text: str) -> FamilySpec:
    domain = None
    pieces = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("domain"):
            if pieces or domain is not None:
                raise FamilyError("domain must be the first line")
            args = parse_disk_args(line[len("domain"):])
            if len(args) != 2:
                raise FamilyError("domain takes disk(center, radius)")
            radius = parse_value(args[1])
            domain = Disk(parse_value(args[0]), radius.real)
            continue
        pieces.append(parse_piece(line))
    return FamilySpec(tuple(pieces), domain)
