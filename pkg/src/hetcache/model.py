"""Exact data model shared by every scheme.

All sizes are ``Fraction`` multiples of the file length F; symbols only
appear once a plan is laid out at a concrete F (see :func:`min_F`).

Conventions: users are numbered 1..K (as in subfile tags such as
``W_{n,{2,3}}``); files and demands use 0-based indices into the library.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .fieldcode import FieldSpec, ParityCode, build_parity_code, sigma

Rational = Fraction

__all__ = [
    "Rational",
    "parse_rational",
    "SchemeError",
    "ConfigError",
    "OperandSizeMismatch",
    "InfeasiblePlacement",
    "NegativeSubfileSize",
    "CacheOverflow",
    "OutOfScheme",
    "SystemConfig",
    "load_config",
    "Library",
    "make_library",
    "Tag",
    "PHI",
    "SubfileLabel",
    "SubfilePlan",
    "CodedFamily",
    "CacheContent",
    "ParityBlock",
    "FilledCache",
    "fill_cache",
    "Placement",
    "Transmission",
    "LoadReport",
    "min_F",
    "materialize",
]


class SchemeError(Exception):
    pass


class ConfigError(SchemeError, ValueError):
    pass


class OperandSizeMismatch(SchemeError):
    pass


class InfeasiblePlacement(SchemeError):
    """The closed-form placement does not describe a valid cache layout."""


class NegativeSubfileSize(InfeasiblePlacement):
    pass


class CacheOverflow(InfeasiblePlacement):
    pass


class OutOfScheme(SchemeError):
    pass


def parse_rational(value) -> Fraction:
    """'3/20', '0.15', 0.15 and Fraction(3, 20) all parse to 3/20.

    Floats go through their shortest repr, so 0.15 means the decimal 0.15.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse {value!r} as an exact rational") from exc


@dataclass(frozen=True)
class SystemConfig:
    K: int
    N: int
    m: tuple[Fraction, ...]
    field: FieldSpec = field(default_factory=FieldSpec)

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(parse_rational(x) for x in self.m))
        if self.K < 2:
            raise ConfigError(f"need K >= 2 users, got {self.K}")
        if self.N < 1:
            raise ConfigError(f"need N >= 1 files, got {self.N}")
        if len(self.m) != self.K:
            raise ConfigError(f"expected {self.K} cache sizes, got {len(self.m)}")
        if any(not 0 <= x <= 1 for x in self.m):
            raise ConfigError("normalized cache sizes must lie in [0, 1]")
        if any(a > b for a, b in zip(self.m, self.m[1:])):
            raise ConfigError("cache sizes must be sorted ascending (m_1 <= ... <= m_K)")

    @classmethod
    def create(cls, K: int, N: int, m: Iterable, r: int = 8) -> "SystemConfig":
        return cls(K, N, tuple(parse_rational(x) for x in m), FieldSpec(r))

    def budget(self, k: int) -> Fraction:
        """Cache capacity of user k (1-based) in units of F."""
        return self.N * self.m[k - 1]


def load_config(path: str | Path) -> dict:
    """Read a JSON object or ``key = value`` lines; returns raw settings.

    Recognized keys: K, N, m (list or comma-separated), seed, r.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
    out = {}
    for key, value in raw.items():
        if key in ("K", "N", "seed", "r"):
            out[key] = int(value)
        elif key == "m":
            items = value.split(",") if isinstance(value, str) else value
            out["m"] = tuple(parse_rational(x) for x in items)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return out


@dataclass(frozen=True)
class Library:
    files: np.ndarray

    @property
    def N(self) -> int:
        return self.files.shape[0]

    @property
    def F(self) -> int:
        return self.files.shape[1]


def make_library(cfg: SystemConfig, F: int, seed: int = 0) -> Library:
    if F < 1:
        raise ConfigError("file length F must be positive")
    rng = np.random.default_rng(seed)
    files = rng.integers(0, cfg.field.order, size=(cfg.N, F), dtype=np.int64)
    files = files.astype(cfg.field.dtype)
    files.setflags(write=False)
    return Library(files)


class Tag(NamedTuple):
    """Subfile tag: a user set plus a superscript (0 when there is none).

    The K-user scheme writes W^{(i)}_{n,k} as Tag((k,), i) and the
    server-only residue W_{n,phi} as :data:`PHI`.  Tags order as tuples.
    """

    users: tuple[int, ...]
    index: int = 0

    def __str__(self) -> str:
        if not self.users:
            return "phi"
        if len(self.users) == 1 and self.index == 0:
            base = str(self.users[0])
        else:
            base = "{" + ",".join(map(str, self.users)) + "}"
        return base if self.index == 0 else f"{base}^({self.index})"


PHI = Tag(())


class SubfileLabel(NamedTuple):
    file: int
    tag: Tag

    def __str__(self) -> str:
        return f"W[{self.file + 1},{self.tag}]"


class SubfilePlan:
    """Per-file partition into tagged subfiles with exact relative sizes."""

    def __init__(self, sizes: Mapping[Tag, Fraction], N: int):
        self.N = N
        self.tags: tuple[Tag, ...] = tuple(sorted(sizes))
        self.size: dict[Tag, Fraction] = {t: Fraction(sizes[t]) for t in self.tags}
        self._order = {t: i for i, t in enumerate(self.tags)}
        self._operand_size: dict[tuple[Tag, ...], Fraction] = {}

    def __repr__(self) -> str:
        body = ", ".join(f"{t}: {s}" for t, s in self.size.items())
        return f"SubfilePlan(N={self.N}, {{{body}}})"

    def total(self) -> Fraction:
        return sum(self.size.values(), Fraction(0))

    def negative_tags(self) -> list[Tag]:
        return [t for t, s in self.size.items() if s < 0]

    def nonzero_tags(self) -> list[Tag]:
        return [t for t, s in self.size.items() if s != 0]

    def sort_key(self, label: SubfileLabel) -> tuple[int, int]:
        return (label.file, self._order[label.tag])

    def operand_size(self, labels: Sequence[SubfileLabel]) -> Fraction:
        tags = tuple(lab.tag for lab in labels)
        size = self._operand_size.get(tags)
        if size is None:
            size = sum((self.size[t] for t in tags), Fraction(0))
            self._operand_size[tags] = size
        return size

    def layout(self, F: int) -> "Layout":
        return Layout(self, F)


class Layout:
    """Symbol offsets of each tag inside a file of length F."""

    def __init__(self, plan: SubfilePlan, F: int):
        self.plan = plan
        self.F = F
        self.offset: dict[Tag, int] = {}
        self.length: dict[Tag, int] = {}
        pos = 0
        for t in plan.tags:
            n = plan.size[t] * F
            if n.denominator != 1 or n < 0:
                raise ValueError(f"subfile {t} has non-integral or negative length {n} at F={F}")
            self.offset[t] = pos
            self.length[t] = int(n)
            pos += int(n)
        if pos != F:
            raise ValueError(f"layout covers {pos} symbols, expected F={F}")
        self._slices = {t: slice(self.offset[t], self.offset[t] + self.length[t]) for t in plan.tags}

    def slice(self, tag: Tag) -> slice:
        return self._slices[tag]


def min_F(plan: SubfilePlan) -> int:
    """Least F making every subfile an integral number of symbols."""
    return math.lcm(*(s.denominator for s in plan.size.values())) if plan.size else 1


@dataclass(frozen=True)
class CodedFamily:
    """sigma_j over the same-tag subfiles of all N files."""

    tag: Tag
    deficiency: int


@dataclass(frozen=True)
class CacheContent:
    user: int
    uncoded: frozenset[SubfileLabel]
    coded: tuple[CodedFamily, ...] = ()
    # the construction claims |Z_k| = M_k F (otherwise only <= is promised)
    fills_budget: bool = True

    @cached_property
    def uncoded_tags(self) -> frozenset[Tag]:
        return frozenset(lab.tag for lab in self.uncoded)

    def size(self, plan: SubfilePlan) -> Fraction:
        """Cached amount in units of F."""
        total = sum((plan.size[lab.tag] for lab in self.uncoded), Fraction(0))
        for fam in self.coded:
            total += (plan.N - fam.deficiency) * plan.size[fam.tag]
        return total

    def describe(self) -> str:
        parts = []
        by_tag: dict[Tag, int] = {}
        for lab in self.uncoded:
            by_tag[lab.tag] = by_tag.get(lab.tag, 0) + 1
        for t in sorted(by_tag):
            parts.append(f"W[*,{t}] x{by_tag[t]}")
        for fam in self.coded:
            parts.append(f"sigma_{fam.deficiency}(W[*,{fam.tag}])")
        return ", ".join(parts) if parts else "(empty)"


@dataclass(frozen=True)
class ParityBlock:
    family: CodedFamily
    code: ParityCode
    parities: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class FilledCache:
    """A user's cache materialized at a concrete F."""

    content: CacheContent
    uncoded: Mapping[SubfileLabel, np.ndarray]
    parity: Mapping[Tag, ParityBlock]

    @property
    def user(self) -> int:
        return self.content.user

    def symbol_count(self) -> int:
        n = sum(len(v) for v in self.uncoded.values())
        return n + sum(len(p) for blk in self.parity.values() for p in blk.parities)


def fill_cache(content: CacheContent, library: Library, layout: Layout, field: FieldSpec) -> FilledCache:
    files = library.files
    uncoded = {lab: files[lab.file, layout.slice(lab.tag)] for lab in content.uncoded}
    parity = {}
    N = library.N
    for fam in content.coded:
        code = build_parity_code(N, fam.deficiency, field)
        sl = layout.slice(fam.tag)
        blocks = sigma(code, [files[n, sl] for n in range(N)])
        parity[fam.tag] = ParityBlock(fam, code, tuple(blocks))
    return FilledCache(content, uncoded, parity)


@dataclass(frozen=True)
class Placement:
    """Result of a placement phase: partition plus symbolic cache contents."""

    cfg: SystemConfig
    plan: SubfilePlan
    caches: tuple[CacheContent, ...]
    scheme: str
    region: object = None

    def check_partition(self) -> bool:
        return self.plan.total() == 1

    def check_nonnegative(self) -> None:
        neg = self.plan.negative_tags()
        if neg:
            detail = ", ".join(f"|W[n,{t}]| = {self.plan.size[t]}" for t in neg)
            raise NegativeSubfileSize(f"{self.scheme}: {detail} at m={_fmt_m(self.cfg.m)}, N={self.cfg.N}")

    def budget_slack(self) -> list[Fraction]:
        """M_k - |Z_k| per user, in units of F."""
        return [self.cfg.budget(c.user) - c.size(self.plan) for c in self.caches]

    def check_budgets(self) -> None:
        for c, slack in zip(self.caches, self.budget_slack()):
            if slack < 0:
                raise CacheOverflow(
                    f"{self.scheme}: user {c.user} caches {c.size(self.plan)} > M_{c.user} = "
                    f"{self.cfg.budget(c.user)} at m={_fmt_m(self.cfg.m)}, N={self.cfg.N}"
                )

    def validate(self) -> "Placement":
        self.check_nonnegative()
        if not self.check_partition():
            raise SchemeError(f"{self.scheme}: subfile sizes sum to {self.plan.total()}, not 1")
        self.check_budgets()
        return self


def _fmt_m(m: Sequence[Fraction]) -> str:
    return "(" + ", ".join(str(x) for x in m) + ")"


@dataclass(frozen=True)
class Transmission:
    """XOR of equal-size operands; each operand concatenates subfiles.

    A single operand is a plain (uncoded) broadcast.
    """

    name: str
    targets: tuple[int, ...]
    operands: tuple[tuple[SubfileLabel, ...], ...]
    size: Fraction

    @classmethod
    def build(cls, name: str, targets: Iterable[int], operands, plan: SubfilePlan) -> "Transmission":
        ops = tuple(tuple(sorted(op, key=plan.sort_key)) for op in operands)
        if not ops:
            raise ValueError("transmission needs at least one operand")
        sizes = [plan.operand_size(op) for op in ops]
        if any(s != sizes[0] for s in sizes):
            raise OperandSizeMismatch(
                f"{name}: operand sizes {[str(s) for s in sizes]} differ"
            )
        return cls(name, tuple(sorted(targets)), ops, sizes[0])

    @classmethod
    def raw(cls, name: str, targets: Iterable[int], labels: Iterable[SubfileLabel], plan: SubfilePlan):
        return cls.build(name, targets, [tuple(labels)], plan)

    @property
    def is_raw(self) -> bool:
        return len(self.operands) == 1

    def __str__(self) -> str:
        ops = [" u ".join(map(str, op)) or "()" for op in self.operands]
        return f"{self.name} = " + " (+) ".join(ops)


@dataclass(frozen=True)
class LoadReport:
    demand: tuple[int, ...]
    formula_load: Fraction
    measured_load: Fraction
    breakdown: tuple[tuple[str, Fraction], ...]


def materialize(tx: Transmission, library: Library, layout: Layout) -> np.ndarray:
    files = library.files
    payload = None
    for op in tx.operands:
        parts = [files[lab.file, layout.slice(lab.tag)] for lab in op]
        block = np.concatenate(parts) if len(parts) != 1 else parts[0].copy()
        if payload is None:
            payload = block
        else:
            if len(block) != len(payload):
                raise OperandSizeMismatch(f"{tx.name}: operand lengths {len(block)} != {len(payload)}")
            payload ^= block
    return payload
