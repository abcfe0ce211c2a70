"""Three-user coded placement: region classification, load formulas and the
region-specific placement and delivery constructions.

Tags follow the subfile notation: W^{(s)}_{n,S} is ``Tag(S, s)`` and an
unsuperscripted W_{n,S} is ``Tag(S, 0)``.  Region I is the K = 3 case of the
small-memory scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import (
    CacheContent,
    CodedFamily,
    OutOfScheme,
    Placement,
    SchemeError,
    SubfileLabel,
    SubfilePlan,
    SystemConfig,
    Tag,
    Transmission,
)
from .scheme_smallmem import deliver_small_mem, place_small_mem

__all__ = [
    "Region",
    "Unclassifiable",
    "region_one_value",
    "classify_region",
    "coded_terms",
    "uncoded_terms",
    "load_coded_3",
    "load_uncoded_3",
    "region3_subcase",
    "place_region1",
    "deliver_region1",
    "place_region2",
    "deliver_region2",
    "place_region3",
    "deliver_region3",
    "place_region4",
    "deliver_region4",
    "place_three",
    "deliver_three",
]

_F = Fraction


class Unclassifiable(SchemeError):
    pass


@dataclass(frozen=True)
class Region:
    name: str
    subcase: int | None = None
    w12_positive: bool | None = None

    def __post_init__(self):
        if self.name not in ("I", "II", "III", "IV"):
            raise ValueError(f"unknown region {self.name!r}")
        if self.subcase is not None and self.name != "III":
            raise ValueError("sub-case index belongs to region III only")
        if self.w12_positive is not None and self.name != "IV":
            raise ValueError("the W_{1,2} flag belongs to region IV only")

    def __str__(self) -> str:
        if self.subcase is not None:
            return f"{self.name}.{self.subcase}"
        if self.w12_positive is not None:
            return f"{self.name}:w12{'>0' if self.w12_positive else '=0'}"
        return self.name

    @property
    def index(self) -> int:
        return ("I", "II", "III", "IV").index(self.name)


def _m3(m: Sequence) -> tuple[Fraction, Fraction, Fraction]:
    if len(m) != 3:
        raise ValueError(f"three cache sizes expected, got {len(m)}")
    m1, m2, m3 = (_F(x) for x in m)
    if not m1 <= m2 <= m3:
        raise ValueError("cache sizes must be sorted ascending")
    return m1, m2, m3


def _need_n(N: int) -> None:
    if N < 4:
        raise OutOfScheme(f"the three-user scheme needs N >= 4 files, got N={N}")


def region_one_value(m, N: int) -> Fraction:
    m1, m2, m3 = _m3(m)
    return m1 + m2 + m3 + _F(2, N - 1) * (m2 - m1) + _F(2, N - 2) * (m3 - m2)


def coded_terms(m, N: int) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """The four region loads; their max is the achievable coded load."""
    _need_n(N)
    m1, m2, m3 = _m3(m)
    d2, d3 = m2 - m1, m3 - m2
    return (
        3 - 3 * m1 - 2 * m2 - m3 - _F(3, N - 1) * d2 - _F(2, N - 2) * d3,
        _F(5, 3) - (3 * m1 + 2 * m2 + m3) / 3 - d3 / (3 * (N - 1)),
        2 - 2 * m1 - m2 - d2 / (N - 1),
        1 - m1,
    )


def uncoded_terms(m) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    m1, m2, m3 = _m3(m)
    return (
        3 - 3 * m1 - 2 * m2 - m3,
        _F(5, 3) - (3 * m1 + 2 * m2 + m3) / 3,
        2 - 2 * m1 - m2,
        1 - m1,
    )


def load_coded_3(m, N: int) -> Fraction:
    return max(coded_terms(m, N))


def load_uncoded_3(m) -> Fraction:
    return max(uncoded_terms(m))


def region3_subcase(m, N: int) -> int:
    m1, m2, m3 = _m3(m)
    base = _F(N - 2, N) + m2 / (N - 1)
    if m3 <= base - _F((2 * N - 3) * (N - 2), (N - 1) * N) * m1:
        return 1
    # the second construction stays valid while its |W^{(1)}_{n,3}| is >= 0
    if m3 <= base + _F(2 * N - 3, (N - 1) * N) * m1:
        return 2
    return 3


def classify_region(m, N: int) -> Region:
    """First of I, II, III, IV whose defining inequalities hold."""
    _need_n(N)
    m1, m2, m3 = _m3(m)
    above_one = region_one_value(m, N) > 1
    c23 = N * m3 <= (N + 3) * m2 + 3 * (N - 2) * m1 - (N - 1)
    c2 = N * m3 <= 2 * (N - 1) - (2 * N - 3) * m2
    c34 = N * m2 + (N - 2) * m1 <= N - 1
    if not above_one:
        return Region("I")
    if c23 and c2:
        return Region("II")
    if not c23 and c34:
        return Region("III", subcase=region3_subcase(m, N))
    if not c34 and not c2:
        return Region("IV", w12_positive=_region4_w12(m1, m2, m3, N) > 0)
    raise Unclassifiable(f"m={tuple(map(str, (m1, m2, m3)))}, N={N} matches no region")


def _region4_w12(m1, m2, m3, N) -> Fraction:
    if m3 <= (N - 1 + m1) / _F(N):
        return (N * m2 + (N - 2) * m1) / _F(N - 1) - 1
    return _F(0)


def _expect(cfg: SystemConfig, name: str) -> Region:
    if cfg.K != 3:
        raise OutOfScheme(f"three-user scheme called with K={cfg.K}")
    region = classify_region(cfg.m, cfg.N)
    if region.name != name:
        raise OutOfScheme(f"m={tuple(map(str, cfg.m))}, N={cfg.N} is region {region.name}, not {name}")
    return region


def _T(*users: int, s: int = 0) -> Tag:
    return Tag(tuple(users), s)


def _all(N: int, *tags: Tag) -> frozenset[SubfileLabel]:
    return frozenset(SubfileLabel(n, t) for n in range(N) for t in tags)


def _finish(cfg, sizes, caches, region) -> Placement:
    placement = Placement(cfg, SubfilePlan(sizes, cfg.N), tuple(caches), f"three-user region {region}", region)
    return placement.validate()


def place_region1(cfg: SystemConfig) -> Placement:
    _expect(cfg, "I")
    p = place_small_mem(cfg)
    return Placement(cfg, p.plan, p.caches, "three-user region I (small-memory, K=3)", Region("I"))


def deliver_region1(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    return deliver_small_mem(placement, d)


def place_region2(cfg: SystemConfig) -> Placement:
    region = _expect(cfg, "II")
    N = cfg.N
    m1, m2, m3 = cfg.m
    t = N * (m3 - m2) / (3 * (N - 1))
    w1 = _F(2, 3) - m1 - t
    pair = m1 - _F(1, 3) - t
    sizes = {
        _T(1): w1,
        _T(2): w1 - (m2 - m1),
        _T(3): w1 - (m2 - m1),
        _T(1, 2): pair,
        _T(1, 3, s=1): pair,
        _T(1, 3, s=2): 3 * t,
        _T(2, 3, s=1): pair,
        _T(2, 3, s=2): 3 * t,
        _T(2, 3, s=3): m2 - m1,
        _T(2, 3, s=4): m2 - m1,
    }
    caches = [
        CacheContent(1, _all(N, _T(1), _T(1, 2), _T(1, 3, s=1), _T(1, 3, s=2))),
        CacheContent(2, _all(N, _T(2), _T(1, 2), *(_T(2, 3, s=i) for i in range(1, 5)))),
        CacheContent(
            3,
            _all(N, _T(3), _T(1, 3, s=1), _T(1, 3, s=2), _T(2, 3, s=1), _T(2, 3, s=3), _T(2, 3, s=4)),
            (CodedFamily(_T(2, 3, s=2), 1),),
        ),
    ]
    return _finish(cfg, sizes, caches, region)


def deliver_region2(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    plan = placement.plan
    d1, d2, d3 = d
    W = SubfileLabel
    return [
        Transmission.build("X'_{1,2}", (1, 2), [[W(d2, _T(1))], [W(d1, _T(2)), W(d1, _T(2, 3, s=3))]], plan),
        Transmission.build("X_{1,3}", (1, 3), [[W(d3, _T(1))], [W(d1, _T(3)), W(d1, _T(2, 3, s=4))]], plan),
        Transmission.build("X_{2,3}", (2, 3), [[W(d3, _T(2))], [W(d2, _T(3))]], plan),
        Transmission.build(
            "X_{1,2,3}", (1, 2, 3),
            [[W(d3, _T(1, 2))], [W(d2, _T(1, 3, s=1))], [W(d1, _T(2, 3, s=1))]], plan,
        ),
        Transmission.build("X''_{1,2}", (1, 2), [[W(d2, _T(1, 3, s=2))], [W(d1, _T(2, 3, s=2))]], plan),
    ]


def place_region3(cfg: SystemConfig) -> Placement:
    region = _expect(cfg, "III")
    N = cfg.N
    m1, m2, m3 = cfg.m
    c = N * (m2 - m1) / (N - 1)
    if region.subcase == 1:
        x = m1
        a = region_one_value(cfg.m, N) - 1
        b = N * (m3 - m2) / (N - 2)
    elif region.subcase == 2:
        a = c
        x = _F(N - 2, 2 * N - 3) * (1 - _F(N - 3, N - 2) * m1 - c - N * (m3 - m2) / (N - 2))
        b = 1 - 2 * m1 - c - x
    else:
        a, x = c, _F(0)
        b = 1 - 2 * m1 - c
    sizes = {
        _T(1): x,
        _T(2, s=1): x,
        _T(2, s=2): c - a,
        _T(3, s=1): x,
        _T(3, s=2): c - a,
        _T(3, s=3): b,
        _T(1, 3): m1 - x,
        _T(2, 3, s=1): m1 - x,
        _T(2, 3, s=2): a,
    }
    caches = [
        CacheContent(1, _all(N, _T(1), _T(1, 3))),
        CacheContent(
            2,
            _all(N, _T(2, s=1), _T(2, 3, s=1)),
            (CodedFamily(_T(2, s=2), 1), CodedFamily(_T(2, 3, s=2), 1)),
        ),
        CacheContent(
            3,
            _all(N, _T(3, s=1), _T(2, 3, s=1)),
            (
                CodedFamily(_T(3, s=2), 1),
                CodedFamily(_T(2, 3, s=2), 1),
                CodedFamily(_T(1, 3), 1),
                CodedFamily(_T(3, s=3), 2),
            ),
            fills_budget=region.subcase != 3,
        ),
    ]
    return _finish(cfg, sizes, caches, region)


def deliver_region3(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    plan = placement.plan
    d1, d2, d3 = d
    W = SubfileLabel
    return [
        Transmission.build(
            "X_{1,2}", (1, 2),
            [[W(d2, _T(1)), W(d2, _T(1, 3))], [W(d1, _T(2, s=1)), W(d1, _T(2, 3, s=1))]], plan,
        ),
        Transmission.build(
            "X_{2,3}", (2, 3),
            [[W(d3, _T(2, s=1)), W(d3, _T(2, s=2))], [W(d2, _T(3, s=1)), W(d2, _T(3, s=2))]], plan,
        ),
        Transmission.build("X_{1,3}", (1, 3), [[W(d3, _T(1))], [W(d1, _T(3, s=1))]], plan),
        Transmission.raw(
            "X_{1}", (1,),
            [W(d1, _T(2, s=2)), W(d1, _T(2, 3, s=2)), W(d1, _T(3, s=2)), W(d1, _T(3, s=3))], plan,
        ),
        Transmission.raw("X_{2}", (2,), [W(d2, _T(3, s=3))], plan),
    ]


def place_region4(cfg: SystemConfig) -> Placement:
    region = _expect(cfg, "IV")
    N = cfg.N
    m1, m2, m3 = cfg.m
    if m1 + m2 > 1:
        raise OutOfScheme(
            f"region IV with m1+m2 = {m1 + m2} > 1 is served by an uncoded scheme; "
            "only the load formula is available"
        )
    a = _region4_w12(m1, m2, m3, N)
    sizes = {
        _T(1, 2): a,
        _T(1, 3): m1 - a,
        _T(2, 3, s=1): m1 - a,
        _T(2, 3, s=2): a,
        _T(2, 3, s=3): 1 - 2 * m1,
    }
    pieces = _all(N, _T(2, 3, s=1), _T(2, 3, s=2))
    caches = [
        CacheContent(1, _all(N, _T(1, 2), _T(1, 3))),
        CacheContent(
            2, pieces, (CodedFamily(_T(1, 2), 1), CodedFamily(_T(2, 3, s=3), 1)), fills_budget=False
        ),
        CacheContent(
            3, pieces, (CodedFamily(_T(1, 3), 1), CodedFamily(_T(2, 3, s=3), 1)), fills_budget=False
        ),
    ]
    return _finish(cfg, sizes, caches, region)


def deliver_region4(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    plan = placement.plan
    d1, d2, d3 = d
    W = SubfileLabel
    return [
        Transmission.build("X_{1,2}", (1, 2), [[W(d2, _T(1, 3))], [W(d1, _T(2, 3, s=1))]], plan),
        Transmission.build("X_{1,3}", (1, 3), [[W(d3, _T(1, 2))], [W(d1, _T(2, 3, s=2))]], plan),
        Transmission.raw("X_{1}", (1,), [W(d1, _T(2, 3, s=3))], plan),
    ]


_PLACE = {"I": place_region1, "II": place_region2, "III": place_region3, "IV": place_region4}
_DELIVER = {"I": deliver_region1, "II": deliver_region2, "III": deliver_region3, "IV": deliver_region4}


def place_three(cfg: SystemConfig) -> Placement:
    """Classify and run the matching placement."""
    return _PLACE[classify_region(cfg.m, cfg.N).name](cfg)


def deliver_three(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    return _DELIVER[placement.region.name](placement, d)
