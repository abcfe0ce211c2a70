"""K-user coded placement for small caches, plus the matching uncoded baseline.

Level structure: every file is split into a server-only residue ``phi`` and
pieces W^{(i)}_{n,k} for users k and levels i <= k.  Level 1 has size m_1;
level i >= 2 has size N(m_i - m_{i-1})/(N - i + 1).  User k stores its
level-1 pieces verbatim and, for each level i in 2..k, the N - i + 1 parity
blocks sigma_{i-1} over the N files' level-i pieces.  Users 1..i-1 receive
their own level-i pieces of every user by unicast, which hands user k the
i - 1 outside members it needs to open its level-i parities.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .decoding import DecodeFailure, Knowledge, assemble
from .model import (
    PHI,
    CacheContent,
    CodedFamily,
    FilledCache,
    Layout,
    Library,
    OutOfScheme,
    Placement,
    SubfileLabel,
    SubfilePlan,
    SystemConfig,
    Tag,
    Transmission,
    materialize,
)

__all__ = [
    "BadDimensions",
    "OutOfRegime",
    "small_memory_value",
    "check_small_memory",
    "load_coded_K",
    "load_uncoded_K",
    "level_sizes",
    "place_small_mem",
    "deliver_small_mem",
    "decode_user",
    "place_uncoded_baseline",
    "deliver_uncoded_baseline",
]


class BadDimensions(OutOfScheme, ValueError):
    pass


class OutOfRegime(OutOfScheme):
    pass


def _deltas(m: Sequence[Fraction]) -> list[Fraction]:
    """[m_1, m_2 - m_1, ..., m_K - m_{K-1}] (index i-1 holds level i)."""
    m = [Fraction(x) for x in m]
    return [m[0]] + [b - a for a, b in zip(m, m[1:])]


def small_memory_value(m: Sequence[Fraction], N: int, K: int | None = None) -> Fraction:
    K = len(m) if K is None else K
    if N < K + 1:
        raise BadDimensions(f"the small-memory scheme needs N >= K+1, got N={N}, K={K}")
    d = _deltas(m)
    value = sum((Fraction(x) for x in m), Fraction(0))
    for i in range(2, K + 1):
        value += Fraction((i - 1) * (K - i + 1), N - i + 1) * d[i - 1]
    return value


def check_small_memory(m: Sequence[Fraction], N: int, K: int | None = None) -> bool:
    return small_memory_value(m, N, K) <= 1


def load_uncoded_K(m: Sequence[Fraction], K: int | None = None) -> Fraction:
    K = len(m) if K is None else K
    return K - sum((Fraction(K - i) * Fraction(x) for i, x in enumerate(m)), Fraction(0))


def load_coded_K(m: Sequence[Fraction], N: int, K: int | None = None) -> Fraction:
    K = len(m) if K is None else K
    if not check_small_memory(m, N, K):
        raise OutOfRegime(
            f"m={tuple(map(str, m))} with N={N} is outside the small-memory regime"
            f" (condition value {small_memory_value(m, N, K)} > 1)"
        )
    d = _deltas(m)
    gain = sum(
        (Fraction((i - 1) * (K - i + 1) * (K - i + 2), 2 * (N - i + 1)) * d[i - 1] for i in range(2, K + 1)),
        Fraction(0),
    )
    return load_uncoded_K(m, K) - gain


def level_sizes(cfg: SystemConfig, coded: bool = True) -> list[Fraction]:
    """Size of level i (index i-1) of every user's pieces."""
    d = _deltas(cfg.m)
    if not coded:
        return d
    return [d[0]] + [Fraction(cfg.N, cfg.N - i + 1) * d[i - 1] for i in range(2, cfg.K + 1)]


def _level_plan(cfg: SystemConfig, levels: Sequence[Fraction]) -> SubfilePlan:
    # empty levels are left out entirely (no label, no parity block); phi stays
    sizes = {Tag((k,), i): levels[i - 1] for k in range(1, cfg.K + 1) for i in range(1, k + 1)}
    residue = 1 - sum(sizes.values(), Fraction(0))
    sizes = {t: s for t, s in sizes.items() if s != 0}
    sizes[PHI] = residue
    return SubfilePlan(sizes, cfg.N)


def place_small_mem(cfg: SystemConfig) -> Placement:
    if not check_small_memory(cfg.m, cfg.N, cfg.K):
        load_coded_K(cfg.m, cfg.N, cfg.K)  # raises OutOfRegime with the details
    plan = _level_plan(cfg, level_sizes(cfg, coded=True))
    caches = []
    for k in range(1, cfg.K + 1):
        uncoded = frozenset(SubfileLabel(n, t) for n in range(cfg.N) for t in [Tag((k,), 1)] if t in plan.size)
        coded = tuple(CodedFamily(Tag((k,), i), i - 1) for i in range(2, k + 1) if Tag((k,), i) in plan.size)
        caches.append(CacheContent(k, uncoded, coded))
    placement = Placement(cfg, plan, tuple(caches), "small-memory coded")
    return placement.validate()


def place_uncoded_baseline(cfg: SystemConfig) -> Placement:
    if sum(cfg.m) > 1:
        raise OutOfRegime(f"the uncoded level baseline needs sum(m) <= 1, got {sum(cfg.m)}")
    plan = _level_plan(cfg, level_sizes(cfg, coded=False))
    caches = []
    for k in range(1, cfg.K + 1):
        uncoded = frozenset(
            SubfileLabel(n, Tag((k,), i)) for n in range(cfg.N) for i in range(1, k + 1)
            if Tag((k,), i) in plan.size
        )
        caches.append(CacheContent(k, uncoded))
    return Placement(cfg, plan, tuple(caches), "uncoded baseline").validate()


def _deliver(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    K = placement.cfg.K
    plan = placement.plan

    def pieces(n, tags):
        return [SubfileLabel(n, t) for t in tags if t in plan.size]

    out = []
    for k in range(1, K + 1):
        tags = [Tag((l,), i) for i in range(k + 1, K + 1) for l in range(i, K + 1)] + [PHI]
        out.append(Transmission.raw(f"X_{{{k}}}", (k,), pieces(d[k - 1], tags), plan))
    for k in range(1, K + 1):
        for j in range(k + 1, K + 1):
            left = pieces(d[j - 1], [Tag((k,), i) for i in range(1, k + 1)])
            right = pieces(d[k - 1], [Tag((j,), i) for i in range(1, k + 1)])
            if left or right:
                out.append(Transmission.build(f"X_{{{k},{j}}}", (k, j), [left, right], plan))
    return out


def deliver_small_mem(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    """K unicasts (each carrying the user's phi piece) and K(K-1)/2 pairwise XORs."""
    return _deliver(placement, d)


def deliver_uncoded_baseline(placement: Placement, d: Sequence[int]) -> list[Transmission]:
    return _deliver(placement, d)


def decode_user(
    k: int,
    placement: Placement,
    signals: Sequence[Transmission],
    d: Sequence[int],
    layout: Layout,
    library: Library | None = None,
    filled: FilledCache | None = None,
    payloads: Sequence[np.ndarray] | None = None,
    raise_on_failure: bool = True,
):
    """Reconstruct W_{d_k} at user k in five steps.

    1. read the cached level-1 pieces;
    2. take every verbatim broadcast (unicasts and supplements), which holds
       the other users' level-i pieces of user k's families;
    3. open each level-i parity family with fieldcode's recover;
    4. check that the own higher-level pieces and phi piece arrived;
    5. strip the pairwise XORs with cached or recovered pieces, reopening
       any family the XORs completed.

    Returns ``(file, knowledge)``; ``file`` is None in mask-only mode.
    """
    cfg = placement.cfg
    content = placement.caches[k - 1]
    with_data = library is not None
    if with_data and payloads is None:
        payloads = [materialize(tx, library, layout) for tx in signals]
    kn = Knowledge(layout, cfg.field, with_data)
    want = d[k - 1]
    target = [SubfileLabel(want, t) for t in placement.plan.tags]

    unopened = []

    def fail(step, missing, after_families=True):
        # a family that stayed closed is the root cause of anything missing later
        if unopened and after_families:
            fam, fam_missing = unopened[0]
            step, missing = f"3: open sigma_{fam.deficiency} family {fam.tag}", fam_missing
        if raise_on_failure:
            raise DecodeFailure(k, step, missing)
        return None, kn

    # 1
    kn.load_cache(content, filled)
    # 2 and 4 share the verbatim signals
    for i, tx in enumerate(signals):
        if tx.is_raw:
            kn.peel(tx, payloads[i] if with_data else None)
    # 3
    for fam in content.coded:
        par = filled.parity[fam.tag].parities if with_data else None
        kn.unlock_family(fam.tag, fam.deficiency, cfg.N, par)
        members = [SubfileLabel(n, fam.tag) for n in range(cfg.N)]
        if kn.missing(members):
            # harmless if the target arrives anyway, e.g. under repeated demands
            unopened.append((fam, kn.missing(members)))
    # 4
    own = [SubfileLabel(want, Tag((l,), i)) for i in range(k + 1, cfg.K + 1) for l in range(i, cfg.K + 1)]
    own = [lab for lab in own if lab.tag in placement.plan.size] + [SubfileLabel(want, PHI)]
    if kn.missing(own):
        return fail("4: own unicast pieces", kn.missing(own), after_families=False)
    # 5, revisiting closed families if the multicasts taught us new members
    progress = True
    while progress:
        progress = False
        for i, tx in enumerate(signals):
            if not tx.is_raw and k in tx.targets:
                progress |= kn.peel(tx, payloads[i] if with_data else None)
        still = []
        for fam, _ in unopened:
            par = filled.parity[fam.tag].parities if with_data else None
            if kn.unlock_family(fam.tag, fam.deficiency, cfg.N, par):
                progress = True
            else:
                still.append((fam, kn.missing([SubfileLabel(n, fam.tag) for n in range(cfg.N)])))
        unopened[:] = still
        if not kn.missing(target):
            break
    if kn.missing(target):
        return fail("5: pairwise multicasts", kn.missing(target))
    if not with_data:
        return None, kn
    return assemble(kn, target, layout), kn
