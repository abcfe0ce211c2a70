"""Per-user knowledge tracking and the generic peeling decoder.

A user's knowledge is a set of positionwise masks over subfile labels.
Signals are peeled at symbol granularity: at any payload position where all
but one XOR operand is known, the remaining operand symbol is learned.
Parity families are unlocked once enough members are fully known.

Passing ``library=None`` runs the same logic on masks only, which is what
the server uses to decide whether supplementary unicasts are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .fieldcode import FieldSpec, build_parity_code, recover
from .model import (
    CacheContent,
    FilledCache,
    Layout,
    Library,
    Placement,
    SchemeError,
    SubfileLabel,
    Tag,
    Transmission,
    materialize,
)

__all__ = [
    "DecodeFailure",
    "Knowledge",
    "segment_map",
    "peel_decode",
    "complete_delivery",
    "dedup_raw",
]


class DecodeFailure(SchemeError):
    def __init__(self, user: int, step: str, missing: Sequence[SubfileLabel]):
        self.user = user
        self.step = step
        self.missing = tuple(missing)
        shown = ", ".join(map(str, self.missing[:6]))
        more = "" if len(self.missing) <= 6 else f" (+{len(self.missing) - 6} more)"
        super().__init__(f"user {user} stuck at step {step!r}; missing {shown}{more}")


@lru_cache(maxsize=4096)
def _segments(op_lengths: tuple[tuple[int, ...], ...]):
    """Split equal-length operands into atomic intervals.

    Returns (a, b, pieces) with one (operand item index, offset) per operand;
    item index -1 means the operand is padding-free but empty there (never
    happens for equal-length operands, kept for safety).
    """
    starts = []
    cuts = set()
    for lengths in op_lengths:
        pos, st = 0, []
        for n in lengths:
            st.append(pos)
            pos += n
            cuts.add(pos)
        starts.append(st)
    total = sum(op_lengths[0])
    cuts = sorted(c for c in cuts | {0} if c <= total)
    out = []
    for a, b in zip(cuts, cuts[1:]):
        if a == b:
            continue
        pieces = []
        for lengths, st in zip(op_lengths, starts):
            idx = next(i for i, (s, n) in enumerate(zip(st, lengths)) if s <= a < s + n)
            pieces.append((idx, a - st[idx]))
        out.append((a, b, tuple(pieces)))
    return tuple(out)


def segment_map(tx: Transmission, layout: Layout):
    lengths = tuple(tuple(layout.length[lab.tag] for lab in op) for op in tx.operands)
    return _segments(lengths)


class Knowledge:
    """What one user knows, symbol by symbol.

    Fully known labels live in ``full``; masks are kept only for labels
    learned piecewise.
    """

    def __init__(self, layout: Layout, field: FieldSpec, with_data: bool = True):
        self.layout = layout
        self.field = field
        self.with_data = with_data
        self._length = layout.length
        self.full: dict[SubfileLabel, np.ndarray | None] = {}
        self._partial: dict[SubfileLabel, tuple[np.ndarray, np.ndarray | None]] = {}

    def is_known(self, label: SubfileLabel) -> bool:
        return label in self.full or self._length[label.tag] == 0

    def learn(self, label: SubfileLabel, data: np.ndarray | None, lo: int = 0, hi: int | None = None,
              where: np.ndarray | None = None) -> bool:
        """Record symbols [lo, hi) of a label (optionally only at ``where``)."""
        if label in self.full:
            return False
        n = self._length[label.tag]
        if n == 0:
            self.full[label] = np.zeros(0, dtype=self.field.dtype) if self.with_data else None
            return False
        hi = n if hi is None else hi
        if lo == 0 and hi == n and where is None and label not in self._partial:
            self.full[label] = (None if data is None else np.asarray(data)) if self.with_data else None
            return True
        mask, buf = self._partial.get(label, (None, None))
        if mask is None:
            mask = np.zeros(n, dtype=bool)
            buf = np.zeros(n, dtype=self.field.dtype) if self.with_data else None
            self._partial[label] = (mask, buf)
        new = ~mask[lo:hi] if where is None else (~mask[lo:hi] & where)
        if not new.any():
            return False
        if buf is not None and data is not None:
            buf[lo:hi][new] = np.asarray(data)[new]
        mask[lo:hi] |= new
        if mask.all():
            del self._partial[label]
            self.full[label] = buf
        return True

    def value(self, label: SubfileLabel) -> np.ndarray:
        if self._length[label.tag] == 0:
            return np.zeros(0, dtype=self.field.dtype)
        return self.full[label]

    def _segment_state(self, label: SubfileLabel, lo: int, hi: int):
        """(mask or None, data) for symbols [lo, hi); mask None means fully known."""
        if label in self.full or hi == lo:
            v = self.full.get(label)
            return None, (None if v is None else v[lo:hi])
        part = self._partial.get(label)
        if part is None:
            return np.zeros(hi - lo, dtype=bool), None
        mask, buf = part
        return mask[lo:hi], (None if buf is None else buf[lo:hi])

    def load_cache(self, content: CacheContent, filled: FilledCache | None) -> None:
        for lab in content.uncoded:
            self.learn(lab, None if filled is None else filled.uncoded[lab])

    def missing(self, labels: Iterable[SubfileLabel]) -> list[SubfileLabel]:
        return [lab for lab in labels if not self.is_known(lab)]

    def peel(self, tx: Transmission, payload: np.ndarray | None) -> bool:
        """One pass of positionwise peeling over a signal; True if anything was learned."""
        length = self._length
        if tx.is_raw:
            pos, progress = 0, False
            for lab in tx.operands[0]:
                n = length[lab.tag]
                if n and lab not in self.full:
                    chunk = None if payload is None else payload[pos : pos + n]
                    progress |= self.learn(lab, chunk)
                pos += n
            return progress
        use_data = self.with_data and payload is not None
        progress = False
        for a, b, pieces in segment_map(tx, self.layout):
            labs = [op[i] for op, (i, _) in zip(tx.operands, pieces)]
            states = [self._segment_state(lab, off, off + b - a) for lab, (_, off) in zip(labs, pieces)]
            open_ops = [o for o, (mask, _) in enumerate(states) if mask is not None]
            if not open_ops:
                continue
            if len(open_ops) == 1:
                # everything else is fully known here: read the rest off directly
                o = open_ops[0]
                value = None
                if use_data:
                    value = payload[a:b].copy()
                    for p, (_, data) in enumerate(states):
                        if p != o:
                            value ^= data
                off = pieces[o][1]
                progress |= self.learn(labs[o], value, off, off + b - a)
                continue
            unknown = np.array([~states[o][0] for o in open_ops])
            count = unknown.sum(axis=0)
            single = count == 1
            if not single.any():
                continue
            for row, o in enumerate(open_ops):
                where = single & unknown[row]
                if not where.any():
                    continue
                value = None
                if use_data:
                    value = payload[a:b].copy()
                    for p, (_, data) in enumerate(states):
                        if p != o and data is not None:
                            value ^= data
                off = pieces[o][1]
                progress |= self.learn(labs[o], value, off, off + b - a, where)
        return progress

    def unlock_family(self, tag: Tag, deficiency: int, N: int, parities) -> bool:
        """Recover every member of a coded family once ``deficiency`` are known."""
        members = [SubfileLabel(n, tag) for n in range(N)]
        known = [lab for lab in members if self.is_known(lab)]
        if len(known) == N or len(known) < deficiency:
            return False
        if not self.with_data or parities is None:
            for lab in members:
                if lab not in self.full:
                    self._partial.pop(lab, None)
                    self.full[lab] = None
            return True
        code = build_parity_code(N, deficiency, self.field)
        blocks = recover(code, parities, {lab.file: self.value(lab) for lab in known})
        for lab, blk in zip(members, blocks):
            if lab not in self.full:
                self._partial.pop(lab, None)
                self.full[lab] = blk
        return True


def peel_decode(
    user: int,
    placement: Placement,
    signals: Sequence[Transmission],
    demand: Sequence[int],
    layout: Layout,
    library: Library | None = None,
    filled: FilledCache | None = None,
    payloads: Sequence[np.ndarray] | None = None,
    raise_on_failure: bool = True,
):
    """Fixpoint decoder: alternate signal peeling and family unlocking.

    Returns the reconstructed file (or None in mask-only mode) and the final
    :class:`Knowledge`.
    """
    content = placement.caches[user - 1]
    N = placement.cfg.N
    with_data = library is not None
    kn = Knowledge(layout, placement.cfg.field, with_data)
    kn.load_cache(content, filled)
    if with_data and payloads is None:
        payloads = [materialize(tx, library, layout) for tx in signals]
    target = [SubfileLabel(demand[user - 1], t) for t in placement.plan.tags]

    progress = True
    while progress and kn.missing(target):
        progress = False
        for i, tx in enumerate(signals):
            progress |= kn.peel(tx, payloads[i] if with_data else None)
        for fam in content.coded:
            par = filled.parity[fam.tag].parities if with_data else None
            progress |= kn.unlock_family(fam.tag, fam.deficiency, N, par)

    missing = kn.missing(target)
    if missing:
        if raise_on_failure:
            raise DecodeFailure(user, "peeling fixpoint", missing)
        return None, kn
    if not with_data:
        return None, kn
    return assemble(kn, target, layout), kn


def assemble(kn: Knowledge, target: Sequence[SubfileLabel], layout: Layout) -> np.ndarray:
    out = np.zeros(layout.F, dtype=kn.field.dtype)
    for lab in target:
        out[layout.slice(lab.tag)] = kn.value(lab)
    return out


def dedup_raw(signals: Sequence[Transmission], placement: Placement) -> list[Transmission]:
    """Drop raw subfiles already broadcast verbatim by an earlier signal."""
    seen: set[SubfileLabel] = set()
    out = []
    plan = placement.plan
    for tx in signals:
        if not tx.is_raw:
            out.append(tx)
            continue
        keep = [lab for lab in tx.operands[0] if lab not in seen and plan.size[lab.tag] != 0]
        seen.update(tx.operands[0])
        if len(keep) == len(tx.operands[0]):
            out.append(tx)
        elif keep:
            out.append(Transmission.raw(tx.name, tx.targets, keep, plan))
    return out


@dataclass
class Completion:
    signals: list[Transmission]
    supplements: int = 0
    supplement_size: object = 0
    deduped: bool = False
    notes: list[str] = field(default_factory=list)


def complete_delivery(
    placement: Placement,
    signals: Sequence[Transmission],
    demand: Sequence[int],
    layout: Layout,
    decoder=None,
) -> Completion:
    """Dedup raw payloads and, while some user is stuck, unicast just enough
    extra members of one starved parity family.

    ``decoder(user, signals)`` must return a Knowledge (mask-only is fine)
    or raise DecodeFailure; it defaults to :func:`peel_decode`.
    """
    plan = placement.plan
    N = placement.cfg.N
    base = dedup_raw(signals, placement)
    result = Completion(base, deduped=len(base) != len(signals) or any(
        a is not b for a, b in zip(base, signals)))
    if decoder is None:
        def decoder(user, sigs):
            _, kn = peel_decode(user, placement, sigs, demand, layout, raise_on_failure=False)
            return kn

    sent = set()
    done: set[int] = set()  # adding broadcasts never breaks a decodable user
    for guard in range(4 * N * len(plan.tags) + 8):
        stuck = None
        for content in placement.caches:
            if content.user in done:
                continue
            kn = decoder(content.user, result.signals)
            target = [SubfileLabel(demand[content.user - 1], t) for t in plan.tags]
            if not kn.missing(target):
                done.add(content.user)
                continue
            for fam in content.coded:
                members = [SubfileLabel(n, fam.tag) for n in range(N)]
                have = [lab for lab in members if kn.is_known(lab)]
                if len(have) < fam.deficiency and len(have) < N:
                    extra = [lab for lab in members if not kn.is_known(lab) and lab not in sent]
                    stuck = (content.user, fam, extra[: fam.deficiency - len(have)])
                    break
            if stuck is None:
                raise DecodeFailure(content.user, "completion pass", kn.missing(target))
            break
        if stuck is None:
            return result
        user, fam, extra = stuck
        if not extra:
            raise DecodeFailure(user, "completion pass", [SubfileLabel(n, fam.tag) for n in range(N)])
        sent.update(extra)
        tx = Transmission.raw(f"C_{user}[{fam.tag}]", (user,), extra, plan)
        result.signals = dedup_raw(result.signals + [tx], placement)
        result.supplements += len(extra)
        result.supplement_size += tx.size
        result.notes.append(f"user {user}: +{len(extra)} x W[*,{fam.tag}]")
    raise DecodeFailure(0, "completion pass", [])
