"""End-to-end verification: place once, serve demands, decode, and compare
the measured load with the closed-form load exactly."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .decoding import DecodeFailure, complete_delivery, peel_decode
from .model import (
    InfeasiblePlacement,
    OutOfScheme,
    Placement,
    SchemeError,
    SystemConfig,
    fill_cache,
    make_library,
    materialize,
    min_F,
)
from .scheme_smallmem import (
    check_small_memory,
    decode_user,
    deliver_small_mem,
    deliver_uncoded_baseline,
    load_coded_K,
    load_uncoded_K,
    place_small_mem,
    place_uncoded_baseline,
)
from .scheme_three import classify_region, deliver_three, load_coded_3, load_uncoded_3, place_three

__all__ = [
    "SCHEMES",
    "EXHAUSTIVE_LIMIT",
    "SAMPLE_SIZE",
    "VerificationReport",
    "csv_fields",
    "demand_vectors",
    "select_scheme",
    "verify_config",
    "SweepRow",
    "sweep",
]

SCHEMES = ("auto", "three", "smallmem", "uncoded")
EXHAUSTIVE_LIMIT = 10**5
SAMPLE_SIZE = 10**4


@dataclass(frozen=True)
class _Scheme:
    name: str
    place: Callable[[SystemConfig], Placement]
    deliver: Callable
    formula: Callable[[SystemConfig], Fraction]
    scripted_decoder: bool


def select_scheme(cfg: SystemConfig, scheme: str = "auto") -> _Scheme:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme == "auto":
        scheme = "three" if cfg.K == 3 else "smallmem"
    if scheme == "three":
        if cfg.K != 3:
            raise OutOfScheme(f"the three-user scheme needs K=3, got K={cfg.K}")
        region = classify_region(cfg.m, cfg.N)
        return _Scheme("three", place_three, deliver_three, lambda c: load_coded_3(c.m, c.N), region.name == "I")
    if scheme == "smallmem":
        load_coded_K(cfg.m, cfg.N, cfg.K)  # raises OutOfRegime / BadDimensions
        return _Scheme("smallmem", place_small_mem, deliver_small_mem, lambda c: load_coded_K(c.m, c.N, c.K), True)
    return _Scheme("uncoded", place_uncoded_baseline, deliver_uncoded_baseline, lambda c: load_uncoded_K(c.m, c.K), True)


def uncoded_formula(cfg: SystemConfig) -> Fraction:
    return load_uncoded_3(cfg.m) if cfg.K == 3 else load_uncoded_K(cfg.m, cfg.K)


def demand_vectors(N: int, K: int, policy: str = "all", seed: int = 0) -> list[tuple[int, ...]]:
    """Demand vectors in lexicographic order.

    ``distinct``: every vector with K different files.  ``all``: every
    vector if N^K <= EXHAUSTIVE_LIMIT, else a seeded sample of SAMPLE_SIZE
    plus the all-equal vectors and the first all-distinct one.
    """
    if policy == "distinct":
        return list(itertools.permutations(range(N), K))
    if policy not in ("all", "auto"):
        raise ValueError(f"unknown demand policy {policy!r}")
    if N**K <= EXHAUSTIVE_LIMIT:
        return list(itertools.product(range(N), repeat=K))
    rng = np.random.default_rng(seed)
    picked = {tuple(int(x) for x in row) for row in rng.integers(0, N, size=(SAMPLE_SIZE, K))}
    picked.update((n,) * K for n in range(N))
    if N >= K:
        picked.add(tuple(range(K)))
    return sorted(picked)


@dataclass
class VerificationReport:
    K: int
    N: int
    m: tuple[Fraction, ...]
    scheme: str
    region: str = ""
    formula_coded: Fraction | None = None
    formula_uncoded: Fraction | None = None
    F: int = 0
    partition_ok: bool = False
    budget_ok: list[bool] = field(default_factory=list)
    budget_slack: list[Fraction] = field(default_factory=list)
    demands_checked: int = 0
    demands_decoded: int = 0
    distinct_loads: set = field(default_factory=set)
    max_load: Fraction | None = None
    load_violations: list[tuple] = field(default_factory=list)
    length_mismatches: list[str] = field(default_factory=list)
    decode_failures: list[tuple] = field(default_factory=list)
    completion_demands: int = 0
    completion_subfiles: int = 0
    error: str | None = None

    @property
    def distinct_load_ok(self) -> bool:
        return self.distinct_loads <= {self.formula_coded}

    @property
    def passed(self) -> bool:
        return (
            self.error is None
            and self.partition_ok
            and all(self.budget_ok)
            and self.distinct_load_ok
            and not self.load_violations
            and not self.length_mismatches
            and not self.decode_failures
            and self.demands_checked > 0
        )

    @property
    def measured_distinct_load(self) -> Fraction | None:
        return next(iter(self.distinct_loads)) if len(self.distinct_loads) == 1 else None

    def summary(self) -> str:
        m = ",".join(map(str, self.m))
        lines = [f"K={self.K} N={self.N} m=({m}) scheme={self.scheme} region={self.region or '-'}"]
        if self.error:
            lines.append(f"error: {self.error}")
        lines.append(f"formula R_coded={self.formula_coded} R_uncoded={self.formula_uncoded}")
        if self.F:
            lines.append(f"F={self.F} partition={'ok' if self.partition_ok else 'FAIL'} "
                         f"budget slack=[{', '.join(map(str, self.budget_slack))}] "
                         f"budgets={'ok' if all(self.budget_ok) else 'FAIL'}")
            lines.append(f"demands={self.demands_checked} decoded={self.demands_decoded} "
                         f"decode failures={len(self.decode_failures)}")
            shown = ", ".join(sorted(map(str, self.distinct_loads))) or "-"
            lines.append(f"distinct-demand loads: {shown} (formula match: {'yes' if self.distinct_load_ok else 'NO'})")
            lines.append(f"worst load over checked demands={self.max_load} "
                         f"completion: {self.completion_demands} demands, {self.completion_subfiles} extra subfiles")
            for item in self.decode_failures[:5]:
                lines.append(f"  decode failure d={item[0]}: {item[1]}")
            for item in self.load_violations[:5]:
                lines.append(f"  load above formula d={item[0]}: {item[1]}")
        r = self.measured_distinct_load
        r = r if r is not None else self.max_load
        lines.append(f"R={r if r is not None else 'n/a'}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)

    def csv_row(self, param: str = "") -> dict[str, str]:
        row = {"param": param}
        for i in range(self.K):
            row[f"m{i + 1}"] = str(self.m[i]) if i < len(self.m) else ""
        gap = None
        if self.formula_coded is not None and self.formula_uncoded is not None:
            gap = self.formula_uncoded - self.formula_coded
        row.update(region=self.region, R_coded=_s(self.formula_coded), R_uncoded=_s(self.formula_uncoded),
                   gap=_s(gap), passed="pass" if self.passed else "fail")
        return row


def csv_fields(K: int, with_pass: bool = False) -> list[str]:
    cols = ["param"] + [f"m{i}" for i in range(1, K + 1)] + ["region", "R_coded", "R_uncoded", "gap"]
    return cols + ["passed"] if with_pass else cols


def _s(x) -> str:
    return "" if x is None else str(x)


def _region_label(cfg: SystemConfig, scheme: str, placement: Placement | None = None) -> str:
    if placement is not None and placement.region is not None:
        return str(placement.region)
    if scheme == "three":
        return str(classify_region(cfg.m, cfg.N))
    return "small-memory" if scheme == "smallmem" else "uncoded"


def verify_config(
    cfg: SystemConfig,
    scheme: str = "auto",
    demands: str | Iterable[Sequence[int]] = "all",
    seed: int = 0,
    decode: str = "all",
    decode_sample: int = 4,
) -> VerificationReport:
    """Run one configuration end to end.

    ``decode`` is ``all`` (bit-exact decoding at every user for every
    demand), ``sample`` (every demand is materialized and its load checked,
    but only ``decode_sample`` evenly spread demands are decoded) or
    ``none``.  Scheme errors are recorded in the report, not raised, except
    out-of-scheme requests, which propagate.
    """
    report = VerificationReport(cfg.K, cfg.N, cfg.m, scheme)
    chosen = select_scheme(cfg, scheme)
    report.scheme = chosen.name
    report.formula_uncoded = uncoded_formula(cfg) if chosen.name != "uncoded" else load_uncoded_K(cfg.m, cfg.K)
    report.formula_coded = chosen.formula(cfg)
    try:
        placement = chosen.place(cfg)
    except InfeasiblePlacement as exc:
        report.region = _region_label(cfg, chosen.name)
        report.error = f"{type(exc).__name__}: {exc}"
        return report
    report.region = _region_label(cfg, chosen.name, placement)
    plan = placement.plan
    report.partition_ok = placement.check_partition() and not plan.negative_tags()
    report.budget_slack = placement.budget_slack()
    report.budget_ok = [
        s >= 0 and (s == 0 or not c.fills_budget) for s, c in zip(report.budget_slack, placement.caches)
    ]

    F = min_F(plan)
    report.F = F
    layout = plan.layout(F)
    library = make_library(cfg, F, seed)
    filled = [fill_cache(c, library, layout, cfg.field) for c in placement.caches]
    for c, f in zip(placement.caches, filled):
        if Fraction(f.symbol_count(), F) != c.size(plan):
            report.length_mismatches.append(f"cache of user {c.user} holds {f.symbol_count()} symbols")

    vectors = demand_vectors(cfg.N, cfg.K, demands, seed) if isinstance(demands, str) else [tuple(d) for d in demands]
    if decode == "all":
        to_decode = set(range(len(vectors)))
    elif decode == "sample":
        n = len(vectors)
        to_decode = {round(i * (n - 1) / max(decode_sample - 1, 1)) for i in range(min(decode_sample, n))}
    elif decode == "none":
        to_decode = set()
    else:
        raise ValueError(f"unknown decode policy {decode!r}")

    def scripted(d):
        return lambda user, sigs: decode_user(user, placement, sigs, d, layout, raise_on_failure=False)[1]

    formula = report.formula_coded
    worst = None
    for idx, d in enumerate(vectors):
        signals = chosen.deliver(placement, d)
        if len(set(d)) < len(d):
            try:
                comp = complete_delivery(placement, signals, d, layout,
                                         scripted(d) if chosen.scripted_decoder else None)
            except DecodeFailure as exc:
                report.decode_failures.append((d, f"completion: {exc}"))
                continue
            signals = comp.signals
            if comp.supplements:
                report.completion_demands += 1
                report.completion_subfiles += comp.supplements
        payloads = [materialize(tx, library, layout) for tx in signals]
        for tx, p in zip(signals, payloads):
            if len(p) != tx.size * F:
                report.length_mismatches.append(f"{tx.name} at d={d}: {len(p)} != {tx.size * F}")
        load = Fraction(sum(len(p) for p in payloads), F)
        report.demands_checked += 1
        worst = load if worst is None or load > worst else worst
        if len(set(d)) == len(d):
            report.distinct_loads.add(load)
        elif load > formula:
            report.load_violations.append((d, load))
        if idx not in to_decode:
            continue
        ok = True
        for k in range(1, cfg.K + 1):
            try:
                if chosen.scripted_decoder:
                    out, _ = decode_user(k, placement, signals, d, layout, library, filled[k - 1], payloads)
                else:
                    out, _ = peel_decode(k, placement, signals, d, layout, library, filled[k - 1], payloads)
            except (DecodeFailure, SchemeError) as exc:
                report.decode_failures.append((d, str(exc)))
                ok = False
                continue
            if not np.array_equal(out, library.files[d[k - 1]]):
                report.decode_failures.append((d, f"user {k} reconstructed a wrong file"))
                ok = False
        report.demands_decoded += ok
    report.max_load = worst
    return report


@dataclass(frozen=True)
class SweepRow:
    param: str
    m: tuple[Fraction, ...]
    region: str
    R_coded: Fraction | None
    R_uncoded: Fraction | None
    passed: bool | None = None
    error: str | None = None

    @property
    def gap(self) -> Fraction | None:
        if self.R_coded is None or self.R_uncoded is None:
            return None
        return self.R_uncoded - self.R_coded


def _formula_row(param: str, cfg: SystemConfig) -> SweepRow:
    if cfg.K == 3:
        region = classify_region(cfg.m, cfg.N)
        return SweepRow(param, cfg.m, str(region), load_coded_3(cfg.m, cfg.N), load_uncoded_3(cfg.m))
    unc = load_uncoded_K(cfg.m, cfg.K) if sum(cfg.m) <= 1 else None
    if cfg.N < cfg.K + 1 or not check_small_memory(cfg.m, cfg.N, cfg.K):
        return SweepRow(param, cfg.m, "out-of-regime", None, unc, error="outside the small-memory regime")
    return SweepRow(param, cfg.m, "small-memory", load_coded_K(cfg.m, cfg.N, cfg.K), unc)


def sweep(
    points: Iterable[tuple[str, SystemConfig]],
    scheme: str = "auto",
    verify: bool = False,
    **verify_kwargs,
) -> list[SweepRow]:
    """Formula rows for each (label, config), in the given order.

    With ``verify=True`` each point is also simulated; errors at a point are
    recorded in its row and the sweep moves on.
    """
    rows = []
    for param, cfg in points:
        try:
            row = _formula_row(param, cfg)
        except SchemeError as exc:
            rows.append(SweepRow(param, cfg.m, "error", None, None, error=str(exc)))
            continue
        if verify and row.R_coded is not None:
            try:
                rep = verify_config(cfg, scheme, **verify_kwargs)
                row = SweepRow(row.param, row.m, row.region, row.R_coded, row.R_uncoded, rep.passed, rep.error)
            except SchemeError as exc:
                row = SweepRow(row.param, row.m, row.region, row.R_coded, row.R_uncoded, None, str(exc))
        rows.append(row)
    return rows
