"""Command-line front end: ``load-sweep``, ``verify`` and ``plan``.

Exit codes: 0 success, 1 verification failure, 2 usage error or a request
outside the implemented schemes.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from fractions import Fraction
from typing import Sequence

from .fieldcode import FieldSpec
from .model import ConfigError, OutOfScheme, SchemeError, SystemConfig, load_config, min_F, parse_rational
from .scheme_smallmem import check_small_memory, load_coded_K, load_uncoded_K
from .scheme_three import classify_region, load_coded_3, load_uncoded_3
from .verifier import csv_fields, select_scheme, sweep, verify_config

SEED_ENV = "HETCACHE_SEED"


class UsageError(Exception):
    pass


def parse_range(text: str) -> list[Fraction]:
    """'a:b:s' -> [a, a+s, ...] up to and including b, exactly."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range {text!r} must look like start:stop:step")
    start, stop, step = (parse_rational(p) for p in parts)
    if step <= 0:
        raise UsageError("range step must be positive")
    out, x = [], start
    while x <= stop:
        out.append(x)
        x += step
    return out


def parse_m(text: str) -> tuple[Fraction, ...]:
    return tuple(parse_rational(x) for x in text.split(",") if x.strip())


def alpha_profile(alpha: Fraction, m_top: Fraction, K: int) -> tuple[Fraction, ...]:
    """m_k = alpha * m_{k+1} with m_K fixed."""
    return tuple(m_top * alpha ** (K - k) for k in range(1, K + 1))


def _fmt(x, decimal: bool) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".12g") if decimal else str(Fraction(x))


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or key=value file with K, N, m, seed, r")
    p.add_argument("--K", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--m", help="comma-separated cache sizes, fractions or decimals")
    p.add_argument("--seed", type=int, help=f"library seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--field", type=int, dest="r", choices=(3, 8, 16), help="field exponent r for GF(2^r)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetcache", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("load-sweep", help="tabulate coded vs uncoded loads")
    _common(s)
    s.add_argument("--N-range", help="start:stop:step over the number of files")
    s.add_argument("--alpha", help="heterogeneity ratio, m_k = alpha m_{k+1}")
    s.add_argument("--alpha-range", help="start:stop:step over alpha")
    s.add_argument("--mK", help="largest cache size m_K for the alpha profile")
    s.add_argument("--decimal", action="store_true", help="print 12-significant-digit decimals")
    s.add_argument("--out", help="write CSV here instead of stdout")

    v = sub.add_parser("verify", help="simulate one configuration end to end")
    _common(v)
    v.add_argument("--scheme", default="auto", choices=("auto", "three", "smallmem", "uncoded"))
    v.add_argument("--demands", default="all", choices=("all", "distinct"))
    v.add_argument("--decode", default="all", choices=("all", "sample", "none"))
    v.add_argument("--csv", action="store_true", help="also print a CSV summary row")

    pl = sub.add_parser("plan", help="show the subfile partition and cache contents")
    _common(pl)
    pl.add_argument("--scheme", default="auto", choices=("auto", "three", "smallmem", "uncoded"))
    return parser


def _settings(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    for key in ("K", "N", "seed", "r"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    if getattr(args, "m", None):
        cfg["m"] = parse_m(args.m)
    if "seed" not in cfg:
        env = os.environ.get(SEED_ENV)
        try:
            cfg["seed"] = int(env) if env else 0
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}")
    cfg.setdefault("r", 8)
    return cfg


def _single_config(args) -> tuple[SystemConfig, int]:
    s = _settings(args)
    missing = [k for k in ("K", "N", "m") if k not in s]
    if missing:
        raise UsageError(f"missing {', '.join(missing)} (give flags or --config)")
    return SystemConfig(s["K"], s["N"], s["m"], FieldSpec(s["r"])), s["seed"]


def cmd_load_sweep(args, out) -> int:
    s = _settings(args)
    if "K" not in s:
        raise UsageError("--K is required")
    K = s["K"]
    explicit = "m" in s
    by_alpha = args.alpha is not None or args.alpha_range is not None
    if explicit == by_alpha:
        raise UsageError("give exactly one of --m or the alpha profile (--alpha/--alpha-range with --mK)")
    if by_alpha and args.mK is None:
        raise UsageError("--mK is required with --alpha/--alpha-range")
    if args.alpha is not None and args.alpha_range is not None:
        raise UsageError("--alpha and --alpha-range are exclusive")
    if args.N_range and "N" in s and args.N is not None:
        raise UsageError("--N and --N-range are exclusive")
    if args.alpha_range and args.N_range:
        raise UsageError("sweep one parameter at a time")
    Ns = [int(x) for x in parse_range(args.N_range)] if args.N_range else None
    if Ns is None and "N" not in s:
        raise UsageError("--N or --N-range is required")

    points = []
    if args.alpha_range:
        m_top = parse_rational(args.mK)
        for a in parse_range(args.alpha_range):
            points.append((_fmt(a, args.decimal), alpha_profile(a, m_top, K), s["N"]))
    else:
        m = s["m"] if explicit else alpha_profile(parse_rational(args.alpha), parse_rational(args.mK), K)
        for N in Ns if Ns is not None else [s["N"]]:
            points.append((str(N), m, N))

    configs = []
    for param, m, N in points:
        try:
            configs.append((param, SystemConfig(K, N, m, FieldSpec(s["r"]))))
        except ConfigError as exc:
            raise UsageError(f"{param}: {exc}")
    rows = sweep(configs)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_fields(K))
    for row in rows:
        writer.writerow(
            [row.param]
            + [_fmt(x, args.decimal) for x in row.m]
            + [row.region, _fmt(row.R_coded, args.decimal), _fmt(row.R_uncoded, args.decimal), _fmt(row.gap, args.decimal)]
        )
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def cmd_verify(args, out) -> int:
    cfg, seed = _single_config(args)
    report = verify_config(cfg, args.scheme, demands=args.demands, seed=seed, decode=args.decode)
    out.write(report.summary() + "\n")
    if args.csv:
        row = report.csv_row()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=csv_fields(cfg.K, with_pass=True), lineterminator="\n")
        w.writeheader()
        w.writerow(row)
        out.write(buf.getvalue())
    return 0 if report.passed else 1


def cmd_plan(args, out) -> int:
    cfg, _ = _single_config(args)
    chosen = select_scheme(cfg, args.scheme)
    placement = chosen.place(cfg)
    plan = placement.plan
    lines = [f"K={cfg.K} N={cfg.N} m=({','.join(map(str, cfg.m))}) scheme={chosen.name}"]
    if placement.region is not None:
        lines.append(f"region: {placement.region}")
    elif chosen.name == "smallmem":
        lines.append("regime: small-memory")
    if cfg.K == 3:
        lines.append(f"R_coded={load_coded_3(cfg.m, cfg.N)} R_uncoded={load_uncoded_3(cfg.m)}")
    elif check_small_memory(cfg.m, cfg.N, cfg.K):
        lines.append(f"R_coded={load_coded_K(cfg.m, cfg.N, cfg.K)} R_uncoded={load_uncoded_K(cfg.m, cfg.K)}")
    lines.append(f"subfiles per file: {len(plan.tags)}")
    for t in plan.tags:
        lines.append(f"  W[n,{t}]  {plan.size[t]}")
    for c, slack in zip(placement.caches, placement.budget_slack()):
        lines.append(f"user {c.user}: {c.describe()}  size={c.size(plan)} budget={cfg.budget(c.user)} slack={slack}")
    lines.append(f"min_F={min_F(plan)}")
    out.write("\n".join(lines) + "\n")
    return 0


COMMANDS = {"load-sweep": cmd_load_sweep, "verify": cmd_verify, "plan": cmd_plan}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except OutOfScheme as exc:
        print(f"out of scheme: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemeError as exc:
        print(f"scheme failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
