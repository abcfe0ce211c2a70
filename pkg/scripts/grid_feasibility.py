"""Which points of the three-user 1/20 grid admit a valid placement.

For each N, every sorted m is classified, placed and (optionally) simulated
over all distinct demands.  Prints per-region counts and lists the points
where the placement has a negative subfile or overflows a cache.
"""

import argparse
import itertools
from collections import Counter
from fractions import Fraction

from hetcache.model import InfeasiblePlacement, OutOfScheme, SystemConfig
from hetcache.scheme_three import classify_region, place_three
from hetcache.verifier import verify_config


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, nargs="+", default=[4, 5, 8])
    p.add_argument("--step", type=int, default=20)
    p.add_argument("--simulate", action="store_true", help="also run the distinct-demand simulation")
    p.add_argument("--list", action="store_true", help="print every infeasible point")
    a = p.parse_args(argv)

    for N in a.N:
        counts = Counter()
        bad = []
        for c in itertools.combinations_with_replacement(range(a.step + 1), 3):
            m = tuple(Fraction(x, a.step) for x in c)
            region = classify_region(m, N)
            try:
                place_three(SystemConfig.create(3, N, m))
            except OutOfScheme:
                counts[(region.name, "out of scheme")] += 1
                continue
            except InfeasiblePlacement as exc:
                counts[(region.name, type(exc).__name__)] += 1
                bad.append((m, str(region), exc))
                continue
            if a.simulate:
                rep = verify_config(SystemConfig.create(3, N, m), demands="distinct", decode="sample")
                counts[(region.name, "pass" if rep.passed else "FAIL")] += 1
            else:
                counts[(region.name, "feasible")] += 1
        print(f"N={N}")
        for (name, what), n in sorted(counts.items()):
            print(f"  region {name:<3} {what:<20} {n}")
        if a.list:
            for m, region, exc in bad:
                print(f"  {','.join(map(str, m))}  {region}  {exc}")


if __name__ == "__main__":
    main()
