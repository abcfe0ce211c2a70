"""Coded vs uncoded load for three users as the caches grow more unequal.

m_k = alpha * m_{k+1} with m_3 fixed; writes CSV to stdout or --out.
"""

import argparse
import sys

from hetcache.cli import main


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", default="4")
    p.add_argument("--mK", default="0.3")
    p.add_argument("--alpha-range", default="0.3:1.0:0.05")
    p.add_argument("--decimal", action="store_true")
    p.add_argument("--out")
    a = p.parse_args(argv)
    args = ["load-sweep", "--K", "3", "--N", a.N, "--mK", a.mK, "--alpha-range", a.alpha_range]
    args += ["--decimal"] * a.decimal + (["--out", a.out] if a.out else [])
    return main(args)


if __name__ == "__main__":
    sys.exit(run())
