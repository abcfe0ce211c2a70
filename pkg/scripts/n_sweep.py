"""Gain of coded placement as the library grows, K=10, m_k = 0.7 m_{k+1}."""

import argparse
import sys

from hetcache.cli import main


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--K", default="10")
    p.add_argument("--alpha", default="0.7")
    p.add_argument("--mK", default="0.1")
    p.add_argument("--N-range", default="11:201:10")
    p.add_argument("--decimal", action="store_true")
    p.add_argument("--out")
    a = p.parse_args(argv)
    args = ["load-sweep", "--K", a.K, "--alpha", a.alpha, "--mK", a.mK, "--N-range", a.N_range]
    args += ["--decimal"] * a.decimal + (["--out", a.out] if a.out else [])
    return main(args)


if __name__ == "__main__":
    sys.exit(run())
