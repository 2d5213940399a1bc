"""Tabulate every condition verdict over the bundled corpus.

    python3 scripts/condition_survey.py [--grid 512]
"""

import argparse

from wavedecay import conditions as cond
from wavedecay import corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=512, help="theta and unit-sphere grid size")
    args = ap.parse_args()
    cols = ("null_quadratic", "null_cubic", "positive_definite", "agemi", "strict")
    print(f"{'spec':24s}" + "".join(f"{c:>18s}" for c in cols) + f"{'C0':>12s}")
    for name, (spec, weight) in corpus.corpus().items():
        rep = cond.check_all(spec, weight, args.grid, args.grid)
        c0 = rep.get("C0")
        row = "".join(f"{rep[c]['verdict']:>18s}" for c in cols)
        print(f"{name:24s}{row}{'' if c0 is None else f'{c0:12.4g}':>12s}")


if __name__ == "__main__":
    main()
