#!/usr/bin/env python3
"""Empirical sweep of the one-step contraction ratio.

The corrector guarantees defect(one_step(rho)) <= 17 r^2; whether 17 is
tight is open.  This sweep measures the observed ratio defect/r^2 across
groups, dimensions and perturbation sizes and writes a CSV, so the margin
can be tracked without the test suite asserting anything sharper than the
proven constant.

Usage: onestep_ratio_sweep.py [--trials N] [--out FILE] [--seed S]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from equifix.groups import make_group
from equifix.repcorrect import ApproxRep, one_step
from equifix.scenarios import exact_rep_values, perturb_rep_values, trial_rng

SPECS = [("cyclic", 2), ("cyclic", 3), ("cyclic", 4), ("cyclic", 5),
         ("cyclic", 6), ("symmetric", 3), ("dihedral", 4)]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("onestep_ratios.csv"))
    args = ap.parse_args(argv)

    rows = ["group,dim,r,one_step_defect,ratio"]
    worst = 0.0
    for i in range(args.trials):
        rng = trial_rng(args.seed, i)
        kind, params = SPECS[i % len(SPECS)]
        group = make_group(kind, params)
        dim = 2 + (i % 7)
        mag = float(np.exp(rng.uniform(np.log(5e-4), np.log(0.02))))
        vals = exact_rep_values({"kind": kind, "params": params}, group, dim, rng)
        vals = perturb_rep_values(vals, mag, rng)
        rep = ApproxRep(group, vals)
        r = rep.defect()
        if r < 1e-8 or r > 0.2:
            continue
        d = one_step(rep).defect()
        ratio = d / r ** 2
        worst = max(worst, ratio)
        rows.append(f"{group.name},{dim},{r!r},{d!r},{ratio!r}")
    args.out.write_text("\n".join(rows) + "\n")
    print(f"{len(rows) - 1} measurements -> {args.out}")
    print(f"worst observed defect/r^2 = {worst:.4f} (proven bound: 17)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
