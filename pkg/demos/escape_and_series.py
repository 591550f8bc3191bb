"""Flat-space tameness in action: summability certificates and shear escapes.

Generates a power-growth sequence in C^2, certifies its inverse-norm series
with an integral tail bound, pushes a geometric prefix past prescribed
heights with fiber shears, and shows why no single map can outrun the
height demands near a puncture.
"""

from __future__ import annotations

import argparse

import numpy as np

from tamelab import families
from tamelab.cn_tame import MONOTONE_TAIL_BOUND, push_prefix_cn, rr_series_test
from tamelab.core import HeightAssignment, ScalarAut
from tamelab.punctured_cn import no_threshold_witness


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("== series certificate ==")
    d = families.cn_powers(n=2, alpha=1.0, count=5000)
    rep = rr_series_test(d, tail_policy=MONOTONE_TAIL_BOUND)
    print(f"prefix of {len(d)} points, norms growing like k")
    print(f"partial sum of 1/|v_k|^3: {rep.partial_sum:.9f}")
    print(f"integral tail bound:      {rep.tail_bound:.3g}")
    print(f"verdict: {rep.verdict.state} ({rep.verdict.reason})")

    print()
    print("== shear escape ==")
    base = families.cn_powers(n=2, alpha=0.5, count=12)
    demands = HeightAssignment.constant(50.0, len(base))
    aut, proof = push_prefix_cn(base, demands, seed=args.seed)
    before = [float(np.linalg.norm(p)) for p in base.points]
    after = [float(np.linalg.norm(aut.apply(p))) for p in base.points]
    print("demanded height 50 for every point; norms before -> after:")
    for k, (x, y) in enumerate(zip(before, after), 1):
        print(f"  point {k:2d}: {x:8.3f} -> {y:9.3f}")
    print(f"one composite of {len(proof)} shears raises the whole prefix")

    print()
    print("== puncture obstruction ==")
    gamma = families.punctured_accumulate(n=2, count=40)
    witness = no_threshold_witness(gamma, ScalarAut(10.0), seed=args.seed)
    k = witness.first_failure_index
    print(
        "against heights (k+1)/|gamma_k|, a tenfold dilation already "
        f"undershoots at index {k}:"
    )
    print(f"  demanded {witness.zeta[k - 1]:.3f}, achieved {witness.tau_values[k - 1]:.3f}")
    print("no fixed map wins this race; the punctured space has no threshold")


if __name__ == "__main__":
    main()
