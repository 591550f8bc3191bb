"""A tour of the matrix-sequence toolkit around well-placedness.

Checks the shipped well-placed family, rescales it without losing the
property, aligns the first columns of two differently grown families,
reconstructs the automorphism identifying a twisted copy of a diagonal
prefix, and splits a prefix by dominant column.
"""

from __future__ import annotations

import argparse

import numpy as np

from tamelab import families
from tamelab.core import DiscreteSequence, sln
from tamelab.sln_tame import (
    RescaleTable,
    align_first_columns,
    equivalence_automorphism,
    lambda_rescale,
    torus_embed,
    union_decompose,
    well_placed_check,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("== the shipped family ==")
    wp = families.wellplaced2(count=16)
    verdict, report = well_placed_check(wp)
    print(f"well-placed check: {verdict.state} ({verdict.detail})")

    print()
    print("== rescaling keeps the property ==")
    mags = np.cumprod(np.full(16, 1.25))
    table = RescaleTable(np.stack([mags, 1.0 / mags], axis=1))
    rescaled = lambda_rescale(wp, table, check_conditions=True)
    verdict2, _ = well_placed_check(rescaled)
    print(f"after 16 balanced row rescalings: {verdict2.state}")

    print()
    print("== aligning two growth profiles ==")
    other = families.wellplaced2(count=16, exponent=1)
    a2, b2, record, rep = align_first_columns(wp, other)
    print(f"first columns now agree within {rep.first_column_mismatch:.3g}")
    print(
        "constraint groups: unit caps %s, ratio caps %s, matching %s, "
        "products %s, dominance %s"
        % (
            rep.unit_caps_ok,
            rep.ratio_caps_ok,
            rep.matching_ok,
            rep.products_ok,
            rep.dominance_ok,
        )
    )

    print()
    print("== recovering a hidden twist ==")
    cs = [np.diag([float(k), 1.0 / k]).astype(complex) for k in range(1, 13)]
    ds = [c @ np.array([[1.0, float(k)], [0.0, 1.0]]) for k, c in enumerate(cs, 1)]
    c_seq = DiscreteSequence(sln(2), tuple(cs))
    d_seq = DiscreteSequence(sln(2), tuple(ds))
    phi = equivalence_automorphism(c_seq, d_seq, seed=args.seed)
    worst = max(float(np.max(np.abs(phi.apply(d) - c))) for c, d in zip(cs, ds))
    print(f"fiberwise map sends each twisted matrix home within {worst:.3g}")

    print()
    print("== dominant-column split and torus flattening ==")
    parts = union_decompose(wp)
    sizes = [len(p) for p in parts]
    print(f"parts by dominant column: {sizes} (sum {sum(sizes)})")
    diag = families.diagtorus(count=6)
    images, tverdict = torus_embed(diag.points)
    prods = max(abs(complex(np.prod(img)) - 1.0) for img in images)
    print(
        f"diagonal prefix flattens onto the product-one surface "
        f"(worst product error {prods:.3g}, {tverdict.state})"
    )


if __name__ == "__main__":
    main()
