"""Build Fedosov star-products on a flat and a curved chart and compare with Moyal.

    python scripts/fedosov_vs_moyal.py --dmax 8
"""

import argparse

from dquant.algebra_core import Poly
from dquant.deformation import associativity_defect
from dquant.fedosov import SymplecticData, fedosov_product, solve_r
from dquant.moyal import FlatSymplectic, moyal_product


def curved():
    names = ("q", "p")
    z = Poly(names)
    # Gamma^p_{qq} = p: torsion free, preserves dq^dp, and is not flat
    return SymplecticData(names, [[0, 1], [-1, 0]], [[[z, z], [z, z]], [[Poly.var(names, 1), z], [z, z]]])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dmax", type=int, default=8)
    args = ap.parse_args()
    order = args.dmax // 2

    for dof in (1, 2):
        fc = solve_r(SymplecticData.flat(dof), args.dmax)
        F = fedosov_product(fc, order)
        M = moyal_product(FlatSymplectic(dof), order)
        same = [F.cochains[r] == M.cochains[r] for r in range(order + 1)]
        print(f"flat, dof={dof}: cochains equal to Moyal {same}")

    fc = solve_r(curved(), args.dmax)
    print("\ncurved chart")
    print("  r (lowest degree):", fc.r.degree_part(3))
    print("  curvature R:", fc.R)
    S = fedosov_product(fc, order)
    M = moyal_product(FlatSymplectic(1), order)
    for r in range(1, order + 1):
        print(f"  C{r} == Moyal: {S.cochains[r] == M.cochains[r]}   defect zero: {associativity_defect(S, r).is_zero()}")
    print("  C2 =", S.cochains[2])


if __name__ == "__main__":
    main()
