"""Star-eigenvalues of the isotropic oscillator and their Laguerre projectors."""

import argparse

from dquant.star_exp import harmonic_spectrum


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dof", type=int, default=1)
    ap.add_argument("--nmax", type=int, default=5)
    args = ap.parse_args()
    spec = harmonic_spectrum(args.dof, args.nmax)
    print(spec)
    for lv in spec.levels:
        print(f"n={lv.n}  E={lv.energy}h  certified={lv.certified}  trace={lv.trace}  projector={lv.projector}")


if __name__ == "__main__":
    main()
