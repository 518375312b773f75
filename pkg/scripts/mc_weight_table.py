"""Monte-Carlo weights of the order-2 Kontsevich graphs, combined per class.

    python scripts/mc_weight_table.py --samples 1000000 --seed 42
"""

import argparse
import time

from dquant.kontsevich import C2_COEFFS, combine_order2, enumerate_star_graphs, exact_weight, order2_classification, weight_estimate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cls = order2_classification()
    est = {}
    t0 = time.perf_counter()
    print(f"{'graph':40s} {'class':5s} {'exact':>9s} {'estimate':>10s} {'stderr':>8s}")
    for g in enumerate_star_graphs(2):
        e = weight_estimate(g, args.samples, args.seed, workers=args.workers)
        est[g.edges] = (e.mean, e.std_error)
        name, _ = cls[g.edges]
        print(f"{str(g):40s} {name:5s} {float(exact_weight(g)):9.5f} {e.mean:10.5f} {e.std_error:8.5f}")
    print()
    for name, (m, s) in sorted(combine_order2(est).items()):
        target = float(C2_COEFFS.get(name, 0))
        print(f"{name:4s} {m:9.5f} +/- {s:.5f}   target {target:+.5f}")
    print(f"\n{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
