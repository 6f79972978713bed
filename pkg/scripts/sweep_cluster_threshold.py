"""Sweep the clustering distance threshold on a preset; accuracy and per-frame time per value.

    python3 scripts/sweep_cluster_threshold.py --preset office-4-cross --seeds 5
"""

import argparse

from _common import mean_of, prepare, score


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="office-4-cross")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--values", type=float, nargs="+", default=[0.75, 1.0, 1.25, 1.5, 1.75])
    args = ap.parse_args()
    reports = {tc: [] for tc in args.values}
    for seed in range(args.seeds):
        sc, truth, frames, base = prepare(args.preset, seed)
        for tc in args.values:
            reports[tc].append(score(sc.config.with_tracking(cluster_threshold=tc), base, frames, truth))
        print(f"seed {seed} done")
    print(f"\n{'T_c [m]':>8} {'OMAT':>7} {'Q95':>7} {'eps_c':>7} {'E[T_p]':>8} {'max[T_p]':>9}")
    for tc, reps in reports.items():
        print(f"{tc:>8.2f} {mean_of(reps, 'mean_omat'):7.3f} {mean_of(reps, 'q95'):7.3f} "
              f"{mean_of(reps, 'cardinality_error'):7.4f} {mean_of(reps, 'mean_Tp_ms'):8.2f} "
              f"{mean_of(reps, 'max_Tp_ms'):9.2f}")


if __name__ == "__main__":
    main()
