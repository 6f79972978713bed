"""Optimal vs greedy association on the office presets: accuracy and processing time.

    python3 scripts/compare_association.py --seeds 3
"""

import argparse

from _common import mean_of, prepare, score

PRESETS = ("office-1", "office-2", "office-3", "office-4", "office-2-cross", "office-3-cross",
           "office-4-cross")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--presets", nargs="+", default=list(PRESETS))
    args = ap.parse_args()
    print(f"{'preset':<16} {'assoc':<5} {'OMAT':>7} {'Q95':>7} {'eps_c':>7} {'E[T_p]':>8} {'max[T_p]':>9}")
    for preset in args.presets:
        runs = {"gnn": [], "snn": []}
        for seed in range(args.seeds):
            sc, truth, frames, base = prepare(preset, seed)
            for method in runs:
                runs[method].append(score(sc.config.with_tracking(assoc=method), base, frames, truth))
        for method, reps in runs.items():
            print(f"{preset:<16} {method:<5} {mean_of(reps, 'mean_omat'):7.3f} {mean_of(reps, 'q95'):7.3f} "
                  f"{mean_of(reps, 'cardinality_error'):7.4f} {mean_of(reps, 'mean_Tp_ms'):8.2f} "
                  f"{mean_of(reps, 'max_Tp_ms'):9.2f}")


if __name__ == "__main__":
    main()
