"""How far apart two static targets must be before they image as two clusters.

Places two noiseless targets at increasing separation in the middle of a
preset's area and reports how many clusters the detector forms at the
empty-area threshold and at the tracking threshold.

    python3 scripts/resolvability.py --preset office-4-cross
"""

import argparse
import numpy as np
from _common import CACHE

from rtitrack.detection import hac_cluster, mask_image
from rtitrack.imaging import RssChangeEstimator, estimate_image, gaussian_denoise
from rtitrack.pipeline import Pipeline
from rtitrack.simulator import Simulation, scripted_paths


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="office-4-cross")
    ap.add_argument("--tc", type=float, nargs="+", default=[0.75, 1.0, 1.25, 1.5])
    args = ap.parse_args()
    sc = scripted_paths(args.preset)
    sim = Simulation(sc)
    cfg = sc.config
    pipe = Pipeline.build(cfg, list(sim.calibration_frames()), cache_dir=CACHE)
    grid, im, tr = cfg.grid(), cfg.imaging, cfg.tracking
    x0, y0, x1, y1 = cfg.bounds
    mid = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    print("sep [m]  peak   " + "  ".join(f"T_c={tc}" for tc in args.tc))
    for sep in np.arange(0.4, 3.01, 0.2):
        a, b = mid - [sep / 2, 0], mid + [sep / 2, 0]
        frame = sim.static_frame([a, b])
        est = RssChangeEstimator(pipe.profile.mean_rss, pipe.profile.fade, im.hold_frames)
        den = gaussian_denoise(estimate_image(pipe.projection, est(frame)), grid, im.sigma_g, im.kernel_radius)
        peak = den.intensities.max()
        counts = []
        for tc in args.tc:
            _, vox = mask_image(den, tr.beta * peak)
            counts.append(len(hac_cluster(vox, grid.centers[vox], tc)))
        print(f"{sep:7.1f}  {peak:.3f}  " + "  ".join(f"{c:>7}" for c in counts))


if __name__ == "__main__":
    main()
