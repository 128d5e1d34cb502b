"""Profile sweep over the field strength; writes one CSV row per field."""
import argparse
import time

import numpy as np

from skyrmion_lab.energy import radial_energy
from skyrmion_lab.io import write_csv
from skyrmion_lab.profile import solve_profile, verify_profile


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fields", type=float, nargs="+", default=[2, 4, 10, 20, 50, 100, 200])
    ap.add_argument("--output", default="h_sweep.csv")
    args = ap.parse_args(argv)
    rows = {k: [] for k in ("h", "s", "s_over_half_h", "tail_rate", "energy", "core_radius",
                            "h_margin", "seconds")}
    for h in args.fields:
        t0 = time.perf_counter()
        p = solve_profile(h)
        secs = time.perf_counter() - t0
        d = verify_profile(p)
        vals = (h, p.slope, p.slope / (h / 2), p.tail_rate, radial_energy(p), p.core_radius,
                d.h_margin, secs)
        for k, x in zip(rows, vals):
            rows[k].append(x)
        print(" ".join(f"{k}={x:.6g}" for k, x in zip(rows, vals)))
    write_csv(args.output, {k: np.asarray(v) for k, v in rows.items()}, "h_sweep")


if __name__ == "__main__":
    main()
