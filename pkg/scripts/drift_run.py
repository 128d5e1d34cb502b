"""Current-driven drift of one skyrmion compared with the Thiele prediction."""
import argparse
import time

from skyrmion_lab.dynamics import signed_angle, simulate, solve_thiele, stable_dt
from skyrmion_lab.energy import rasterize
from skyrmion_lab.io import write_csv
from skyrmion_lab.numerics import Grid2D
from skyrmion_lab.profile import solve_profile


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--L", type=float, default=10.0)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--beta", type=float, default=0.2)
    ap.add_argument("--v", type=float, nargs=2, default=[0.01, 0.0])
    ap.add_argument("--output", default="drift.csv")
    args = ap.parse_args(argv)

    p = solve_profile(args.h)
    m0 = rasterize(p, Grid2D.uniform(args.L, args.n))
    dt = stable_dt(m0, args.h, 0.8)
    t0 = time.perf_counter()
    tr = simulate(m0, args.h, args.alpha, args.beta, args.v, args.T, dt, record_every=50)
    c = tr.drift()
    th = solve_thiele(p, args.v, args.alpha, args.beta)
    print(f"dt={dt:.3e} steps={round(args.T / dt)} wall={time.perf_counter() - t0:.1f}s")
    print(f"drift={c} thiele={th.c}")
    print(f"hall simulated={signed_angle(args.v, c):.5f} thiele={th.hall_angle:.5f}")
    write_csv(args.output, {"t": tr.t, "x_center": tr.center[:, 0], "y_center": tr.center[:, 1],
                            "energy": tr.energy, "charge": tr.charge}, "drift_run")


if __name__ == "__main__":
    main()
