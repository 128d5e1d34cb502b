"""Pipeline stages behind the command line."""
from __future__ import annotations

import time
import traceback
from pathlib import Path

import numpy as np

from . import dynamics, energy, io, profile as prof, stability
from .config import RunConfig, RunManifest, StageRecord
from .numerics import Grid2D, NumericalFailure, RadialGrid, default_radius

STAGES = ("solve", "verify", "spectrum", "thiele", "identity", "simulate")
REQUIRES = {
    "solve": (),
    "verify": ("solve",),
    "spectrum": ("solve",),
    "thiele": ("solve",),
    "identity": ("solve",),
    "simulate": (),
}

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def radial_grid(cfg: RunConfig, h: float) -> RadialGrid:
    R = cfg.R if cfg.R is not None else default_radius(h)
    return RadialGrid.log_uniform(R, cfg.n_radial, cfg.r0_ratio)


class Context:
    def __init__(self, cfg: RunConfig, manifest: RunManifest):
        self.cfg = cfg
        self.manifest = manifest
        self.out = Path(cfg.output)
        self.hash = manifest.config_hash
        self.profile = None
        self.raster = None

    def scalar(self, **kw):
        self.manifest.scalars.update(kw)

    def check(self, name: str, ok: bool):
        self.manifest.verifications[name] = bool(ok)

    def path(self, name: str) -> Path:
        return self.out / name


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------

def stage_solve(ctx: Context):
    cfg = ctx.cfg
    p = prof.solve_profile(cfg.h, radial_grid(cfg, cfg.h), cfg.tol)
    ctx.profile = p
    io.write_csv(ctx.path("profile.csv"),
                 {"r": p.r, "theta": p.theta, "theta_prime": p.theta_prime}, ctx.hash)
    ctx.scalar(s=p.slope, profile_residual=p.residual, tail_rate=p.tail_rate,
               tail_amplitude=p.tail_amplitude, core_radius=p.core_radius,
               radial_energy=energy.radial_energy(p))


def stage_verify(ctx: Context):
    cfg, p = ctx.cfg, ctx.profile
    diag = prof.verify_profile(p)
    names = {v.estimate for v in diag.violations}
    for name in ("theta_cos", "theta_sin", "theta_h", "core_radius"):
        ctx.check(name, name not in names)
    ctx.check("slope_asymptotic", diag.slope_mismatch <= 0.02)
    ctx.check("tail_rate", diag.tail_mismatch <= 0.02)
    ctx.scalar(cos_margin=diag.cos_margin, sin_margin=diag.sin_margin, h_margin=diag.h_margin,
               core_bound=diag.core_bound, slope_mismatch=diag.slope_mismatch,
               tail_mismatch=diag.tail_mismatch,
               violations=[vars(v) for v in diag.violations])

    e_direct = energy.radial_energy(p)
    e_null = energy.radial_energy(p, "null_lagrangian")
    null_gap = abs(e_direct - e_null) / abs(e_direct)
    ctx.check("null_lagrangian", null_gap <= 1e-8)

    grid = energy.default_grid(p, cfg.raster_n, cfg.raster_graded)
    m0 = energy.rasterize(p, grid)
    ctx.raster = m0
    rep = energy.energy_2d(m0, cfg.h)
    io.write_json(ctx.path("energy.json"), rep.to_json(), ctx.hash)
    if cfg.write_field:
        io.write_field_csv(ctx.path("field.csv"), m0, ctx.hash)
    ctx.scalar(E=rep.total, dirichlet=rep.dirichlet, helicity=rep.helicity, zeeman=rep.zeeman,
               Q=rep.charge, virial_residual=rep.virial_residual, null_lagrangian_gap=null_gap)
    ctx.check("virial", abs(rep.virial_residual) <= 1e-3 * abs(rep.total))
    ctx.check("energy_below_4pi", rep.total < 4.0 * np.pi)
    ctx.check("charge", abs(rep.charge + 1.0) <= 0.01)


def stage_spectrum(ctx: Context):
    cfg, p = ctx.cfg, ctx.profile
    spectra = [stability.mode_spectrum(p, k, cfg.eig_count) for k in cfg.modes]
    io.write_json(ctx.path("spectrum.json"), [s.to_json() for s in spectra], ctx.hash)
    for s in spectra:
        a, b = s.eigenvectors[0]
        io.write_csv(ctx.path(f"eigenvector_k{s.k}.csv"), {"r": p.r, "alpha": a, "beta": b}, ctx.hash)
    lam = {s.k: s.lambda_min for s in spectra}
    ctx.scalar(lambda_min={str(k): v for k, v in lam.items()},
               zero_mode_overlap={str(s.k): s.zero_mode_overlap for s in spectra})
    if 0 in lam:
        ctx.check("lambda0_positive", lam[0] > 0)
    upper = [lam[k] for k in sorted(lam) if k >= 1]
    if len(upper) > 1:
        ctx.check("lambda_nondecreasing", all(b >= a for a, b in zip(upper, upper[1:])))
    if 1 in lam:
        s1 = next(s for s in spectra if s.k == 1)
        ctx.check("zero_mode_overlap", s1.zero_mode_overlap >= 0.99)
        if cfg.refine_check:
            fine = prof.solve_profile(cfg.h, p.grid.refined(), cfg.tol)
            lam_fine = stability.mode_spectrum(fine, 1, 1).lambda_min
            ctx.scalar(lambda_min_1_refined=lam_fine)
            ctx.check("zero_mode_refinement", abs(lam_fine) <= 0.5 * abs(lam[1]))


def stage_thiele(ctx: Context):
    cfg, p = ctx.cfg, ctx.profile
    res = dynamics.solve_thiele(p, cfg.v, cfg.alpha, cfg.beta)
    same = dynamics.solve_thiele(p, cfg.v, cfg.alpha, cfg.alpha)
    dets = {str(a): dynamics.solve_thiele(p, cfg.v, a, cfg.beta).det for a in (0.01, 0.1, 1.0)}
    io.write_json(ctx.path("thiele.json"), res.to_json(), ctx.hash)
    ctx.scalar(c=res.c, hall_angle=res.hall_angle, det_A=res.det, D=res.D[0, 0],
               c_equal_damping=same.c, det_by_alpha=dets)
    v = np.asarray(cfg.v)
    ctx.check("equal_damping_c_is_v", np.max(np.abs(same.c - v)) <= 1e-12 * max(1.0, np.max(np.abs(v))))
    ctx.check("det_bound", all(d >= (4.0 * np.pi) ** 2 for d in dets.values()))


def stage_identity(ctx: Context):
    cfg, p = ctx.cfg, ctx.profile
    m0 = ctx.raster
    if m0 is None:
        m0 = energy.rasterize(p, energy.default_grid(p, cfg.raster_n, cfg.raster_graded))
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for _ in range(cfg.identity_samples):
        phi = stability.random_tangent_perturbation(m0, rng, p.core_radius)
        gap = stability.energy_hessian_identity(p, m0, phi, cfg.identity_scale)
        rows.append({"lhs": gap.lhs, "rhs": gap.rhs, "gap": gap.gap, "xi_h1_sq": gap.xi_h1_sq,
                     "relative": gap.gap / (gap.xi_h1_sq + abs(gap.lhs))})
    g = m0.grid
    bound = (cfg.h - 1.0) / (cfg.h + 1.0)
    coercive, curl_ratio = [], []
    for _ in range(cfg.coercivity_samples):
        phi = stability.random_planar_field(g, rng, p.core_radius)
        coercive.append(stability.hinf_form(g, phi, cfg.h) / stability.h1_norm_sq_2d(g, phi))
        c2, g2 = stability.curl_norms(g, phi)
        curl_ratio.append(c2 / g2)
    io.write_json(ctx.path("identity.json"), {"energy_hessian": rows, "coercivity": coercive,
                                              "curl_over_grad": curl_ratio}, ctx.hash)
    worst = max(r["relative"] for r in rows)
    ctx.scalar(identity_worst_relative=worst, coercivity_min=min(coercive), coercivity_bound=bound,
               curl_over_grad_min=min(curl_ratio), curl_over_grad_max=max(curl_ratio))
    ctx.check("energy_hessian_identity", worst <= 1e-3)
    ctx.check("coercivity", min(coercive) >= bound)
    ctx.check("curl_gradient_equality", max(abs(x - 1.0) for x in curl_ratio) <= 1e-2)


def dynamics_initial(cfg: RunConfig):
    grid = RadialGrid.log_uniform(default_radius(cfg.dyn_h), cfg.n_radial, cfg.r0_ratio)
    p = prof.solve_profile(cfg.dyn_h, grid, cfg.tol)
    grid = Grid2D.uniform(cfg.dyn_L, cfg.dyn_n)
    return p, energy.rasterize(p, grid)


def stage_simulate(ctx: Context):
    cfg = ctx.cfg
    p, m0 = dynamics_initial(cfg)
    dt = cfg.dt if cfg.dt is not None else dynamics.stable_dt(m0, cfg.dyn_h, 0.8)
    th = dynamics.solve_thiele(p, cfg.v, cfg.alpha, cfg.beta)
    traj = dynamics.simulate(m0, cfg.dyn_h, cfg.alpha, cfg.beta, cfg.v, cfg.T, dt, cfg.record_every)
    io.write_csv(ctx.path("trajectory.csv"),
                 {"t": traj.t, "x_center": traj.center[:, 0], "y_center": traj.center[:, 1],
                  "energy": traj.energy, "charge": traj.charge}, ctx.hash)
    io.write_field_csv(ctx.path("snapshot.csv"), traj.final.field, ctx.hash)
    c = traj.drift()
    rel = float(np.linalg.norm(c - th.c) / max(np.linalg.norm(th.c), 1e-300))
    hall = dynamics.signed_angle(cfg.v, c) if np.any(cfg.v) else 0.0
    ctx.scalar(dyn_h=cfg.dyn_h, dt=dt, drift=c, thiele_c_dyn=th.c, drift_relative_error=rel,
               drift_hall_angle=hall, thiele_hall_angle_dyn=th.hall_angle,
               charge_initial=traj.charge[0], charge_final=traj.charge[-1])
    if np.any(cfg.v):
        tol = 0.05 if cfg.alpha == cfg.beta else 0.10
        ctx.check("drift_matches_thiele", rel <= tol)
        if cfg.alpha != cfg.beta:
            ctx.check("hall_sign", np.sign(hall) == np.sign(th.hall_angle) != 0)
    if cfg.relax_steps:
        # relaxation of a mismatched profile at zero current
        wrong = energy.rasterize(prof.solve_profile(1.5 * cfg.dyn_h, tol=cfg.tol), m0.grid)
        state = dynamics.LLGState(wrong, 0.0, cfg.dyn_h, cfg.alpha, cfg.beta, (0.0, 0.0),
                                  energy.total_energy(wrong, cfg.dyn_h))
        trace = [state.energy]
        for _ in range(cfg.relax_steps):
            state = dynamics.llg_step(state, dt, with_energy=True)
            trace.append(state.energy)
        increase = float(np.max(np.diff(trace)))
        ctx.scalar(relax_max_energy_increase=increase)
        ctx.check("energy_nonincreasing", increase <= 1e-12)


STAGE_FUNCS = {
    "solve": stage_solve,
    "verify": stage_verify,
    "spectrum": stage_spectrum,
    "thiele": stage_thiele,
    "identity": stage_identity,
    "simulate": stage_simulate,
}


def plan(command: str) -> list[str]:
    """Stages to execute for ``command`` in dependency order."""
    if command == "all":
        return list(STAGES)
    if command not in STAGE_FUNCS:
        raise ValueError(f"unknown command {command!r}")
    wanted = set(REQUIRES[command]) | {command}
    return [s for s in STAGES if s in wanted]


def run(command: str, cfg: RunConfig) -> RunManifest:
    """Execute ``command``; the manifest is written even when a stage fails."""
    manifest = RunManifest(command, cfg.to_dict(), cfg.digest())
    stages = plan(command)
    for s in stages:
        manifest.stages[s] = StageRecord()
    ctx = Context(cfg, manifest)
    ctx.out.mkdir(parents=True, exist_ok=True)
    code = EXIT_OK
    try:
        for s in stages:
            rec = manifest.stages[s]
            t0 = time.perf_counter()
            try:
                STAGE_FUNCS[s](ctx)
                rec.status = "ok"
            except (NumericalFailure, dynamics.UnstableStep, np.linalg.LinAlgError) as exc:
                rec.status, rec.error = "failed", f"{type(exc).__name__}: {exc}"
                code = EXIT_NUMERIC
            except Exception as exc:  # recorded, then re-raised after the manifest is saved
                rec.status, rec.error = "failed", "".join(traceback.format_exception_only(exc)).strip()
                code = EXIT_NUMERIC
                raise
            finally:
                rec.seconds = time.perf_counter() - t0
            if code:
                break
    finally:
        if code == EXIT_OK and not manifest.passed:
            code = EXIT_VERIFY
        manifest.exit_code = code
        io.write_json(ctx.path("manifest.json"), manifest.to_dict(), manifest.config_hash)
    return manifest
