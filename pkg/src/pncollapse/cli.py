"""
Command-line front end: ``pncollapse <command> [--config PATH] [--out DIR] [--seed N] [--quiet]``.

Commands: ``rates``, ``evolve``, ``unravel``, ``estimate``, ``kernel-check``.
Every output file carries the config hash and library version.  Failures
print a JSON object ``{"error": code, "message": ...}`` on stderr and exit
with status 2 (library errors) or 3 (unexpected errors).
"""

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .config import load_config
from .core_model import SpinConfig, inertia_tensor
from .errors import PNCollapseError


def _header(cfg):
    return [f"config_sha256={cfg.sha256}", f"version={__version__}"]


def _dump_json(obj, path, cfg):
    obj = dict(obj)
    obj["config_sha256"] = cfg.sha256
    obj["version"] = __version__
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return obj


def _prepend_header(path, cfg):
    with open(path) as fh:
        body = fh.read()
    with open(path, "w") as fh:
        for line in _header(cfg):
            fh.write(f"# {line}\n")
        fh.write(body)


def _spins(cfg):
    h = cfg["hilbert"]
    return SpinConfig(h["axis"], 0.0), SpinConfig(h["axis"], h["theta_rad"])


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_rates(cfg, out):
    from .rates import OrientationPair, moments_from_spinrep, polarized_state, rot_offdiag_rate, run_batch

    spec = cfg.kernel_spec()
    h = cfg["hilbert"]
    body = cfg.body()
    s1, s2 = _spins(cfg)
    rho1 = polarized_state(h["j"], (1, 0, 0), spec.hbar)
    mom = moments_from_spinrep(rho1, h["theta_rad"], h["j"], h["axis"], spec.hbar).moments
    rep = rot_offdiag_rate(OrientationPair(body, s1, s2, mom), spec, cell=h["cell_m"],
                           constrained_axis=h["constrained_axis"])
    res = _dump_json({"rates": json.loads(rep.to_json()), "body": cfg["body"]["shape"]},
                     os.path.join(out, "rates.json"), cfg)
    with open(os.path.join(out, "rates.csv"), "w") as fh:
        for line in _header(cfg):
            fh.write(f"# {line}\n")
        fh.write("dp_rate_per_s,rot_rate_per_s,rot_shift_per_s,rot_first_moment_per_s,rot_covariance_per_s\n")
        fh.write(",".join(f"{v:.16e}" for v in (rep.dp_rate, rep.rot_rate, rep.rot_shift,
                                                 rep.rot_first_moment, rep.rot_covariance)) + "\n")
    if cfg["rates"]["batch_csv"]:
        run_batch(cfg["rates"]["batch_csv"], os.path.join(out, "rates_batch.csv"), spec, int(h["j"]),
                  header_lines=_header(cfg))
    return res


def build_model(cfg):
    """Generator, initial state and angular-momentum operators for ``evolve``/``unravel``."""
    from .dynamics import assemble_channels, build_liouvillian
    from .quantum_ops import angular_momentum_ops, dumbbell_rotor_model, orientation_operators
    from .rates import polarized_state

    spec = cfg.kernel_spec()
    h, ch = cfg["hilbert"], cfg["channels"]
    enable = tuple(k for k in ("dp", "rot", "mixed") if ch[k])
    w = h["initial_weight"]
    if h["kind"] == "orientation-basis":
        cell = h["cell_m"] or spec.sigma / 2
        model = orientation_operators(cfg.body(), _spins(cfg), cell)
        chans = assemble_channels(spec, model.cells.centres, enable=tuple(e for e in enable if e == "dp"))
        ls = np.zeros((3, 2, 2))
        lin = build_liouvillian(chans, model.mass_ops, ls, hbar=spec.hbar)
        psi = np.array([np.sqrt(1 - w), np.sqrt(w)])
        return {"L": lin, "psi0": psi, "L_ops": None, "ops": None, "kernel": None, "spec": spec}
    if h["kind"] == "spin-rep":
        body = cfg.body()
        axis = h["constrained_axis"] or h["axis"]
        I = inertia_tensor(body, axis).scalar_I
        lops = np.array([o.data for o in angular_momentum_ops(h["j"], spec.hbar)])
        chans = assemble_channels(spec, body.positions, body.masses, I, h["constrained_axis"],
                                  enable=tuple(e for e in enable if e == "rot"))
        n = np.asarray(axis, float) / np.linalg.norm(axis)
        H = cfg["integrator"]["omega_rad_per_s"] * np.einsum("k,kij->ij", n, lops)
        d = lops.shape[1]
        lin = build_liouvillian(chans, np.zeros((body.n_points, d, d)), lops, H, spec.hbar)
        rho = polarized_state(h["j"], (1, 0, 0), spec.hbar)
        psi = np.linalg.eigh(rho)[1][:, -1]
        return {"L": lin, "psi0": psi, "L_ops": lops, "ops": None, "kernel": None, "spec": spec}
    if h["kind"] == "rotor-model":
        from .dynamics import full_operator_list
        from .noise_kernels import assemble_kernel_matrix

        b = cfg["body"]
        m = dumbbell_rotor_model(b["separation_m"], b["mass_kg"], h["cell_m"] or spec.sigma / 2,
                                 h["theta_rad"], h["j"], spec.hbar, h["constrained_axis"])
        chans = assemble_channels(spec, m.positions, m.cell_masses, m.inertia, h["constrained_axis"], enable)
        lin = build_liouvillian(chans, m.mass_ops, m.L, hbar=spec.hbar)
        psi = np.sqrt(1 - w) * m.basis[:, 0] + np.sqrt(w) * m.basis[:, 1]
        return {"L": lin, "psi0": psi, "L_ops": m.L, "spec": spec,
                "ops": full_operator_list(spec, m.mass_ops, m.current_ops),
                "kernel": assemble_kernel_matrix(spec, m.positions)}
    raise PNCollapseError(f"unknown hilbert kind {h['kind']!r}")


def _horizon(cfg, lin):
    from .dynamics import characteristic_time

    it = cfg["integrator"]
    if it["t_s"] is not None:
        return it["t_s"]
    tau = characteristic_time(lin)
    return it["t_char"] * (tau if np.isfinite(tau) else 1.0)


def cmd_evolve(cfg, out):
    from .dynamics import evolve, trajectory_summary, write_trajectory_csv

    mdl = build_model(cfg)
    lin, psi = mdl["L"], mdl["psi0"]
    t = _horizon(cfg, lin)
    it = cfg["integrator"]
    traj = evolve(lin, np.outer(psi, psi.conj()), t, it["n_steps"], it["method"])
    path = os.path.join(out, "trajectory.csv")
    write_trajectory_csv(traj, path, mdl["L_ops"], coherences=[(0, 1), (0, 2), (1, 2)])
    _prepend_header(path, cfg)
    summ = trajectory_summary(traj, coherences=[(0, 1)])
    summ["channels"] = {k: float(np.max(np.abs(v))) for k, v in lin.breakdown.items()}
    return _dump_json(summ, os.path.join(out, "summary.json"), cfg)


def cmd_unravel(cfg, out):
    from .dynamics import evolve
    from .hybrid_mc import max_stable_dt, unravel_quantum

    mdl = build_model(cfg)
    if mdl["ops"] is None:
        raise PNCollapseError("unravel needs hilbert kind = rotor-model")
    lin, psi, spec = mdl["L"], mdl["psi0"], mdl["spec"]
    t = _horizon(cfg, lin)
    mc = cfg["mc"]
    n_steps = max(1, int(np.ceil(t / max_stable_dt(mdl["ops"], mdl["kernel"], spec.hbar) - 1e-9)))
    dt = t / n_steps
    res = unravel_quantum(mdl["ops"], mdl["kernel"], psi, dt, n_steps, mc["n_traj"], cfg["run"]["seed"],
                          hbar=spec.hbar, record_every=mc["record_every"] or None, scheme=mc["scheme"])
    exact = evolve(lin, np.outer(psi, psi.conj()), t, n_steps).states[np.rint(res.times / dt).astype(int)]
    summ = res.summary(exact)
    summ["final_trace_distance"] = summ["checkpoints"][-1]["trace_distance"]
    return _dump_json(summ, os.path.join(out, "unravel.json"), cfg)


def cmd_estimate(cfg, out):
    from .estimators import estimate_table, write_estimates_csv

    e = cfg["estimate"]
    rows = estimate_table({"M_kg": e["pulsar_mass_kg"], "R_m": e["pulsar_radius_m"], "nu_Hz": e["pulsar_nu_Hz"]},
                          {"M_kg": e["rotor_mass_kg"], "R_m": e["rotor_radius_m"],
                           "Omega_rad_per_s": e["rotor_omega_rad_per_s"]})
    write_estimates_csv(rows, os.path.join(out, "estimates.csv"), _header(cfg))
    return {r.name: r.value for r in rows}


def cmd_kernel_check(cfg, out):
    from .noise_kernels import (NonPSDKernelWarning, SmearedKernelMatrix, assemble_kernel_matrix,
                                check_tradeoff, gauge_residual, project_gauge, sample_grid_noise,
                                saturating_DJ)

    spec = cfg.kernel_spec()
    body = cfg.body()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonPSDKernelWarning)
        da = assemble_kernel_matrix(spec, body.positions)
    res = {"D_A": da.certificate()}
    if da.psd:
        dj = saturating_DJ(da)
        sat = check_tradeoff(da, dj)
        half = check_tradeoff(da, SmearedKernelMatrix(0.5 * dj.matrix, dj.n_points, dj.hbar, "D_J"))
        q = spec.hbar ** 2 / 4
        res["tradeoff"] = {"saturating": {"pass": sat.passed, "margin_over_hbar2_4": sat.margin / q},
                           "half_saturating": {"pass": half.passed, "margin_over_hbar2_4": half.margin / q},
                           "support_rank": sat.support_rank}
    g = cfg["gauge"]
    noise = sample_grid_noise((g["nt"], g["nx"], g["nx"], g["nx"]), g["dt_s"], (g["dx_m"],) * 3,
                              seed=cfg["run"]["seed"])
    r0 = gauge_residual(noise).residual_norm
    r1 = gauge_residual(project_gauge(noise)).residual_norm
    res["gauge"] = {"raw_residual": r0, "projected_residual": r1}
    return _dump_json(res, os.path.join(out, "kernel_check.json"), cfg)


COMMANDS = {"rates": cmd_rates, "evolve": cmd_evolve, "unravel": cmd_unravel,
            "estimate": cmd_estimate, "kernel-check": cmd_kernel_check}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pncollapse", description=__doc__.splitlines()[1])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", default=None, help="INI config file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
    ap.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, command=args.command, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        res = COMMANDS[args.command](cfg, args.out)
    except PNCollapseError as exc:
        err = {"error": exc.code, "message": str(exc)}
        if getattr(exc, "suggested_dt", None) is not None:
            err["suggested_dt"] = exc.suggested_dt
        print(json.dumps(err), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report anything as machine-readable JSON
        print(json.dumps({"error": "internal", "message": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 3
    if not args.quiet:
        print(json.dumps(res, indent=2, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
