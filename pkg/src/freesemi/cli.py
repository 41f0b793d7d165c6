"""Command-line interface: TOML configs in, CSV/JSON artifacts out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  Output
files are written atomically (temp file + rename) so a failing run leaves no
partial artifacts.  All floats in CSV output carry 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import expr, finite_n, freeconv, montecarlo, presets, singular as sing
from .errors import ConfigError, FreesemiError, NumericalError
from .measure import (Atom, MeasureSpec, PotentialSpec, Segment,
                      SingularPointSpec)

REPORT_FIELDS = ("tau_crit", "x_star_tau", "c_tau", "case", "r", "theta",
                 "g2", "g3", "exponent", "prefactor", "residual")


@dataclass
class RunConfig:
    measure: MeasureSpec
    potential: Optional[PotentialSpec]
    seed: Optional[int]
    out: str
    raw: dict


# ---------------------------------------------------------------------------
# config parsing


def _build_expression_measure(tbl: dict) -> MeasureSpec:
    segments = []
    for seg in tbl.get("segments", []):
        a, b = map(float, seg["interval"])
        dens = expr.compile_expr(seg["density"])
        al, ar = map(float, seg.get("edge_exponents", (0.0, 0.0)))
        segments.append(Segment(a, b, dens, al, ar, expr=seg["density"]))
    atoms = [Atom(float(at["location"]), float(at["mass"]))
             for at in tbl.get("atoms", [])]
    spec = None
    if "singular" in tbl:
        s = tbl["singular"]
        spec = SingularPointSpec(float(s["x_star"]), s["kind"], int(s["k"]),
                                 float(s["c0"]), expr.compile_expr(s["h"]),
                                 h_expr=s["h"])
    return MeasureSpec(segments, atoms, total_mass=float(tbl.get("total_mass", 1.0)),
                       singular=spec)


def _build_measure(tbl: dict) -> MeasureSpec:
    family = tbl.get("family")
    if family is None:
        raise ConfigError("[measure] needs a 'family' key")
    if family == "expression":
        return _build_expression_measure(tbl)
    if family == "semicircle":
        return presets.semicircle(float(tbl.get("tau", 1.0)))
    if family == "two_atom":
        return presets.two_atom()
    if family == "atoms":
        return presets.atom_measure(tbl["locations"], tbl["masses"])
    if family == "jacobi_power":
        return presets.jacobi_power(float(tbl["c"]), float(tbl["alpha"]),
                                    float(tbl["beta"]), tbl["interval"],
                                    total_mass=float(tbl.get("total_mass", 1.0)))
    if family == "poly_times_sqrt":
        return presets.poly_times_sqrt(tbl["coefficients"], tbl["interval"],
                                       total_mass=float(tbl.get("total_mass", 1.0)))
    if family == "monomial_critical":
        return presets.monomial_critical(int(tbl.get("k", 1)))
    if family == "quartic_critical":
        return presets.quartic_critical()
    if family == "edge_critical":
        return presets.edge_critical()
    if family == "offset_critical":
        return presets.offset_critical(float(tbl.get("delta", 0.3)))
    if family == "asymmetric_k2":
        return presets.asymmetric_k2(bool(tbl.get("mirrored", False)))
    raise ConfigError(f"unknown measure family {family!r}")


def load_config(path: str, seed_flag: Optional[int] = None,
                out_flag: Optional[str] = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    if "measure" not in raw:
        raise ConfigError("config needs a [measure] table")
    try:
        m = _build_measure(raw["measure"])
        potential = None
        if "potential" in raw:
            potential = PotentialSpec(raw["potential"]["coefficients"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc!r}") from exc
    run = raw.get("run", {})
    seed = seed_flag if seed_flag is not None else run.get("seed")
    out = out_flag if out_flag is not None else run.get("out", ".")
    return RunConfig(m, potential, seed, out, raw)


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.17g}"


def write_csv(path: str, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: str, obj: dict):
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_plot_stub(path: str, csv_name: str, title: str):
    stub = (f'set datafile separator ","\n'
            f'set title "{title}"\n'
            f'plot "{csv_name}" using 1:2 with lines notitle\n')
    _atomic_write(path, stub)


def _parse_grid(s: str):
    try:
        lo, hi, count = s.split(":")
        return float(lo), float(hi), int(count)
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {s!r}; want LO:HI:COUNT") from exc


def _parse_window(s: str):
    try:
        e1, e2 = s.split(":")
        return float(e1), float(e2)
    except ValueError as exc:
        raise ConfigError(f"bad window spec {s!r}; want E1:E2") from exc


def _require_singular(cfg: RunConfig) -> SingularPointSpec:
    if cfg.measure.singular is None:
        raise ConfigError("this command needs a singular-point declaration")
    return cfg.measure.singular


def _classify_payload(cfg: RunConfig, tau: float) -> dict:
    spec = _require_singular(cfg)
    cd = sing.classify(cfg.measure, spec, tau)
    return {
        "tau": tau,
        "tau_crit": cd.tau_crit,
        "x_star_tau": cd.x_star_tau,
        "c_tau": cd.c_tau(tau) if tau < cd.tau_crit else None,
        "case": cd.case_label,
        "r": cd.r,
        "theta": cd.theta,
        "g2": cd.g2,
        "g3": cd.g3,
        "g": list(cd.g),
        "kappa": cd.kappa,
        "gamma": cd.gamma,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_density(cfg: RunConfig, args) -> int:
    taus = args.tau or [0.5]
    for tau in taus:
        solver = freeconv.SubordinationSolver(cfg.measure, tau)
        if args.grid:
            lo, hi, count = _parse_grid(args.grid)
        else:
            pad = 2.0 * math.sqrt(tau * cfg.measure.total_mass)
            lo = cfg.measure.support_min - pad
            hi = cfg.measure.support_max + pad
            count = 401
        grid = np.linspace(lo, hi, count)
        profile = solver.density(grid)
        name = f"density_tau{tau:g}.csv"
        write_csv(os.path.join(cfg.out, name), ["x", "psi"],
                  zip(profile.grid, profile.psi))
        write_plot_stub(os.path.join(cfg.out, name.replace(".csv", ".gnuplot")),
                        name, f"density at tau={tau:g}")
    return 0


def cmd_critical(cfg: RunConfig, args) -> int:
    spec = _require_singular(cfg)
    tc = freeconv.tau_crit(cfg.measure, spec.x_star)
    payload = _classify_payload(cfg, tc)
    write_json(os.path.join(cfg.out, "critical.json"), payload)
    return 0


def cmd_classify(cfg: RunConfig, args) -> int:
    tau = args.tau[0] if args.tau else freeconv.tau_crit(
        cfg.measure, _require_singular(cfg).x_star)
    payload = _classify_payload(cfg, tau)
    write_json(os.path.join(cfg.out, f"classify_tau{tau:g}.json"), payload)
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    spec = _require_singular(cfg)
    tau = args.tau[0] if args.tau else freeconv.tau_crit(cfg.measure, spec.x_star)
    window = _parse_window(args.window) if args.window else (
        1e-3 * cfg.measure.diameter, 1e-2 * cfg.measure.diameter)
    solver = freeconv.SubordinationSolver(cfg.measure, tau)
    xt = freeconv.x_star_tau(cfg.measure, spec.x_star, tau)
    samples = sing.density_samples(solver, xt, args.side, window)
    law = sing.fit_power_law(samples, window)
    payload = _classify_payload(cfg, tau)
    payload.update({"side": args.side, "exponent": law.exponent,
                    "prefactor": law.prefactor, "residual": law.residual,
                    "window": list(window)})
    write_json(os.path.join(cfg.out, f"fit_tau{tau:g}_{args.side}.json"),
               payload)
    return 0


def _engine(cfg: RunConfig, n: int) -> finite_n.KernelEngine:
    if cfg.potential is None:
        raise ConfigError("kernel commands need a [potential] table")
    basis = finite_n.build_basis(cfg.potential, n, max(n, 8))
    return finite_n.KernelEngine(basis, singular=cfg.measure.singular)


def cmd_kernel(cfg: RunConfig, args) -> int:
    n = args.n or 4
    tau = args.tau[0] if args.tau else 0.5
    engine = _engine(cfg, n)
    lo, hi, count = _parse_grid(args.grid) if args.grid else (-2.5, 2.5, 41)
    xs = np.linspace(lo, hi, count)
    rows = []
    for x in xs:
        rows.append((x, float(engine.kernel_M(np.asarray(x), np.asarray(x))),
                     engine.kernel_X(float(x), float(x), tau)))
    name = f"kernel_n{n}_tau{tau:g}.csv"
    write_csv(os.path.join(cfg.out, name), ["x", "k_m", "k_x"], rows)
    write_plot_stub(os.path.join(cfg.out, name.replace(".csv", ".gnuplot")),
                    name, f"kernels n={n} tau={tau:g}")
    return 0


def cmd_multitime(cfg: RunConfig, args) -> int:
    n = args.n or 4
    t, tp = args.t, args.tprime
    if t is None or tp is None:
        raise ConfigError("multitime needs --t and --tprime")
    engine = _engine(cfg, n)
    lo, hi, count = _parse_grid(args.grid) if args.grid else (-1.5, 1.5, 21)
    xs = np.linspace(lo, hi, count)
    rows = []
    for x in xs:
        for y in xs:
            rows.append((x, y, engine.kernel_multitime(float(x), float(y), t, tp)))
    name = f"multitime_n{n}_t{t:g}_tp{tp:g}.csv"
    write_csv(os.path.join(cfg.out, name), ["x", "y", "k"], rows)
    return 0


def _initial_eigenvalues(measure: MeasureSpec, n: int) -> np.ndarray:
    if measure.atoms and not measure.segments:
        reps = np.array([round(a.mass / measure.total_mass * n)
                         for a in measure.atoms], dtype=int)
        reps[-1] = n - reps[:-1].sum()
        return np.repeat([a.location for a in measure.atoms], reps)
    return measure.quantiles(n)


def cmd_mc(cfg: RunConfig, args) -> int:
    if cfg.seed is None:
        raise ConfigError("mc needs a seed (flag --seed or [run].seed)")
    n = args.n or 200
    replicas = args.replicas or 100
    tau = args.tau[0] if args.tau else 0.5
    stream = montecarlo.RngStream(int(cfg.seed))
    init = _initial_eigenvalues(cfg.measure, n)
    samples = np.concatenate([
        montecarlo.sample_perturbed(init, tau, stream.child(r))
        for r in range(replicas)])
    if args.grid:
        lo, hi, count = _parse_grid(args.grid)
    else:
        pad = 2.0 * math.sqrt(tau * cfg.measure.total_mass)
        lo, hi = cfg.measure.support_min - pad, cfg.measure.support_max + pad
        count = 64
    if lo > samples.min() or hi < samples.max():
        print("warning: histogram range does not cover all samples",
              file=sys.stderr)
    centers, heights = montecarlo.empirical_density(
        samples, {"lo": lo, "hi": hi, "count": count})
    name = f"mc_hist_tau{tau:g}.csv"
    write_csv(os.path.join(cfg.out, name), ["x", "density"],
              zip(centers, heights))
    write_json(os.path.join(cfg.out, f"mc_summary_tau{tau:g}.json"),
               {"n": n, "replicas": replicas, "tau": tau,
                "seed": int(cfg.seed), "samples": int(samples.size)})
    return 0


def cmd_nibm(cfg: RunConfig, args) -> int:
    if cfg.seed is None:
        raise ConfigError("nibm needs a seed (flag --seed or [run].seed)")
    n = args.n or 50
    replicas = args.replicas or 1000
    t = args.t if args.t is not None else 0.2
    tp = args.tprime if args.tprime is not None else 0.3
    stream = montecarlo.RngStream(int(cfg.seed))
    init = _initial_eigenvalues(cfg.measure, n)
    ens = montecarlo.sample_nibm(init, [t, tp], n, replicas, stream)
    mid = n // 2
    x_t, x_tp = ens.paths[:, 0, mid], ens.paths[:, 1, mid]
    a = np.vstack([x_t, np.ones_like(x_t)]).T
    coef, *_ = np.linalg.lstsq(a, x_tp, rcond=None)
    resid_var = float(np.var(x_tp - a @ coef))
    payload = {"n": n, "replicas": replicas, "t": t, "tprime": tp,
               "seed": int(cfg.seed),
               "central_mean_t": float(np.mean(x_t)),
               "central_mean_tprime": float(np.mean(x_tp)),
               "increment_residual_variance": resid_var}
    if cfg.measure.singular is not None:
        tc = freeconv.tau_crit(cfg.measure, cfg.measure.singular.x_star)
        t_crit = tc / (1.0 + tc)
        payload["t_crit"] = t_crit
        if t < t_crit and tp < t_crit:
            payload["bridge_variance_prediction"] = \
                (tp - t) * (t_crit - tp) / ((t_crit - t) * n)
    write_json(os.path.join(cfg.out, f"nibm_t{t:g}_tp{tp:g}.json"), payload)
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    spec = _require_singular(cfg)
    tau = args.tau[0] if args.tau else freeconv.tau_crit(cfg.measure, spec.x_star)
    payload = _classify_payload(cfg, tau)
    window = _parse_window(args.window) if args.window else (
        1e-3 * cfg.measure.diameter, 1e-2 * cfg.measure.diameter)
    solver = freeconv.SubordinationSolver(cfg.measure, tau)
    xt = payload["x_star_tau"]
    try:
        samples = sing.density_samples(solver, xt, args.side, window)
        law = sing.fit_power_law(samples, window)
        payload.update({"exponent": law.exponent, "prefactor": law.prefactor,
                        "residual": law.residual})
    except NumericalError as exc:
        print(f"warning: power-law fit skipped: {exc}", file=sys.stderr)
        payload.update({"exponent": None, "prefactor": None, "residual": None})
    for key in REPORT_FIELDS:
        payload.setdefault(key, None)
    write_json(os.path.join(cfg.out, f"report_tau{tau:g}.json"), payload)
    return 0


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "density": cmd_density,
    "critical": cmd_critical,
    "classify": cmd_classify,
    "fit": cmd_fit,
    "kernel": cmd_kernel,
    "multitime": cmd_multitime,
    "mc": cmd_mc,
    "nibm": cmd_nibm,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freesemi",
                                description="free convolution with semicircle "
                                            "noise: densities, critical laws, "
                                            "kernels, Monte Carlo")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--tau", type=float, action="append")
        sp.add_argument("--t", type=float)
        sp.add_argument("--tprime", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--out")
        sp.add_argument("--grid", help="LO:HI:COUNT")
        sp.add_argument("--window", help="E1:E2")
        sp.add_argument("--side", choices=["left", "right"], default="left")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, seed_flag=args.seed, out_flag=args.out)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FreesemiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
