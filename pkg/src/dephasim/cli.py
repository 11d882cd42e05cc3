"""``dephasim`` command line: figure data, oracle reports and CSV output.

Exit codes: 0 success, 2 validation error, 3 numerical tolerance failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__, bath, decay, fock, quadrature, tls
from .errors import DomainError, NumericalError, ToleranceFailure, ValidationError
from .params import load_config, validate

log = logging.getLogger("dephasim")

EXIT_OK, EXIT_VALIDATION, EXIT_TOLERANCE, EXIT_IO = 0, 2, 3, 4

PRESETS = {
    "fig1": {
        "config": {"lambda": 0.1, "omega_c": 1.0, "temperature": 0.0, "r": 1.0, "delta_theta": 0.0},
        "ranges": {"tau_min": 0.0, "tau_max": 10.0, "steps": 101},
    },
    "fig2": {
        "config": {"lambda": 0.1, "omega_c": 1.0, "temperature": 0.3, "r": 0.0, "delta_theta": 0.0,
                   "p_e": 0.5, "omega_k": 1.0, "g_abs": 0.1, "phi_k": 0.0},
        "ranges": {"tau_min": math.pi / 32, "tau_max": 4 * math.pi, "steps": 65},
    },
    "fig3": {
        "config": {"lambda": 0.1, "omega_c": 1.0, "temperature": 1.0, "r": 1.0, "delta_theta": 0.0,
                   "p_e": 0.5, "omega_k": 1.0, "g_abs": 0.1, "phi_k": 0.0},
        "ranges": {"tau_min": 0.0, "tau_max": 5.0, "steps": 51},
    },
}

DEFAULT_RANGES = {
    "decay": (0.0, 10.0, 101),
    "mode": (math.pi / 32, 4 * math.pi, 65),
    "bath": (0.0, 5.0, 51),
    "system": (0.0, 10.0, 101),
    "rates": (0.0, 2 * math.pi, 64),
}
ORACLE_TOL = {"zero_t": 1e-6, "high_t": 1e-6, "exact": 1e-5}
COTH_FOR_REGIME = {"zero_t": "unity", "high_t": "high_t", "exact": "exact"}
BATH_TOL = 1e-6


# --- output helpers ----------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def rel_dev(value, reference, floor=0.0) -> float:
    diff = abs(value - reference)
    denom = max(abs(reference), floor)
    if denom == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / denom


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    atomic_write(path, "\n".join(lines) + "\n")


def append_manifest(out_dir: Path, entry: dict):
    path = out_dir / "manifest.json"
    runs = []
    if path.exists():
        runs = json.loads(path.read_text()).get("runs", [])
    runs.append(entry)
    atomic_write(path, json.dumps({"runs": runs}, indent=2, sort_keys=True) + "\n")


def pmap(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def grid(args, command):
    lo, hi, n = DEFAULT_RANGES[command]
    lo = args.tau_min if args.tau_min is not None else args.preset_ranges.get("tau_min", lo)
    hi = args.tau_max if args.tau_max is not None else args.preset_ranges.get("tau_max", hi)
    n = args.steps if args.steps is not None else args.preset_ranges.get("steps", n)
    if n < 2:
        raise ValidationError("steps must be >= 2", "steps")
    if not hi > lo or lo < 0:
        raise ValidationError("need 0 <= tau-min < tau-max", "tau_min")
    return np.linspace(lo, hi, n)


# --- workers (top level so they pickle) --------------------------------------

def _decay_row(tau, bundle, regime):
    sp, sq = bundle.spectrum, bundle.squeeze
    t = tau / sp.omega_c
    a, b, c = decay.coefficients(tau, sp, regime)
    g = decay.combine((a, b, c), sp.lam, sq)
    mode = COTH_FOR_REGIME[regime]
    gq = quadrature.gamma_quadrature(t, sp, sq, mode)
    return [tau, a, b, c, g, gq, rel_dev(g, gq), a + b, a - b, a + c, a - c]


def _bath_row(point, bundle):
    tau, dth = point
    sp = bundle.spectrum
    sq = type(bundle.squeeze)(bundle.squeeze.r, dth)
    t = tau / sp.omega_c
    x, y, z = bath.xyz_coeffs(tau)
    # rate bracket over cosh 2r: X at r = 0, the strong-squeezing f as r grows
    f = x - math.tanh(2 * sq.r) * (y * math.cos(dth) + z * math.sin(dth))
    closed = bath.bath_entropy_rate(t, sp, sq)
    quad = quadrature.bath_entropy_quadrature(t, sp, sq)
    return [tau, dth, f, closed, quad]


def _mode_row(wt, mode, temperature, p_e, dim):
    t = wt / mode.omega_k
    s = fock.von_neumann_entropy(fock.mode_state(t, mode, temperature, p_e, dim))
    exact = fock.entropy_rate_fd(t, mode, temperature, p_e, dim)
    approx = fock.approx_entropy_rate_mode(t, mode, temperature) if temperature > 0 else math.inf
    dev = abs(1.0 - approx / exact) if abs(exact) > 1e-12 else math.nan
    return [t, s, exact, approx, dev]


def _temperature_row(t_over_w, mode, p_e):
    temperature = t_over_w * mode.omega_k
    t = 0.5 * math.pi / mode.omega_k
    exact = fock.entropy_rate_fd(t, mode, temperature, p_e)
    approx = fock.approx_entropy_rate_mode(t, mode, temperature)
    return [t_over_w, exact, approx, approx / exact, abs(1.0 - approx / exact)]


# --- commands ----------------------------------------------------------------

def cmd_decay(bundle, args, out):
    regime = args.regime or ("zero_t" if bundle.spectrum.temperature == 0 else "exact")
    if regime == "high_t" and bundle.spectrum.temperature <= 0:
        raise ValidationError("regime high_t needs temperature > 0", "temperature")
    taus = grid(args, "decay")
    rows = pmap(partial(_decay_row, bundle=bundle, regime=regime), taus, args.parallel)
    path = out / "decay.csv"
    write_csv(path, ["tau", "A", "B", "C", "gamma", "gamma_quadrature", "rel_dev",
                     "A_plus_B", "A_minus_B", "A_plus_C", "A_minus_C"], rows)
    worst = max(r[6] for r in rows)
    print(f"decay[{regime}]: {len(rows)} rows, max rel_dev vs quadrature {worst:.3e}")
    failure = None
    if worst > ORACLE_TOL[regime]:
        failure = f"closed form deviates from quadrature by {worst:.3e} > {ORACLE_TOL[regime]:.0e}"
    return [path], {"regime": regime}, failure


def cmd_rates(bundle, args, out):
    sp, sq = bundle.spectrum, bundle.squeeze
    if not sp.temperature > 0:
        raise ValidationError("rates need temperature > 0", "temperature")
    k = decay.kappa_exact(sp, sq)
    kp = decay.kappa_markov(sp, sq)
    unit = 2.0 * sp.lam * sp.temperature
    kn = k / unit if unit else math.nan
    kpn = kp / unit if unit else math.nan
    ratio = k / kp if kp else math.inf
    p1 = out / "rates.csv"
    write_csv(p1, ["lambda", "temperature", "r", "delta_theta", "kappa", "kappa_prime",
                   "kappa_norm", "kappa_prime_norm", "ratio"],
              [[sp.lam, sp.temperature, sq.r, sq.delta_theta, k, kp, kn, kpn, ratio]])
    print(f"kappa = {fmt(k)}  kappa' = {fmt(kp)}  kappa/(2 lambda T) = {fmt(kn)}  "
          f"kappa'/(2 lambda T) = {fmt(kpn)}  kappa/kappa' = {fmt(ratio)}")

    n = args.steps if args.steps is not None else DEFAULT_RANGES["rates"][2]
    thetas = 2 * math.pi * np.arange(n) / n
    sweep = []
    for th in thetas:
        s2 = type(sq)(sq.r, th)
        sweep.append([th, decay.kappa_exact(sp, s2), decay.kappa_markov(sp, s2)])
    p2 = out / "rates_sweep.csv"
    write_csv(p2, ["delta_theta", "kappa", "kappa_prime"], sweep)
    arr = np.array(sweep)
    fits = []
    for name, col in (("kappa", 1), ("kappa_prime", 2)):
        coef = fit_harmonics(arr[:, 0], arr[:, col])
        fits.append([name, *coef])
    p3 = out / "rates_fit.csv"
    write_csv(p3, ["quantity", "const", "cos_coef", "sin_coef"], fits)
    return [p1, p2, p3], {}, None


def fit_harmonics(theta, values):
    """Least-squares fit ``values ~ c0 + c1 cos(theta) + c2 sin(theta)``."""
    design = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    # round-off below 1e-12 of the scale is noise; zero it so output is stable
    scale = max(np.max(np.abs(values)), 1e-300)
    coef = np.where(np.abs(coef) < 1e-12 * scale, 0.0, coef)
    return [float(c) for c in coef]


def cmd_mode(bundle, args, out):
    mode = bundle.mode
    if mode is None:
        raise ValidationError("mode command needs omega_k and g_abs in the config", "omega_k")
    T = bundle.spectrum.temperature
    p_e = bundle.state.p_e
    wts = grid(args, "mode")
    h = 1e-3 / mode.omega_k
    ts = wts / mode.omega_k
    dim = args.dim or fock.select_dim(np.concatenate([ts - h, ts + h, [0.5 * math.pi / mode.omega_k]]),
                                      mode, T, p_e)
    rows = pmap(partial(_mode_row, mode=mode, temperature=T, p_e=p_e, dim=dim), wts, args.parallel)
    p1 = out / "mode.csv"
    write_csv(p1, ["t", "S_exact", "Sdot_exact_fd", "Sdot_approx", "rel_dev"], rows)
    paths = [p1]

    temps = np.geomspace(2.0, 0.05, 12)
    trows = pmap(partial(_temperature_row, mode=mode, p_e=p_e), temps, args.parallel)
    p2 = out / "mode_temperature.csv"
    write_csv(p2, ["T_over_omega", "Sdot_exact", "Sdot_approx", "ratio", "rel_dev"], trows)
    paths.append(p2)

    if not args.no_wigner:
        t_w = 0.5 * math.pi / mode.omega_k
        branches = fock.mode_branches(mode, T, t_w, p_e)
        x, p = fock.wigner_lattice(branches, n=101)
        w = fock.wigner_grid(branches, x, p)
        xx, pp = np.meshgrid(x, p, indexing="ij")
        p3 = out / "wigner.csv"
        write_csv(p3, ["x", "p", "W"], zip(xx.ravel(), pp.ravel(), w.ravel()))
        paths.append(p3)
    print(f"mode: dim={dim}, {len(rows)} time points, {len(trows)} temperatures")
    return paths, {"dim": dim}, None


def cmd_bath(bundle, args, out):
    sp = bundle.spectrum
    if not sp.temperature > 0:
        raise ValidationError("bath command needs temperature > 0", "temperature")
    taus = grid(args, "bath")
    n_theta = args.theta_steps
    thetas = 2 * math.pi * np.arange(n_theta) / n_theta
    points = [(float(t), float(th)) for t in taus for th in thetas]
    raw = pmap(partial(_bath_row, bundle=bundle), points, args.parallel)
    # relative deviation floored at 1e-3 of the largest rate: the closed form crosses zero
    floor = 1e-3 * max(abs(r[3]) for r in raw)
    rows = [r + [rel_dev(r[3], r[4], floor)] for r in raw]
    p1 = out / "bath.csv"
    write_csv(p1, ["tau", "delta_theta", "f", "Sdot_closed", "Sdot_quadrature", "rel_dev"], rows)
    fm = bath.f_map(taus, thetas)
    worst = max(r[5] for r in rows)
    low = min(rows, key=lambda r: r[2])
    fvals = np.array([r[2] for r in rows])
    p2 = out / "bath_summary.csv"
    write_csv(p2, ["min_f", "tau_at_min", "delta_theta_at_min", "max_f", "negative_fraction",
                   "min_f_strong_squeezing", "max_rel_dev"],
              [[low[2], low[0], low[1], fvals.max(), np.mean(fvals < 0), fm.min_value, worst]])
    print(f"bath: min f = {fmt(low[2])} at tau={fmt(low[0])}, dtheta={fmt(low[1])}; "
          f"strong-squeezing min {fmt(fm.min_value)}; max rel_dev {worst:.3e}")
    failure = None
    if worst > BATH_TOL:
        failure = f"bath closed form deviates from quadrature by {worst:.3e} > {BATH_TOL:.0e}"
    return [p1, p2], {}, failure


def _entropy_rate(state, g_rate):
    v = tls.bloch(state)
    if v.u == 0.0:
        return 0.0
    return tls.entropy_rate_tls(v, tls.dephasing_bloch_rate(v, g_rate))


def cmd_system(bundle, args, out):
    sp, sq, st = bundle.spectrum, bundle.squeeze, bundle.state
    regime = args.regime or ("zero_t" if sp.temperature == 0 else "exact")
    taus = grid(args, "system")
    ts = taus / sp.omega_c
    g = np.atleast_1d(decay.gamma(ts, sp, sq, regime))
    gdot = np.atleast_1d(decay.gamma_rate(ts, sp, sq, regime))
    kp = decay.kappa_markov(sp, sq) if sp.temperature > 0 else 0.0
    rows = []
    for t, gi, gdi in zip(ts, g, gdot):
        cur = tls.evolve_system(st, float(gi))
        mk = tls.markov_solution(st, kp, float(t))
        u = tls.bloch(cur).u
        rows.append([t, gi, abs(cur.coherence), u, tls.entropy_tls(min(u, 1.0)),
                     _entropy_rate(cur, float(gdi)), abs(mk.coherence), tls.state_entropy(mk)])
    path = out / "system.csv"
    write_csv(path, ["t", "gamma", "coherence_abs", "u", "S_S", "Sdot_S", "coherence_markov", "S_S_markov"],
              rows)
    print(f"system[{regime}]: {len(rows)} rows")
    return [path], {"regime": regime}, None


COMMANDS = {
    "decay": cmd_decay,
    "rates": cmd_rates,
    "mode": cmd_mode,
    "bath": cmd_bath,
    "system": cmd_system,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dephasim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dephasim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--out", type=Path, default=Path("dephasim-out"))
        p.add_argument("--tau-min", type=float)
        p.add_argument("--tau-max", type=float)
        p.add_argument("--steps", type=int)
        p.add_argument("--dim", type=int)
        p.add_argument("--parallel", type=int, default=default_workers())
        if name in ("decay", "system"):
            p.add_argument("--regime", choices=decay.REGIMES)
        if name == "bath":
            p.add_argument("--theta-steps", type=int, default=64)
        if name == "mode":
            p.add_argument("--no-wigner", action="store_true")
    return parser


def resolve_bundle(args):
    cfg = {}
    args.preset_ranges = {}
    if args.preset:
        cfg.update(PRESETS[args.preset]["config"])
        args.preset_ranges = PRESETS[args.preset]["ranges"]
    if args.config is not None:
        cfg.update(load_config(args.config).to_config() if not args.preset
                   else json.loads(Path(args.config).read_text()))
    if args.config is None and not args.preset:
        raise ValidationError("give --config FILE or --preset NAME")
    return validate(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        bundle = resolve_bundle(args)
        out = Path(os.environ.get("DEPHASIM_OUT") or args.out)
        if args.parallel < 1:
            raise ValidationError("--parallel must be >= 1", "parallel")
        if args.dim is not None and args.dim < 2:
            raise ValidationError("--dim must be >= 2", "dim")
        paths, extra, failure = COMMANDS[args.command](bundle, args, out)
        append_manifest(out, {
            "command": args.command,
            "preset": args.preset,
            "parameters": bundle.to_config(),
            "options": {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
                        if k not in ("command", "preset_ranges", "config", "out", "parallel")} | extra,
            "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "outputs": [str(p) for p in paths],
        })
        if failure:
            raise ToleranceFailure(failure)
        return EXIT_OK
    except (ValidationError, DomainError) as exc:
        print(f"dephasim: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"dephasim: numerical failure: {exc}", file=sys.stderr)
        hint = getattr(exc, "suggested_dim", None)
        if hint:
            print(f"dephasim: try --dim {hint}", file=sys.stderr)
        return EXIT_TOLERANCE
    except OSError as exc:
        print(f"dephasim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
