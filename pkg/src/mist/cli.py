"""Command line front end: ``mist simulate | reconstruct | cnr | sweep``.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 degenerate
linear system. Reports are plain ``key = value`` text.
"""
import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import DegenerateSystemError, Geometry, MistError
from .diffops import StencilScheme
from .experiments import CnrScenario, SimulationParams, cnr_sweep, simulate, solve
from .io import (
    ConfigError,
    display_copy,
    ensure_dir,
    load_pairs,
    parse_key_values,
    parse_pairs,
    read_field,
    read_run_config,
    write_field,
    write_key_values,
)
from .metrics import Roi, cnr_stats, rms_relative_error
from .phase import PoissonOptions, with_phase
from .solver import SolverOptions, solve_tensor

log = logging.getLogger("mist")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Path):
        return v.as_posix()
    return str(v)


def _stats(prefix, values):
    return [
        (f"{prefix}_mean", float(np.mean(values))),
        (f"{prefix}_std", float(np.std(values))),
        (f"{prefix}_min", float(np.min(values))),
        (f"{prefix}_max", float(np.max(values))),
    ]


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args):
    params = SimulationParams(
        seed=args.seed, size=args.size, pitch=args.pitch, delta=args.delta,
        energy=args.energy, correlation_length=args.correlation_length,
        contrast=args.contrast, phase_amplitude=args.phase_amplitude,
        phase_sigma=args.phase_sigma, diffusion_peak=args.diffusion_peak,
        diffusion_sigma=args.diffusion_sigma, anisotropy=args.anisotropy,
        n_positions=args.n_positions, noise=args.noise, mode=args.mode,
        scheme=args.scheme, boundary=args.boundary,
    )
    try:
        params = params.resolved()
        sim = simulate(params)
    except ValueError as exc:
        # every input comes from flags, so a rejected value is a usage error
        raise UsageError(str(exc)) from None
    out = ensure_dir(args.out_dir)
    ext = args.format
    manifest = [("command", "simulate"), ("format", ext)]
    manifest += [(k, getattr(params, k)) for k in params.__dataclass_fields__]
    manifest.append(("wave_number", params.geometry.wave_number))
    for i, (r, s) in enumerate(zip(sim.references, sim.samples)):
        for role, f in (("reference", r), ("sample", s)):
            name = f"{role}_{i:02d}.{ext}"
            write_field(f, out / name)
            manifest.append((f"{role}_{i}", name))
    for name, f in sim.truth.items():
        fname = f"truth_{name}.{ext}"
        write_field(f, out / fname)
        manifest.append((f"truth_{name}", fname))
    write_key_values(out / "manifest.txt", [(k, _fmt(v)) for k, v in manifest])
    print(f"wrote {2 * params.n_positions} images and {len(sim.truth)} truth fields to {out}")
    return EXIT_OK


# --- reconstruct ------------------------------------------------------------

def _from_manifest(path):
    path = Path(path)
    values = parse_key_values(path.read_text(), str(path))
    try:
        n = int(values["n_positions"])
        g = Geometry(float(values["delta"]), float(values["energy"]), float(values["pitch"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: incomplete manifest ({exc})") from None
    text = ", ".join(f"{values[f'reference_{i}']} {values[f'sample_{i}']}" for i in range(n))
    return g, parse_pairs(text, path.parent, str(path))


def _reconstruct_inputs(args):
    """Resolve geometry, pair paths, scheme, epsilon and output dir from the flags."""
    sources = sum(x is not None for x in (args.config, args.manifest, args.pair))
    if sources != 1:
        raise UsageError("give exactly one of --config, --manifest or --pair")
    scheme_name, boundary, epsilon = args.scheme, args.boundary, args.epsilon
    out_dir = args.out_dir
    if args.config:
        cfg = read_run_config(args.config)
        g, pair_paths = cfg.geometry, cfg.pairs
        scheme_name = scheme_name or cfg.scheme.kind.value
        boundary = boundary or cfg.scheme.boundary.value
        epsilon = cfg.epsilon if epsilon is None else epsilon
        out_dir = out_dir or cfg.output_dir
    else:
        if args.manifest:
            g, pair_paths = _from_manifest(args.manifest)
        else:
            if len(args.pair) < 2:
                raise UsageError(f"need at least 2 --pair entries, got {len(args.pair)}")
            missing = [f for f in ("delta", "energy", "pitch") if getattr(args, f) is None]
            if missing:
                raise UsageError("--pair requires " + ", ".join("--" + m for m in missing))
            g = Geometry(args.delta, args.energy, args.pitch)
            pair_paths = [(Path(r), Path(s)) for r, s in args.pair]
    if len(pair_paths) < 2:
        raise UsageError(f"need at least 2 speckle pairs, got {len(pair_paths)}")
    if args.tensor and len(pair_paths) < 4:
        raise UsageError(f"--tensor needs at least 4 pairs, got {len(pair_paths)}")
    if out_dir is None:
        raise UsageError("--out-dir is required")
    try:
        scheme = StencilScheme(scheme_name or "five_point_fd", boundary or "mirror")
        opts = SolverOptions(1e-6 if epsilon is None else epsilon, args.clamp_display, scheme)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return g, pair_paths, opts, Path(out_dir)


def cmd_reconstruct(args):
    g, pair_paths, opts, out = _reconstruct_inputs(args)
    pairs = load_pairs(pair_paths, pitch=g.pitch)
    out = ensure_dir(out)
    ext = args.format
    t0 = time.perf_counter()
    if args.tensor:
        result = solve_tensor(pairs, g, opts)
        solver_name = "tensor_least_squares"
    else:
        result = with_phase(solve(pairs, g, opts), PoissonOptions(args.even_extension))
        solver_name = "two_shot" if len(pairs) == 2 else "least_squares"
    elapsed = time.perf_counter() - t0

    report = [
        ("command", "reconstruct"),
        ("solver", solver_name),
        ("n_pairs", len(pairs)),
    ]
    for i, (r, s) in enumerate(pair_paths):
        report += [(f"reference_{i}", Path(r).resolve()), (f"sample_{i}", Path(s).resolve())]
    report += [
        ("delta_m", g.delta), ("energy_ev", g.energy), ("pitch_m", g.pitch),
        ("wave_number", g.wave_number),
        ("scheme", opts.scheme.kind.value), ("boundary", opts.scheme.boundary.value),
        ("epsilon", opts.denominator_epsilon), ("clamp_display", opts.clamp_negative_d),
        ("even_extension", args.even_extension), ("border", args.border),
        ("format", ext), ("figures", not args.no_figures),
        ("wall_clock_s", elapsed),
        ("n_degenerate", int(result.degenerate.sum())),
    ]

    outputs = {"lap_phi": result.lap_phi, "residual_rms": result.residual_rms}
    if args.tensor:
        outputs.update(d_xx=result.d_xx, d_yy=result.d_yy, d_xy=result.d_xy)
    else:
        outputs.update(d_eff=result.d_eff, phi=result.phi)
    outputs["degenerate_mask"] = result.lap_phi.like(result.degenerate.astype(float))
    for name, f in outputs.items():
        write_field(f, out / f"{name}.{ext}")
        if name != "degenerate_mask":
            report += _stats(name, f.values)

    display_names = ["d_xx", "d_yy", "d_xy"] if args.tensor else ["d_eff"]
    for name in display_names:
        write_field(display_copy(outputs[name], opts.clamp_negative_d), out / f"{name}_display.{ext}")

    if args.truth:
        truth = read_field(args.truth, pitch=g.pitch)
        key = "d_xx" if args.tensor else "d_eff"
        report.append(("truth", Path(args.truth).resolve()))
        report.append((f"{key}_rms_rel_error", rms_relative_error(outputs[key], truth, args.border)))

    if not args.no_figures:
        from .plotting import save_named_field

        for name in display_names + ["lap_phi"] + ([] if args.tensor else ["phi"]):
            f = outputs[name]
            if name in display_names:
                f = display_copy(f, opts.clamp_negative_d)
            save_named_field(name, f, out / f"{name}.png")

    write_key_values(out / "report.txt", [(k, _fmt(v)) for k, v in report])
    for k, v in report:
        if k in ("solver", "n_pairs", "wall_clock_s", "n_degenerate") or k.endswith("rms_rel_error"):
            print(f"{k} = {_fmt(v)}")
    return EXIT_OK


# --- cnr --------------------------------------------------------------------

def cmd_cnr(args):
    try:
        bg, fg = Roi.parse(args.background), Roi.parse(args.feature)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    f = read_field(args.field, pitch=args.pitch)
    try:
        s = cnr_stats(f, bg, fg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"cnr = {s.cnr:#.4g}")
    print(f"mean_background = {s.mean_background:#.6g}")
    print(f"mean_feature = {s.mean_feature:#.6g}")
    print(f"std_background = {s.std_background:#.6g}")
    return EXIT_OK


# --- sweep ------------------------------------------------------------------

def cmd_sweep(args):
    try:
        n_values = [int(v) for v in args.n_values.split(",")]
    except ValueError:
        raise UsageError(f"--n-values must be comma-separated integers: {args.n_values!r}") from None
    if min(n_values) < 2:
        raise UsageError("every N in --n-values must be at least 2")
    scenario = CnrScenario(seed=args.seed, noise=args.noise)
    out = ensure_dir(args.out_dir)
    rows = cnr_sweep(n_values, scenario)
    report = [("command", "sweep"), ("seed", args.seed), ("noise", args.noise),
              ("n_values", ",".join(map(str, n_values)))]
    for n, s, _ in rows:
        report += [(f"cnr_n{n}", s.cnr), (f"std_background_n{n}", s.std_background)]
        print(f"N = {n}: cnr = {s.cnr:#.4g}")
    cnrs = [s.cnr for _, s, _ in rows]
    report.append(("monotone_non_decreasing", all(b >= a for a, b in zip(cnrs, cnrs[1:]))))
    write_key_values(out / "sweep.txt", [(k, _fmt(v)) for k, v in report])
    if not args.no_figures:
        from .plotting import save_cnr_sweep

        save_cnr_sweep(n_values, cnrs, out / "cnr_vs_n.png", [d for *_, d in rows], 5.8e-6)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="mist", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate synthetic reference/sample pairs and truth maps")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--pitch", type=_positive_float, default=5.8e-6, help="m")
    s.add_argument("--delta", type=_positive_float, default=1.0, help="propagation distance, m")
    s.add_argument("--energy", type=_positive_float, default=17000.0, help="eV")
    s.add_argument("--correlation-length", type=_positive_float, help="speckle size, m (default 2 px)")
    s.add_argument("--contrast", type=float, default=0.2)
    s.add_argument("--phase-amplitude", type=float, default=1.0, help="rad")
    s.add_argument("--phase-sigma", type=_positive_float, help="m (default 40 px)")
    s.add_argument("--diffusion-peak", type=float, default=5e-11, help="m")
    s.add_argument("--diffusion-sigma", type=_positive_float, help="m (default 80 px)")
    s.add_argument("--anisotropy", type=float, default=2.0, help="D_xx/D_yy in tensor mode")
    s.add_argument("--n-positions", type=int, default=2)
    s.add_argument("--noise", type=float, default=0.0, help="relative std of added noise")
    s.add_argument("--mode", choices=["full", "simplified", "tensor"], default="simplified")
    s.add_argument("--scheme", choices=["five_point_fd", "spectral_fourier"], default="five_point_fd")
    s.add_argument("--boundary", choices=["mirror", "periodic"], default="mirror")
    s.add_argument("--format", choices=["raw", "pfm"], default="raw")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="recover lap(phi), D_eff and phi from speckle pairs")
    r.add_argument("--config", help="key = value run configuration file")
    r.add_argument("--manifest", help="manifest.txt written by 'mist simulate'")
    r.add_argument("--pair", nargs=2, action="append", metavar=("REFERENCE", "SAMPLE"))
    r.add_argument("--delta", type=_positive_float)
    r.add_argument("--energy", type=_positive_float)
    r.add_argument("--pitch", type=_positive_float)
    r.add_argument("--out-dir")
    r.add_argument("--scheme", choices=["five_point_fd", "spectral_fourier"])
    r.add_argument("--boundary", choices=["mirror", "periodic"])
    r.add_argument("--epsilon", type=float, help="degenerate-pixel threshold relative to the median")
    r.add_argument("--tensor", action="store_true", help="solve for the diffusion tensor (N >= 4)")
    r.add_argument("--truth", help="ground-truth D_eff (or D_xx with --tensor) for an error report")
    r.add_argument("--border", type=int, default=8, help="border excluded from error metrics, px")
    r.add_argument("--clamp-display", action="store_true",
                   help="clamp negative diffusion values in display copies and figures")
    r.add_argument("--even-extension", action="store_true",
                   help="mirror-extend lap(phi) before the FFT integration")
    r.add_argument("--format", choices=["raw", "pfm"], default="raw")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_reconstruct)

    c = sub.add_parser("cnr", help="contrast-to-noise ratio of a field between two ROIs")
    c.add_argument("field")
    c.add_argument("--background", required=True, metavar="X0,Y0,W,H")
    c.add_argument("--feature", required=True, metavar="X0,Y0,W,H")
    c.add_argument("--pitch", type=_positive_float)
    c.set_defaults(func=cmd_cnr)

    w = sub.add_parser("sweep", help="synthetic CNR-versus-N experiment")
    w.add_argument("--out-dir", required=True)
    w.add_argument("--n-values", default="2,4,10")
    w.add_argument("--noise", type=float, default=0.01)
    w.add_argument("--seed", type=int, default=7)
    w.add_argument("--no-figures", action="store_true")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mist {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateSystemError as exc:
        print(f"mist {args.command}: degenerate system: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (MistError, ValueError, OSError) as exc:
        print(f"mist {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
