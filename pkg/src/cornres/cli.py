"""Command-line interface.

Subcommands::

    spectral          print the oscillation rate, the profile norm
                      constant, and a slice of the exponent set
    resonances        print the table of resonance radii
    solve             solve one inner radius, write the field as VTK
    sweep             full experiment: CSV + report figure (+ fields)
    kernel-check      verify the resonant kernel mode against the mesh
    coercivity-check  probe the discrete coercivity floor

Exit codes: 0 success, 1 configuration error, 2 numerical failure.

Flags shared with the config file (``--kappa``, ``--seed``, ``--out``)
are merged into the config text and re-validated through the same
parser, so a bad flag fails exactly like a bad config line.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from .canonical import coercivity_probe, mode_determinant_root, kernel_residual_check
from .errors import ConfigError, CornresError
from .mesh import build_annulus_mesh, build_tcoercivity_mesh
from .plots import plot_field, plot_sweep
from .spectral import (
    Contrast,
    Regime,
    classify_contrast,
    lambda_set,
    resonance_deltas,
    spectral_data,
)
from .sweep import (
    SweepConfig,
    compare_resonances,
    detect_peaks,
    export_csv,
    export_field_vtk,
    parse_config,
    run_sweep,
    solve_one_delta,
)

PEAK_PROMINENCE = 3.0
KERNEL_MESHES = (32, 64, 128)
KERNEL_DECREASE = 1.5
COERCIVITY_TRIALS = 100
COERCIVITY_FLOOR = 1e-3


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors: exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config_text(path: Optional[str]) -> str:
    if path is None:
        return ""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def _merge_overrides(text: str, args) -> str:
    """Apply flag overrides by rewriting config lines, then re-parse.

    Dropping the conflicting keys first keeps the merged document valid
    under the fail-closed parser (e.g. ``--kappa`` replaces an existing
    ``sigma_minus`` choice instead of colliding with it).
    """
    drop = set()
    extra = []
    if getattr(args, "kappa", None) is not None:
        drop |= {"kappa", "sigma_minus"}
        extra.append(f"kappa = {args.kappa!r}")
    if getattr(args, "seed", None) is not None:
        drop.add("seed")
        extra.append(f"seed = {args.seed}")
    if getattr(args, "out", None) is not None:
        drop.add("out_dir")
        extra.append(f"out_dir = {args.out}")
    kept = []
    for line in text.splitlines():
        key = line.split("#", 1)[0].partition("=")[0].strip()
        if key in drop:
            continue
        kept.append(line)
    return "\n".join(kept + extra) + "\n"


def _config_from_args(args, need_grid: bool) -> SweepConfig:
    """Build the validated sweep configuration for a subcommand.

    Commands that do not sweep (``need_grid=False``) may run without a
    config file; a placeholder grid then satisfies the parser and only
    contrast / mesh / seed fields are consumed.
    """
    text = _read_config_text(getattr(args, "config", None))
    if not need_grid and "delta_min" not in text:
        text += "\ndelta_min = 0.1\ndelta_max = 0.9\nnum_delta = 2\n"
    if getattr(args, "kappa", None) is None and "kappa" not in text \
            and "sigma_minus" not in text:
        raise ConfigError("a contrast is required: pass --kappa or a config")
    return parse_config(_merge_overrides(text, args))


def _cmd_spectral(args) -> int:
    config = _config_from_args(args, need_grid=False)
    contrast = config.contrast
    regime = classify_contrast(contrast)
    print(f"kappa = {contrast.kappa:.12g}")
    print(f"regime = {regime.name}")
    if regime is not Regime.CRITICAL_INTERVAL:
        print("no oscillating pair outside the critical interval (-1, -1/3)")
        return 0
    data = spectral_data(contrast)
    print(f"mu = {data.mu:.12g}")
    print(f"c_phi = {data.c_phi:.12g}")
    exponents = lambda_set(contrast, re_bound=8.0)
    print("exponents with |Re| <= 8:")
    for value in exponents:
        print(f"  {value.real:+.12g} {value.imag:+.12g}i")
    return 0


def _cmd_resonances(args) -> int:
    config = _config_from_args(args, need_grid=False)
    contrast = config.contrast
    if classify_contrast(contrast) is not Regime.CRITICAL_INTERVAL:
        raise ConfigError(
            "resonance radii exist only inside the critical interval"
        )
    if args.count < 1:
        raise ConfigError("--count must be at least 1")
    print("n, delta_n")
    for n, delta_n in enumerate(
        resonance_deltas(contrast, args.count), start=1
    ):
        print(f"{n}, {delta_n:.17g}")
    return 0


def _require_unit_interval(value: float, flag: str) -> None:
    if not 0.0 < value < 1.0:
        raise ConfigError(f"{flag} must lie strictly inside (0, 1)")


def _cmd_solve(args) -> int:
    config = _config_from_args(args, need_grid=False)
    _require_unit_interval(args.delta, "--delta")
    record, solution = solve_one_delta(config, args.delta)
    if solution is None:
        print(
            f"delta = {args.delta:.6g}: factorization refused "
            "(near-singular system)",
            file=sys.stderr,
        )
        return 2
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"field_delta_{args.delta:.6g}.vtk")
    with open(path, "wb") as handle:
        handle.write(export_field_vtk(solution))
    print(f"delta = {record.delta:.6g}")
    print(f"h1_seminorm = {record.h1_seminorm:.12g}")
    print(f"l2_norm = {record.l2_norm:.12g}")
    print(f"smallest_singular = {record.smallest_singular:.12g}")
    print(f"wrote {path}")
    if args.figure:
        png = os.path.join(out_dir, f"field_delta_{args.delta:.6g}.png")
        plot_field(solution, png, title=f"delta = {args.delta:.6g}")
        print(f"wrote {png}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args, need_grid=True)
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)

    field_paths = []

    def save_field(record, solution):
        if not args.emit_fields:
            return
        index = len(field_paths)
        path = os.path.join(
            out_dir, f"field_{index:04d}_delta_{record.delta:.6g}.vtk"
        )
        with open(path, "wb") as handle:
            handle.write(export_field_vtk(solution))
        field_paths.append(path)

    records = run_sweep(config, on_solution=save_field)

    csv_path = os.path.join(out_dir, "sweep.csv")
    with open(csv_path, "wb") as handle:
        handle.write(export_csv(records))

    solved = sum(1 for r in records if r.status == "Ok")
    refused = len(records) - solved
    print(f"solved {solved} of {len(records)} points ({refused} near-singular)")
    print(f"wrote {csv_path}")
    if field_paths:
        print(f"wrote {len(field_paths)} field files")

    peaks = detect_peaks(records, PEAK_PROMINENCE)
    if peaks:
        print("detected peaks at delta:")
        for peak in peaks:
            print(f"  {peak:.6g}")
    else:
        print("no peaks detected")
    if classify_contrast(config.contrast) is Regime.CRITICAL_INTERVAL and peaks:
        report = compare_resonances(
            peaks,
            config.contrast,
            tolerance_ln=0.05,
            delta_range=(config.delta_min, config.delta_max),
        )
        for match in report.matches:
            print(
                f"  peak {match.peak_delta:.6g} ~ resonance n={match.n} "
                f"at {match.resonance_delta:.6g} "
                f"(|ln mismatch| {match.ln_mismatch:.2e})"
            )
        for peak in report.unmatched_peaks:
            print(f"  peak {peak:.6g} matches no resonance")
        for n, delta_n in report.missed_resonances:
            print(f"  resonance n={n} at {delta_n:.6g} drew no peak")

    png_path = os.path.join(out_dir, "sweep.png")
    plot_sweep(records, config.contrast, png_path, peaks=peaks)
    print(f"wrote {png_path}")
    return 0


def _cmd_kernel_check(args) -> int:
    config = _config_from_args(args, need_grid=False)
    contrast = config.contrast
    if classify_contrast(contrast) is not Regime.CRITICAL_INTERVAL:
        raise ConfigError(
            "kernel modes exist only inside the critical interval (-1, -1/3)"
        )
    if args.mode < 1:
        raise ConfigError("--mode must be a positive resonance index")
    delta = mode_determinant_root(contrast, args.mode)
    print(f"resonance radius delta^{args.mode} = {delta:.12g}")
    residuals = []
    for cells in KERNEL_MESHES:
        mesh = build_annulus_mesh(delta, cells, cells)
        residual = kernel_residual_check(contrast, delta, args.mode, mesh)
        residuals.append(residual)
        print(f"mesh {cells}x{cells}: relative kernel residual {residual:.3e}")
    for coarse, fine in zip(residuals, residuals[1:]):
        if coarse < KERNEL_DECREASE * fine:
            print(
                f"kernel residual not decreasing by {KERNEL_DECREASE}x "
                "per refinement",
                file=sys.stderr,
            )
            return 2
    print(f"kernel mode confirmed: residual decreasing >= {KERNEL_DECREASE}x")
    return 0


def _cmd_coercivity_check(args) -> int:
    config = _config_from_args(args, need_grid=False)
    _require_unit_interval(args.delta, "--delta")
    contrast = config.contrast
    kappa = contrast.kappa
    if kappa > -1.0:
        which, uniform = "t-plus", False
    else:
        which, uniform = "t-minus", True
    mesh = build_tcoercivity_mesh(
        args.delta, args.n_t, args.n_minus, uniform_plus=uniform
    )
    ratio = coercivity_probe(
        contrast, mesh, trials=COERCIVITY_TRIALS, which=which,
        seed=config.seed,
    )
    print(f"kappa = {kappa:.6g}, delta = {args.delta:.6g}, operator {which}")
    print(f"coercivity floor over {COERCIVITY_TRIALS} trials: {ratio:.6e}")
    if ratio < COERCIVITY_FLOOR:
        print(
            f"floor below {COERCIVITY_FLOOR:g}: the form degenerates here",
            file=sys.stderr,
        )
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cornres",
        description=(
            "Resonance analysis of a sign-changing transmission problem "
            "on an annulus sector"
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("--config", help="path to a key = value config file")
        sub.add_argument("--out", help="output directory (overrides config)")
        sub.add_argument(
            "--kappa", type=float,
            help="contrast ratio (overrides config contrast)",
        )
        sub.add_argument(
            "--seed", type=int, help="random seed (overrides config)"
        )

    sub = commands.add_parser(
        "spectral", help="print the oscillating-exponent data"
    )
    common(sub)
    sub.set_defaults(handler=_cmd_spectral)

    sub = commands.add_parser(
        "resonances", help="print the resonance-radius table"
    )
    common(sub)
    sub.add_argument(
        "--count", type=int, default=10, help="how many radii (default 10)"
    )
    sub.set_defaults(handler=_cmd_resonances)

    sub = commands.add_parser("solve", help="solve one inner radius")
    common(sub)
    sub.add_argument(
        "--delta", type=float, required=True, help="inner radius in (0, 1)"
    )
    sub.add_argument(
        "--figure", action="store_true", help="also render the field as PNG"
    )
    sub.set_defaults(handler=_cmd_solve)

    sub = commands.add_parser("sweep", help="run the full delta sweep")
    common(sub)
    sub.add_argument(
        "--emit-fields", action="store_true",
        help="write a VTK field per solved delta",
    )
    sub.set_defaults(handler=_cmd_sweep)

    sub = commands.add_parser(
        "kernel-check", help="verify the resonant kernel mode on meshes"
    )
    common(sub)
    sub.add_argument(
        "--mode", type=int, default=1, help="resonance index n (default 1)"
    )
    sub.set_defaults(handler=_cmd_kernel_check)

    sub = commands.add_parser(
        "coercivity-check", help="probe the discrete coercivity floor"
    )
    common(sub)
    sub.add_argument(
        "--delta", type=float, default=0.3, help="inner radius (default 0.3)"
    )
    sub.add_argument(
        "--n-t", type=int, default=32, help="radial cells (default 32)"
    )
    sub.add_argument(
        "--n-minus", type=int, default=16,
        help="angular cells in the negative sector (default 16)",
    )
    sub.set_defaults(handler=_cmd_coercivity_check)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CornresError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
