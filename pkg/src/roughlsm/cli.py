"""User-facing pipeline: flat-file configs, forward synthesis, sampling
inversion, preset experiment sweeps, and portable outputs.

Commands
--------
synthesize    solve the forward problem and write a near-field matrix file
noise         apply calibrated noise to an existing matrix file
invert        run the sampling inversion on a matrix file
experiment    run a named preset sweep (ex1..ex6) and write a summary table
green-table   dump kernel samples along a receiver segment for debugging

Config files are flat ``key = value`` text (``#`` comments, blank lines
allowed).  Unknown keys are rejected so a stored config never drifts silently
from what a run actually used; every key has a command-line flag of the same
name that takes precedence.  See ``_KEYS`` for the schema.

Outputs per inversion: the indicator field as CSV, an 8-bit grayscale heatmap
PNG (one pixel per grid node, top row = largest x2, value = round(255*NInd)),
and an overlay of the extracted interface against the true profile (CSV plus
a rendered figure).  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, FileFormatError, NumericalError
from .forward import NearFieldMatrix, add_noise, synthesize
from .geometry import (
    HalfDiskInterface,
    InterfaceProfile,
    MeasurementLine,
    SamplingGrid,
)
from .inversion import (
    IndicatorField,
    TikhonovConfig,
    extract_interface,
    indicator_map,
    separation_metric,
)
from .layered_green import KernelTabulator, Medium

__all__ = ["ExperimentConfig", "PRESET_NAMES", "main"]

log = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# configuration schema
# ----------------------------------------------------------------------

def _parse_pair(text: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'lo,hi', got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip() != "")


def _parse_optional_float(text: str) -> float | None:
    return None if text.strip() == "" else float(text)


# key -> (parser, default-as-text, help).  This single table drives both the
# config-file reader and the command-line flags.
_KEYS: dict[str, tuple] = {
    "profile": (str, "flat", "interface profile: flat, bspline_f1, gaussians_f2, oscillatory_f3, composite_f6"),
    "profile_file": (str, "", "two-column sample table overriding 'profile' (piecewise linear)"),
    "kappa1": (float, "1.0", "wavenumber above the interface"),
    "kappa2": (float, "2.0", "wavenumber below the interface"),
    "a": (float, "15.0", "half-width of the measurement segment"),
    "b": (float, "0.55", "height of the measurement segment"),
    "n": (int, "201", "number of measurement points"),
    "grid_x1": (_parse_pair, "-10,10", "sampling-grid x1 range 'lo,hi'"),
    "grid_x2": (_parse_pair, "-1,0.5", "sampling-grid x2 range 'lo,hi'"),
    "step_x1": (float, "0.5", "sampling-grid step along x1"),
    "step_x2": (float, "0.1", "sampling-grid step along x2"),
    "alpha": (float, "5e-5", "Tikhonov regularization parameter"),
    "delta": (_parse_float_list, "0.0", "comma list of relative noise levels"),
    "seed": (int, "42", "noise generator seed"),
    "variant": (str, "raw", "near-field operator variant: raw or modified"),
    "gr_radius": (float, "2.0", "half-disk reference radius (modified variant)"),
    "mesh_h": (_parse_optional_float, "", "volume-mesh cell width; empty = wavelength2/20"),
    "cutoff": (float, "0.5", "indicator cutoff for interface extraction"),
    "outdir": (str, "out", "output directory"),
}

PRESET_NAMES = ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6")


@dataclass(frozen=True)
class ExperimentConfig:
    """One resolved run configuration (see _KEYS for field meanings)."""

    profile: str
    profile_file: str
    kappa1: float
    kappa2: float
    a: float
    b: float
    n: int
    grid_x1: tuple[float, float]
    grid_x2: tuple[float, float]
    step_x1: float
    step_x2: float
    alpha: float
    delta: tuple[float, ...]
    seed: int
    variant: str
    gr_radius: float
    mesh_h: float | None
    cutoff: float
    outdir: str

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "a", "step_x1", "step_x2", "alpha",
                     "gr_radius", "cutoff"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if any(d < 0.0 for d in self.delta):
            raise ConfigError("noise levels must be nonnegative")
        if self.variant not in ("raw", "modified"):
            raise ConfigError(f"variant must be raw or modified, got {self.variant!r}")
        if self.mesh_h is not None and not self.mesh_h > 0.0:
            raise ConfigError("mesh_h must be positive")

    # -- derived objects ------------------------------------------------
    def interface(self) -> InterfaceProfile:
        if self.profile_file:
            return InterfaceProfile.from_table_file(self.profile_file)
        return InterfaceProfile.builtin(self.profile)

    def medium(self) -> Medium:
        return Medium(self.kappa1, self.kappa2)

    def line(self) -> MeasurementLine:
        return MeasurementLine(self.a, self.b, self.n)

    def grid(self) -> SamplingGrid:
        return SamplingGrid(self.grid_x1, self.grid_x2, self.step_x1, self.step_x2)

    def cell_width(self) -> float:
        # default: data error stays below the smallest noise level studied
        return self.mesh_h if self.mesh_h is not None else self.medium().wavelength2 / 20.0

    def half_disk(self) -> HalfDiskInterface | None:
        return HalfDiskInterface(self.gr_radius) if self.variant == "modified" else None


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` text; unknown keys are an error."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, val = text.partition("=")
            key = key.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = val.strip()
    return values


def resolve_config(file_values: dict[str, str], flag_values: dict[str, str]) -> ExperimentConfig:
    """defaults < config file < explicit flags, all parsed from text."""
    merged = {k: spec[1] for k, spec in _KEYS.items()}
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    parsed = {}
    for key, (parser, _, _) in _KEYS.items():
        try:
            parsed[key] = parser(merged[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    return ExperimentConfig(**parsed)


def write_config_file(cfg: ExperimentConfig, path) -> None:
    """Record the exact configuration a run used, in readable form."""
    def fmt(value):
        if isinstance(value, tuple):
            return ",".join(repr(float(v)) for v in value)
        if value is None:
            return ""
        return repr(value) if isinstance(value, float) else str(value)

    with open(path, "w", encoding="utf-8") as fh:
        for key in _KEYS:
            fh.write(f"{key} = {fmt(getattr(cfg, key))}\n")


# ----------------------------------------------------------------------
# artifact writers
# ----------------------------------------------------------------------

def write_heatmap(field: IndicatorField, path) -> None:
    """8-bit grayscale PNG, one pixel per grid node; the first pixel row is
    the grid row with the largest x2 and brightness is round(255 * NInd)."""
    pixels = np.rint(255.0 * field.values).astype(np.uint8)
    Image.fromarray(pixels, mode="L").save(path, format="PNG")


def write_overlay(field: IndicatorField, profile: InterfaceProfile | None,
                  cutoff: float, csv_path, fig_path) -> None:
    """Extracted interface estimate next to the true profile (when known),
    as CSV and as a rendered figure."""
    xs, estimate = extract_interface(field, cutoff)
    truth = profile(xs) if profile is not None else None
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write(f"# cutoff={cutoff!r}\n")
        fh.write("x1,true_f,estimate\n")
        for j, x in enumerate(xs):
            t = "" if truth is None else repr(float(truth[j]))
            e = "" if np.isnan(estimate[j]) else repr(float(estimate[j]))
            fh.write(f"{float(x)!r},{t},{e}\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 3.2))
    if truth is not None:
        dense = np.linspace(field.grid.x_range[0], field.grid.x_range[1], 1201)
        ax.plot(dense, profile(dense), "k-", lw=1.2, label="true interface")
    ax.plot(xs, estimate, "rs", ms=4, label=f"estimate (C={cutoff:g})")
    ax.axhline(0.0, color="0.6", lw=0.6, zorder=0)
    ax.set_xlim(field.grid.x_range)
    ax.set_ylim(field.grid.y_range)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


def write_summary(rows: list[dict], csv_path, fig_path) -> None:
    """Per-run separation metrics as CSV and a single comparison figure."""
    cols = ["label", "profile", "kappa2", "n", "a", "b", "delta", "alpha",
            "mesh_h", "separation", "synth_seconds", "invert_seconds"]
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    labels = [row["label"] for row in rows]
    seps = [row["separation"] for row in rows]
    ax.bar(range(len(rows)), seps, color="0.35")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("separation factor")
    ax.axhline(1.0, color="0.6", lw=0.6)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def _known_profile(matrix: NearFieldMatrix) -> InterfaceProfile | None:
    try:
        return InterfaceProfile.builtin(matrix.profile_id)
    except ConfigError:
        return None


def cmd_synthesize(cfg: ExperimentConfig, out_path, csv_path=None, threads: int = 1) -> int:
    profile = cfg.interface()
    started = time.perf_counter()
    matrix = synthesize(
        profile,
        cfg.medium(),
        cfg.line(),
        variant=cfg.variant,
        gr=cfg.half_disk(),
        cell_width=cfg.cell_width(),
        threads=threads,
    )
    elapsed = time.perf_counter() - started
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    matrix.save(out_path)
    if csv_path is not None:
        matrix.to_csv(csv_path)
    print(f"synthesize: {matrix.n}x{matrix.n} {cfg.variant} matrix "
          f"({profile.kind}, kappa2={cfg.kappa2:g}, h={cfg.cell_width():.5g}) "
          f"in {elapsed:.2f}s -> {out_path}")
    return 0


def cmd_noise(matrix_path, delta: float, seed: int, out_path) -> int:
    matrix = NearFieldMatrix.load(matrix_path)
    noisy = add_noise(matrix, delta, seed)
    noisy.save(out_path)
    print(f"noise: delta={delta:g} seed={seed} -> {out_path}")
    return 0


def cmd_invert(matrix_path, cfg: ExperimentConfig, outdir) -> int:
    matrix = NearFieldMatrix.load(matrix_path)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    field = indicator_map(
        matrix,
        cfg.grid(),
        TikhonovConfig(cfg.alpha),
        gr=HalfDiskInterface(cfg.gr_radius) if matrix.variant == "modified" else None,
    )
    elapsed = time.perf_counter() - started
    field.to_csv(outdir / "field.csv", cutoff=cfg.cutoff)
    write_heatmap(field, outdir / "heatmap.png")
    profile = _known_profile(matrix)
    write_overlay(field, profile, cfg.cutoff, outdir / "overlay.csv", outdir / "overlay.png")
    msg = (f"invert: {matrix.variant} N={matrix.n} delta={matrix.noise_level:g} "
           f"alpha={cfg.alpha:g} in {elapsed:.2f}s -> {outdir}")
    if profile is not None and profile.kind != "flat":
        try:
            msg += f" (separation={separation_metric(field, profile):.3f})"
        except NumericalError:
            pass  # grid too small to straddle the interface; artifacts still valid
    print(msg)
    return 0


# preset sweeps: base overrides per example, plus the swept key when any.
_PRESETS: dict[str, dict] = {
    "ex1": {"profile": "bspline_f1", "grid_x2": "-1,0.5", "b": "0.55",
            "delta": "0,0.02,0.05"},
    "ex2": {"profile": "gaussians_f2", "grid_x2": "-1,0.2", "b": "0.25",
            "delta": "0,0.02,0.05"},
    "ex3": {"profile": "oscillatory_f3", "grid_x2": "-1,0.5", "b": "0.55",
            "delta": "0,0.02,0.05"},
    "ex4": {"profile": "bspline_f1", "grid_x2": "-1,0.5", "b": "0.55",
            "delta": "0.02", "_sweep": ("n", ("201", "401", "601"))},
    "ex5": {"profile": "gaussians_f2", "grid_x2": "-1,0.2",
            "delta": "0.02", "_sweep": ("b", ("0.25", "0.65", "1.05"))},
    "ex6": {"profile": "composite_f6", "grid_x2": "-1,0.5", "b": "0.55",
            "delta": "0.02", "_sweep": ("a", ("2", "8", "14"))},
}

_SCALES = {
    "desk": {"kappa2": "2.0", "n": "201"},
    "paper": {"kappa2": "10.0", "n": "601"},
}


def preset_configs(name: str, scale: str, outdir: str) -> list[tuple[str, ExperimentConfig]]:
    """(label, config) pairs for one preset; sweeps expand to one pair each."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {PRESET_NAMES}")
    if scale not in _SCALES:
        raise ConfigError(f"unknown scale {scale!r}; choose desk or paper")
    base = dict(_PRESETS[name])
    sweep = base.pop("_sweep", None)
    base.update(_SCALES[scale])
    base["outdir"] = outdir
    # presets pin their own noise draw so published sweeps stay comparable
    base.setdefault("seed", "0")
    if sweep is None:
        return [(f"{name}_{scale}", resolve_config(base, {}))]
    key, values = sweep
    out = []
    for value in values:
        run = dict(base)
        run[key] = value
        out.append((f"{name}_{scale}_{key}{value}", resolve_config(run, {})))
    return out


def cmd_experiment(name: str, scale: str, outdir, threads: int = 1) -> int:
    root = Path(outdir) / f"{name}_{scale}"
    root.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    for label, cfg in preset_configs(name, scale, str(root)):
        profile = cfg.interface()
        started = time.perf_counter()
        clean = synthesize(
            profile, cfg.medium(), cfg.line(),
            variant=cfg.variant, gr=cfg.half_disk(),
            cell_width=cfg.cell_width(), threads=threads,
        )
        synth_seconds = time.perf_counter() - started
        for delta in cfg.delta:
            run_label = f"{label}_delta{delta:g}"
            rundir = root / run_label
            rundir.mkdir(parents=True, exist_ok=True)
            matrix = add_noise(clean, delta, cfg.seed)
            matrix.save(rundir / "matrix.nfm")
            write_config_file(cfg, rundir / "config.txt")
            started = time.perf_counter()
            field = indicator_map(matrix, cfg.grid(), TikhonovConfig(cfg.alpha),
                                  gr=cfg.half_disk(), cell_width=cfg.cell_width())
            invert_seconds = time.perf_counter() - started
            field.to_csv(rundir / "field.csv", cutoff=cfg.cutoff)
            write_heatmap(field, rundir / "heatmap.png")
            write_overlay(field, profile, cfg.cutoff,
                          rundir / "overlay.csv", rundir / "overlay.png")
            separation = separation_metric(field, profile)
            rows.append({
                "label": run_label, "profile": cfg.profile, "kappa2": cfg.kappa2,
                "n": cfg.n, "a": cfg.a, "b": cfg.b, "delta": delta,
                "alpha": cfg.alpha, "mesh_h": cfg.cell_width(),
                "separation": round(separation, 6),
                "synth_seconds": round(synth_seconds, 2),
                "invert_seconds": round(invert_seconds, 2),
            })
            print(f"{run_label}: separation={separation:.3f} "
                  f"(synth {synth_seconds:.1f}s, invert {invert_seconds:.1f}s)")
    write_summary(rows, root / "summary.csv", root / "summary.png")
    print(f"experiment {name} ({scale}): {len(rows)} runs -> {root}")
    return 0


def cmd_green_table(kappa1: float, kappa2: float, source: tuple[float, float],
                    segment: tuple[float, float, float], count: int,
                    gr_radius: float | None, mesh_h: float | None, out) -> int:
    """Kernel samples g0(x, y) (and G_r^s(x, y) when a radius is given) for x
    on a horizontal segment and a fixed source y."""
    medium = Medium(kappa1, kappa2)
    x_lo, x_hi, height = segment
    xs = np.linspace(x_lo, x_hi, count)
    targets = np.column_stack([xs, np.full(count, height)])
    tab = KernelTabulator(medium)
    g0 = tab.g0_matrix(targets, np.asarray([source], dtype=float))[:, 0]
    grs = None
    if gr_radius is not None:
        from .forward import _gr_scattered_many
        h = mesh_h if mesh_h is not None else medium.wavelength2 / 20.0
        grs = _gr_scattered_many(
            medium, HalfDiskInterface(gr_radius),
            np.asarray([source], dtype=float), targets, h, tabulator=tab,
        )[:, 0]
    lines = ["x1,x2,re_g0,im_g0" + (",re_grs,im_grs" if grs is not None else "")]
    for j in range(count):
        row = (f"{float(xs[j])!r},{float(height)!r},"
               f"{float(g0[j].real)!r},{float(g0[j].imag)!r}")
        if grs is not None:
            row += f",{float(grs[j].real)!r},{float(grs[j].imag)!r}"
        lines.append(row)
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="ascii") as fh:
            fh.write(text)
    return 0


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    for key, (_, default, help_text) in _KEYS.items():
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None,
                            metavar="V", help=f"{help_text} (default {default!r})")


def _collect_flags(args: argparse.Namespace) -> dict[str, str]:
    return {key: getattr(args, key) for key in _KEYS if getattr(args, key, None) is not None}


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else {}
    return resolve_config(file_values, _collect_flags(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughlsm",
        description="Near-field synthesis and sampling-method reconstruction "
                    "of a locally perturbed interface between two acoustic "
                    "half-spaces.",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="worker-thread cap for kernel tabulation")
    parser.add_argument("--verbose", action="store_true",
                        help="log solver diagnostics (condition estimates etc.)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="solve the forward problem, write a matrix file")
    _add_config_flags(p)
    p.add_argument("--out", default=None, help="matrix file path (default <outdir>/matrix.nfm)")
    p.add_argument("--csv", default=None, help="also export entries as CSV to this path")

    p = sub.add_parser("noise", help="apply calibrated noise to a matrix file")
    p.add_argument("--matrix", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = sub.add_parser("invert", help="run the sampling inversion on a matrix file")
    _add_config_flags(p)
    p.add_argument("--matrix", required=True)

    p = sub.add_parser("experiment", help="run a preset sweep and summarize")
    p.add_argument("name", choices=PRESET_NAMES)
    p.add_argument("--scale", choices=sorted(_SCALES), default="desk")
    p.add_argument("--outdir", default="out")

    p = sub.add_parser("green-table", help="dump kernel samples for debugging")
    p.add_argument("--kappa1", type=float, default=1.0)
    p.add_argument("--kappa2", type=float, default=2.0)
    p.add_argument("--source", type=_parse_pair, default=(0.0, 1.0), metavar="X,Y")
    p.add_argument("--segment", default="-2,2,0.5", metavar="LO,HI,HEIGHT",
                   help="receiver segment: x range and height")
    p.add_argument("--count", type=int, default=21)
    p.add_argument("--gr-radius", type=float, default=None,
                   help="also tabulate the half-disk reference scattered field")
    p.add_argument("--mesh-h", type=float, default=None)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(message)s",
        stream=sys.stdout,
    )
    try:
        if args.command == "synthesize":
            cfg = _resolve(args)
            out = args.out if args.out else str(Path(cfg.outdir) / "matrix.nfm")
            return cmd_synthesize(cfg, out, csv_path=args.csv, threads=args.threads)
        if args.command == "noise":
            return cmd_noise(args.matrix, args.delta, args.seed, args.out)
        if args.command == "invert":
            cfg = _resolve(args)
            return cmd_invert(args.matrix, cfg, cfg.outdir)
        if args.command == "experiment":
            return cmd_experiment(args.name, args.scale, args.outdir, threads=args.threads)
        if args.command == "green-table":
            segment = tuple(float(v) for v in args.segment.split(","))
            if len(segment) != 3:
                raise ConfigError("--segment expects 'lo,hi,height'")
            return cmd_green_table(args.kappa1, args.kappa2, args.source, segment,
                                   args.count, args.gr_radius, args.mesh_h, args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
