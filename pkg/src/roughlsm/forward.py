"""Forward synthesis of near-field scattering data.

The perturbed interface is handled as a volume contrast against the flat
two-layer background: the total field u(., y) for a point source at y solves

    u(x) = G0(x, y) + Int_D q(z) G0(x, z) u(z) dz,

where D is the region between the interface and the plane and q = kappa_true^2
- kappa_flat^2 is +eta below the plane and -eta above it (eta = kappa1^2 -
kappa2^2).  A midpoint rule on the square-cell mesh turns this into a dense
linear system that is factorized once and swept over all sources.

The kernel is weakly singular, so the diagonal cell uses an equivalent-area
disk: the free-space part is integrated in closed form over the disk of equal
area, while the smooth layered correction is evaluated at the center like any
other cell.

The same machinery evaluates the scattered part of the half-disk reference
field G_r (uniform contrast +eta on the half-disk of radius r below the
origin), which the modified data variant subtracts from the raw scattered
field.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, FileFormatError, NumericalError
from .geometry import (
    HalfDiskInterface,
    InterfaceProfile,
    MeasurementLine,
    PerturbationMesh,
    build_half_disk_mesh,
    build_mesh,
)
from .layered_green import KernelTabulator, Medium
from .specfun import hankel1_1

__all__ = [
    "NearFieldMatrix",
    "LSSystem",
    "disk_phi_integral",
    "assemble_ls",
    "solve_total_field",
    "scattered_field",
    "gr_scattered",
    "synthesize",
    "add_noise",
]

logger = logging.getLogger(__name__)

_MAGIC = b"#roughlsm-nearfield v1\n"
_VARIANTS = ("raw", "modified")


def disk_phi_integral(kappa: float, radius: float) -> complex:
    """Integral of phi_kappa(0, .) over the disk of the given radius.

    In polar coordinates the integral reduces to (i/4) 2 pi Int_0^R
    H0(kappa t) t dt, and (t H1(t))' = t H0(t) with t H1(t) -> -2i/pi as
    t -> 0 gives the closed form

        (i pi R / (2 kappa)) H1(kappa R) - 1 / kappa^2.
    """
    if radius <= 0.0 or kappa <= 0.0:
        raise ValueError("disk integral needs positive kappa and radius")
    return 0.5j * np.pi * radius / kappa * hankel1_1(kappa * radius) - 1.0 / kappa**2


@dataclass(frozen=True)
class LSSystem:
    """Factorized volume-integral system for one (mesh, medium, h) triple."""

    mesh: PerturbationMesh
    medium: Medium
    lu: tuple
    cond_estimate: float
    tabulator: KernelTabulator

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells


def assemble_ls(
    mesh: PerturbationMesh,
    medium: Medium,
    tabulator: KernelTabulator | None = None,
    threads: int = 1,
) -> LSSystem:
    """Build and factorize I - B, B[m, n] = q_n * (cell integral of G0(c_m, .)).

    Off-diagonal entries use the midpoint value G0(c_m, c_n) * h^2; the
    diagonal combines the equivalent-disk closed form for the free-space part
    (with the wavenumber of the cell's side of the plane) and the midpoint
    value of the smooth layered correction.
    """
    if mesh.n_cells == 0:
        raise ConfigError("cannot assemble a volume system over an empty mesh")
    tab = tabulator if tabulator is not None else KernelTabulator(medium, threads=threads)
    h = mesh.cell_width
    area = h * h
    centers = mesh.centers
    qa = mesh.contrasts * area

    # Assemble I - B in place: one dense allocation for the whole solve.
    a = tab.g0_matrix(centers, centers, allow_coincident=True)
    corr_diag = np.diag(a).copy()
    a *= -qa[None, :]
    r_eq = h / np.sqrt(np.pi)
    disk = np.asarray(
        [disk_phi_integral(medium.kappa_at(c2), r_eq) for c2 in centers[:, 1]]
    )
    np.fill_diagonal(a, 1.0 - mesh.contrasts * (disk + area * corr_diag))

    anorm = np.linalg.norm(a, 1)
    lu, piv = sla.lu_factor(a, overwrite_a=True)
    rcond, info = sla.lapack.zgecon(lu, anorm)
    if info != 0 or not np.isfinite(rcond) or rcond < 1e-14:
        raise NumericalError(
            f"volume system is numerically singular (rcond={rcond:.3e}, "
            f"{mesh.n_cells} cells, h={h:.4g})"
        )
    cond = 1.0 / float(rcond)
    logger.info(
        "volume system: %d cells, h=%.4g, 1-norm condition estimate %.3e",
        mesh.n_cells, h, cond,
    )
    return LSSystem(mesh=mesh, medium=medium, lu=(lu, piv), cond_estimate=cond, tabulator=tab)


def _check_above(system: LSSystem, points: np.ndarray, what: str) -> None:
    top = float(np.max(system.mesh.centers[:, 1])) + 0.5 * system.mesh.cell_width
    if np.any(points[:, 1] <= max(0.0, top)):
        raise ConfigError(f"{what} must lie strictly above the interface region")


def _solve_many(system: LSSystem, sources: np.ndarray) -> np.ndarray:
    """Total field at cell centers for each source column."""
    rhs = system.tabulator.g0_matrix(system.mesh.centers, sources)
    return sla.lu_solve(system.lu, rhs)


def solve_total_field(system: LSSystem, source) -> np.ndarray:
    """u(center_m, source) for one point source strictly above the interface."""
    src = np.atleast_2d(np.asarray(source, dtype=float))
    _check_above(system, src, "source")
    return _solve_many(system, src)[:, 0]


def _scattered_many(system: LSSystem, sources: np.ndarray, receivers: np.ndarray) -> np.ndarray:
    """u^s(receiver_p, source_q) = u - phi_k1, as an (n_rec, n_src) matrix."""
    u = _solve_many(system, sources)
    tab = system.tabulator
    qa = system.mesh.contrasts * system.mesh.cell_width**2
    g_rec = tab.g0_matrix(receivers, system.mesh.centers)
    out = tab.g0_scattered_matrix(receivers, sources)
    out += (g_rec * qa[None, :]) @ u
    return out


def scattered_field(system: LSSystem, source, receiver) -> complex:
    """Scattered field u^s(receiver, source), relative to the incident
    free-space wave of the upper medium."""
    src = np.atleast_2d(np.asarray(source, dtype=float))
    rec = np.atleast_2d(np.asarray(receiver, dtype=float))
    _check_above(system, src, "source")
    _check_above(system, rec, "receiver")
    return complex(_scattered_many(system, src, rec)[0, 0])


def _gr_system(
    medium: Medium,
    gr: HalfDiskInterface,
    cell_width: float,
    tabulator: KernelTabulator | None = None,
) -> LSSystem | None:
    """Volume system for the half-disk reference field; None when the mesh is
    empty (radius below the cell size: the reference degenerates to the plane)."""
    mesh = build_half_disk_mesh(gr, medium, cell_width)
    if mesh.n_cells == 0:
        return None
    return assemble_ls(mesh, medium, tabulator=tabulator)


def _reference_scattered(
    tab: KernelTabulator, receivers: np.ndarray, sources: np.ndarray
) -> np.ndarray:
    """G0 minus the upper-medium incident wave, for sources on either side of
    the plane (sampling points of the inversion may lie below it)."""
    if np.all(sources[:, 1] > 0.0):
        return tab.g0_scattered_matrix(receivers, sources)
    from .specfun import hankel1_0_many

    out = tab.g0_matrix(receivers, sources)
    dist = np.hypot(
        receivers[:, 0][:, None] - sources[:, 0][None, :],
        receivers[:, 1][:, None] - sources[:, 1][None, :],
    )
    out -= 0.25j * hankel1_0_many(tab.medium.kappa1 * dist)
    return out


def _gr_scattered_many(
    medium: Medium,
    gr: HalfDiskInterface,
    sources: np.ndarray,
    receivers: np.ndarray,
    cell_width: float,
    tabulator: KernelTabulator | None = None,
) -> np.ndarray:
    tab = tabulator if tabulator is not None else KernelTabulator(medium)
    system = _gr_system(medium, gr, cell_width, tabulator=tab)
    if system is None:
        return _reference_scattered(tab, receivers, sources)
    u = _solve_many(system, sources)
    qa = system.mesh.contrasts * system.mesh.cell_width**2
    g_rec = tab.g0_matrix(receivers, system.mesh.centers)
    out = _reference_scattered(tab, receivers, sources)
    out += (g_rec * qa[None, :]) @ u
    return out


def gr_scattered(medium: Medium, gr: HalfDiskInterface, source, receiver, cell_width: float) -> complex:
    """Scattered part G_r - phi_k1 of the half-disk reference field.

    Solved with the same volume machinery: the region between the half-disk
    boundary and the plane carries the uniform contrast +eta (the true medium
    there is the upper one, the flat reference the lower one).
    """
    src = np.atleast_2d(np.asarray(source, dtype=float))
    rec = np.atleast_2d(np.asarray(receiver, dtype=float))
    for name, pts in (("source", src), ("receiver", rec)):
        if np.any(pts[:, 1] <= gr.depth(pts[:, 0])):
            raise ConfigError(f"{name} must lie strictly above the reference interface")
    return complex(_gr_scattered_many(medium, gr, src, rec, cell_width)[0, 0])


@dataclass(frozen=True)
class NearFieldMatrix:
    """Dense matrix of scattered-field samples on the measurement segment.

    entries[p, q] holds the field received at point p for the source at point
    q; sources and receivers share the segment's point set.
    """

    entries: np.ndarray
    line: MeasurementLine
    medium: Medium
    variant: str
    noise_level: float = 0.0
    seed: int | None = None
    profile_id: str = ""
    cell_width: float = 0.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ConfigError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        n = self.line.count
        if self.entries.shape != (n, n):
            raise ConfigError(
                f"entries shape {self.entries.shape} does not match line count {n}"
            )
        if not np.all(np.isfinite(self.entries)):
            raise NumericalError("near-field matrix contains non-finite entries")

    @property
    def n(self) -> int:
        return self.line.count

    def header(self) -> dict:
        return {
            "version": 1,
            "N": self.line.count,
            "a": self.line.half_width,
            "b": self.line.height,
            "kappa1": self.medium.kappa1,
            "kappa2": self.medium.kappa2,
            "variant": self.variant,
            "delta": self.noise_level,
            "seed": self.seed,
            "profile_id": self.profile_id,
            "h": self.cell_width,
        }

    def save(self, path) -> None:
        """Binary format: magic line, one-line JSON header, then the N x N
        entries as row-major little-endian (re, im) float64 pairs."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(json.dumps(self.header(), sort_keys=True).encode("ascii"))
            fh.write(b"\n")
            fh.write(np.ascontiguousarray(self.entries, dtype="<c16").tobytes())

    @classmethod
    def load(cls, path) -> "NearFieldMatrix":
        with open(path, "rb") as fh:
            magic = fh.readline()
            if magic != _MAGIC:
                raise FileFormatError(f"{path}: not a near-field matrix file")
            try:
                head = json.loads(fh.readline().decode("ascii"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise FileFormatError(f"{path}: corrupt header ({exc})") from exc
            if head.get("version") != 1:
                raise FileFormatError(f"{path}: unsupported format version")
            n = int(head["N"])
            raw = fh.read(16 * n * n)
            if len(raw) != 16 * n * n:
                raise FileFormatError(f"{path}: truncated entry block")
            entries = np.frombuffer(raw, dtype="<c16").reshape(n, n).copy()
        seed = head["seed"]
        return cls(
            entries=entries,
            line=MeasurementLine(float(head["a"]), float(head["b"]), n),
            medium=Medium(float(head["kappa1"]), float(head["kappa2"])),
            variant=str(head["variant"]),
            noise_level=float(head["delta"]),
            seed=None if seed is None else int(seed),
            profile_id=str(head["profile_id"]),
            cell_width=float(head["h"]),
        )

    def to_csv(self, path) -> None:
        """Human-readable export: one row per entry, 1-based indices."""
        buf = io.StringIO()
        buf.write("p,q,re,im\n")
        for p in range(self.n):
            row = self.entries[p]
            for q in range(self.n):
                buf.write(f"{p + 1},{q + 1},{float(row[q].real)!r},{float(row[q].imag)!r}\n")
        with open(path, "w", encoding="ascii") as fh:
            fh.write(buf.getvalue())


def synthesize(
    profile: InterfaceProfile,
    medium: Medium,
    line: MeasurementLine,
    variant: str = "raw",
    gr: HalfDiskInterface | None = None,
    cell_width: float | None = None,
    threads: int = 1,
) -> NearFieldMatrix:
    """Near-field matrix over the measurement segment (sources = receivers).

    raw:      entries[p, q] = u^s(x_p, y_q)
    modified: entries[p, q] = u^s(x_p, y_q) - G_r^s(x_p, y_q)

    One factorization of the volume system serves every source; the flat
    profile bypasses the solve (the scattered field is the layered reflection
    alone).
    """
    if variant not in _VARIANTS:
        raise ConfigError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    if variant == "modified" and gr is None:
        raise ConfigError("the modified variant requires a half-disk reference radius")
    h = cell_width if cell_width is not None else medium.wavelength2 / 10.0
    lo, hi = profile.height_range()
    if line.height <= hi:
        raise ConfigError(
            f"measurement height b={line.height} must exceed the interface top {hi:.4g}"
        )

    tab = KernelTabulator(medium, threads=threads)
    pts = line.points()
    mesh = build_mesh(profile, medium, h)
    if mesh.n_cells == 0:
        entries = tab.g0_scattered_matrix(pts, pts)
    else:
        system = assemble_ls(mesh, medium, tabulator=tab)
        entries = _scattered_many(system, pts, pts)

    if variant == "modified":
        entries = entries - _gr_scattered_many(medium, gr, pts, pts, h, tabulator=tab)

    return NearFieldMatrix(
        entries=entries,
        line=line,
        medium=medium,
        variant=variant,
        noise_level=0.0,
        seed=None,
        profile_id=profile.kind,
        cell_width=h,
    )


def add_noise(matrix: NearFieldMatrix, delta: float, seed: int) -> NearFieldMatrix:
    """E + delta * (zeta / ||zeta||_2) * ||E||_2 with complex standard-normal
    zeta from a seeded generator; norms are spectral, so the relative
    perturbation equals delta exactly."""
    if delta < 0.0:
        raise ConfigError("noise level must be nonnegative")
    if delta == 0.0:
        return replace(matrix, noise_level=0.0, seed=int(seed))
    rng = np.random.default_rng(seed)
    n = matrix.n
    zeta = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    scale = delta * np.linalg.norm(matrix.entries, 2) / np.linalg.norm(zeta, 2)
    return replace(
        matrix,
        entries=matrix.entries + scale * zeta,
        noise_level=float(delta),
        seed=int(seed),
    )
