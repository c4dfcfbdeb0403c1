"""Interface profiles, volume meshes, measurement lines, and sampling grids.

The scattering geometry is a planar interface x2 = 0 between two homogeneous
half-spaces, perturbed on a compact set: the true interface is the graph
x2 = f(x1) of a C^2 bump function with f = 0 outside |x1| <= M.  The region D
enclosed between the graph and the plane is meshed with axis-aligned square
cells for the volume integral equation; cells never straddle x2 = 0 because a
grid line is pinned there, and a cell belongs to D exactly when its center
lies strictly between the two curves (midpoint rule, no partial-cell weights).

A second family of reference interfaces is the plane with a half-disk of
radius r pressed into the lower half-space; the region between the plane and
the half-disk is meshed the same way.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, MeshBudgetError
from .medium import Medium

__all__ = [
    "cubic_bspline",
    "InterfaceProfile",
    "HalfDiskInterface",
    "MeasurementLine",
    "SamplingGrid",
    "PerturbationMesh",
    "build_mesh",
    "build_half_disk_mesh",
    "MAX_MESH_CELLS",
]

logger = logging.getLogger(__name__)

# Dense solver budget: meshes beyond this cell count are refused up front.
MAX_MESH_CELLS = 20_000


def cubic_bspline(x) -> np.ndarray:
    """Centered cubic B-spline with support [-2, 2], unit integral, peak 2/3.

    Piecewise cubic:  |x|^3/2 - x^2 + 2/3 on |x| <= 1,
                      -|x|^3/6 + x^2 - 2|x| + 4/3 on 1 < |x| < 2,  else 0.
    """
    scalar = np.isscalar(x)
    a = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
    inner = a**3 / 2.0 - a**2 + 2.0 / 3.0
    outer = -(a**3) / 6.0 + a**2 - 2.0 * a + 4.0 / 3.0
    out = np.where(a <= 1.0, inner, np.where(a < 2.0, outer, 0.0))
    return float(out[0]) if scalar else out


def _f2_taper(x: np.ndarray) -> np.ndarray:
    """C^infinity cutoff: 1 on |x| <= 4, 0 on |x| >= 5, smooth in between."""
    a = np.abs(x)
    out = np.zeros_like(a)
    out[a <= 4.0] = 1.0
    mid = (a > 4.0) & (a < 5.0)
    am = a[mid]
    out[mid] = 1.0 / (1.0 + np.exp(1.0 / (5.0 - am) + 1.0 / (4.0 - am)))
    return out


def _profile_f1(x: np.ndarray) -> np.ndarray:
    return 0.6 * cubic_bspline(x)


def _profile_f2(x: np.ndarray) -> np.ndarray:
    core = (
        -0.3 * np.exp(-(x**2))
        - 0.4 * np.exp(-4.0 * (x - 2.0) ** 2)
        - 0.2 * np.exp(-3.0 * (x + 2.0) ** 2)
    )
    return core * _f2_taper(x)


def _profile_f3(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    inside = np.abs(x) < 4.0
    xi = x[inside]
    out[inside] = np.exp(16.0 / (xi**2 - 16.0)) * np.sin(np.pi * xi)
    return out


def _profile_f6(x: np.ndarray) -> np.ndarray:
    return 0.6 * cubic_bspline(x) - 0.4 * cubic_bspline(x - 5.0)


_BUILTIN_PROFILES: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "flat": (lambda x: np.zeros_like(x), 0.0),
    "bspline_f1": (_profile_f1, 2.0),
    "gaussians_f2": (_profile_f2, 5.0),
    "oscillatory_f3": (_profile_f3, 4.0),
    "composite_f6": (_profile_f6, 7.0),
}


@dataclass(frozen=True)
class InterfaceProfile:
    """Compactly supported interface perturbation x2 = f(x1).

    Attributes
    ----------
    kind : str
        One of the built-in names (``flat``, ``bspline_f1``, ``gaussians_f2``,
        ``oscillatory_f3``, ``composite_f6``) or ``tabulated``.
    support_radius : float
        Half-width M of the support: f(x1) = 0 for |x1| >= M.
    """

    kind: str
    support_radius: float
    _func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    @classmethod
    def builtin(cls, kind: str) -> "InterfaceProfile":
        try:
            func, m = _BUILTIN_PROFILES[kind]
        except KeyError:
            raise ConfigError(
                f"unknown interface profile {kind!r}; choose from "
                f"{sorted(_BUILTIN_PROFILES)} or use from_table()"
            ) from None
        return cls(kind=kind, support_radius=m, _func=func)

    @classmethod
    def flat(cls) -> "InterfaceProfile":
        return cls.builtin("flat")

    @classmethod
    def from_table(cls, x: np.ndarray, f: np.ndarray) -> "InterfaceProfile":
        """Piecewise-linear profile from sample pairs; zero outside the table."""
        x = np.asarray(x, dtype=float)
        f = np.asarray(f, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise ConfigError("tabulated profile needs two equal-length 1-D columns")
        if np.any(np.diff(x) <= 0):
            raise ConfigError("tabulated profile abscissae must be strictly increasing")
        if abs(f[0]) > 1e-12 or abs(f[-1]) > 1e-12:
            raise ConfigError("tabulated profile must vanish at the table ends")

        def func(t: np.ndarray) -> np.ndarray:
            return np.interp(t, x, f, left=0.0, right=0.0)

        m = float(max(abs(x[0]), abs(x[-1])))
        return cls(kind="tabulated", support_radius=m, _func=func)

    @classmethod
    def from_table_file(cls, path) -> "InterfaceProfile":
        data = np.loadtxt(path, dtype=float, ndmin=2)
        if data.shape[1] != 2:
            raise ConfigError(f"{path}: expected two columns (x1, f)")
        return cls.from_table(data[:, 0], data[:, 1])

    def __call__(self, x):
        scalar = np.isscalar(x)
        vals = self._func(np.atleast_1d(np.asarray(x, dtype=float)))
        return float(vals[0]) if scalar else vals

    def height_range(self, samples: int = 4001) -> tuple[float, float]:
        """(min f, max f) over the support, by dense sampling."""
        if self.support_radius == 0.0:
            return (0.0, 0.0)
        x = np.linspace(-self.support_radius, self.support_radius, samples)
        f = self(x)
        return (min(float(f.min()), 0.0), max(float(f.max()), 0.0))


@dataclass(frozen=True)
class HalfDiskInterface:
    """Reference interface: the plane x2 = 0 with a half-disk of radius r removed
    from the upper side of the lower half-space, i.e. x2 = -sqrt(r^2 - x1^2) for
    |x1| < r and x2 = 0 otherwise."""

    radius: float

    def __post_init__(self):
        if not (self.radius >= 0.0 and np.isfinite(self.radius)):
            raise ConfigError("half-disk radius must be finite and non-negative")

    def depth(self, x):
        """Interface height (<= 0) below the points x1."""
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        inside = np.abs(x) < self.radius
        out[inside] = -np.sqrt(self.radius**2 - x[inside] ** 2)
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class MeasurementLine:
    """N equispaced source/receiver points on the segment {|x1| <= a, x2 = b},
    endpoints included."""

    half_width: float
    height: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError("measurement line needs at least two points")
        if self.half_width <= 0 or self.height <= 0:
            raise ConfigError("measurement line requires a > 0 and b > 0")

    def points(self) -> np.ndarray:
        pts = np.zeros((self.count, 2))
        pts[:, 0] = np.linspace(-self.half_width, self.half_width, self.count)
        pts[:, 1] = self.height
        return pts


@dataclass(frozen=True)
class SamplingGrid:
    """Rectangular sampling grid with fixed steps, endpoints included.

    Node counts are floor(extent/step) + 1 with a small tolerance so that
    extents that are integer multiples of the step keep both endpoints.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    step_x: float
    step_y: float

    def __post_init__(self):
        if self.step_x <= 0 or self.step_y <= 0:
            raise ConfigError("grid steps must be positive")
        if self.x_range[1] <= self.x_range[0] or self.y_range[1] <= self.y_range[0]:
            raise ConfigError("grid ranges must be increasing")

    @staticmethod
    def _axis(lo: float, hi: float, step: float) -> np.ndarray:
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(n)

    def xs(self) -> np.ndarray:
        return self._axis(self.x_range[0], self.x_range[1], self.step_x)

    def ys(self) -> np.ndarray:
        return self._axis(self.y_range[0], self.y_range[1], self.step_y)

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) = (len(ys), len(xs))."""
        return (self.ys().size, self.xs().size)

    def points(self) -> np.ndarray:
        """All nodes, row-major with x1 varying fastest, rows ordered by
        decreasing x2 (image convention: first row is the top of the grid)."""
        xs, ys = self.xs(), self.ys()
        gx, gy = np.meshgrid(xs, ys[::-1])
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass
class PerturbationMesh:
    """Square-cell midpoint mesh of the region between two interfaces.

    Attributes
    ----------
    centers : (n, 2) array
        Cell centers; every center has a nonzero second coordinate.
    contrasts : (n,) array
        kappa_true^2 - kappa_ref^2 on each cell, relative to the flat
        two-layer reference medium.
    cell_width : float
        Common side length h; every cell has area h^2.
    """

    centers: np.ndarray
    contrasts: np.ndarray
    cell_width: float

    @property
    def n_cells(self) -> int:
        return self.centers.shape[0]

    @property
    def areas(self) -> np.ndarray:
        return np.full(self.n_cells, self.cell_width**2)

    def total_area(self) -> float:
        return self.n_cells * self.cell_width**2


def _column_centers(half_width: float, h: float) -> np.ndarray:
    """Centers of square columns covering [-half_width, half_width] with edges
    pinned to integer multiples of h, symmetric about x1 = 0."""
    k = int(np.ceil(half_width / h - 1e-12))
    idx = np.arange(-k, k)
    return (idx + 0.5) * h


def build_mesh(profile: InterfaceProfile, medium: Medium, cell_width: float) -> PerturbationMesh:
    """Mesh the region between the graph of ``profile`` and the plane x2 = 0.

    Cell edges lie on integer multiples of ``cell_width`` in both coordinates,
    so one grid line sits exactly on the plane and no cell straddles it.  A
    cell is kept when its center (c1, c2) satisfies 0 < c2 < f(c1) (then the
    true medium is the lower one intruding above the plane, contrast -eta) or
    f(c1) < c2 < 0 (upper medium intruding below, contrast +eta), where
    eta = kappa1^2 - kappa2^2.

    Parameters
    ----------
    profile : InterfaceProfile
    medium : Medium
        Two-layer background; only its contrast eta enters the mesh.
    cell_width : float
        Side length h of the square cells.

    Returns
    -------
    PerturbationMesh
        Possibly empty (flat profile); a warning is emitted in that case.
    """
    if cell_width <= 0 or not np.isfinite(cell_width):
        raise ConfigError("cell width must be positive and finite")
    eta = medium.eta
    if profile.support_radius == 0.0:
        warnings.warn("flat profile: perturbation mesh is empty", stacklevel=2)
        return PerturbationMesh(np.zeros((0, 2)), np.zeros(0), cell_width)

    h = float(cell_width)
    cols = _column_centers(profile.support_radius, h)
    fmin, fmax = profile.height_range()
    n_up = int(np.ceil(max(fmax, 0.0) / h + 1e-12))
    n_dn = int(np.ceil(max(-fmin, 0.0) / h + 1e-12))
    rows = np.concatenate([-(np.arange(n_dn) + 0.5) * h, (np.arange(n_up) + 0.5) * h])

    est = cols.size * rows.size
    if est > 50 * MAX_MESH_CELLS:
        raise MeshBudgetError(f"mesh bounding box of {est} candidate cells is unreasonable")

    cc, rr = np.meshgrid(cols, rows)
    c1 = cc.ravel()
    c2 = rr.ravel()
    f = profile(c1)
    above = (c2 > 0.0) & (c2 < f)   # lower medium above the plane
    below = (c2 < 0.0) & (c2 > f)   # upper medium below the plane
    keep = above | below
    centers = np.column_stack([c1[keep], c2[keep]])
    contrasts = np.where(above[keep], -eta, eta)

    if centers.shape[0] == 0:
        warnings.warn("no mesh cell qualifies at this cell width", stacklevel=2)
    if centers.shape[0] > MAX_MESH_CELLS:
        raise MeshBudgetError(
            f"{centers.shape[0]} cells exceed the dense-solver budget of {MAX_MESH_CELLS}"
        )
    logger.debug("mesh(%s, h=%.4g): %d cells", profile.kind, h, centers.shape[0])
    return PerturbationMesh(centers, contrasts, h)


def build_half_disk_mesh(interface: HalfDiskInterface, medium: Medium, cell_width: float) -> PerturbationMesh:
    """Mesh the region between the plane and a half-disk reference interface.

    The region {x1^2 + x2^2 < r^2, x2 < 0} belongs to the upper medium of the
    reference interface but to the lower medium of the flat two-layer
    reference, so each kept cell carries contrast +eta.

    Raises
    ------
    MeshBudgetError
        If the requested radius needs more than ``MAX_MESH_CELLS`` cells; the
        message names the largest feasible radius at this cell width.
    """
    if cell_width <= 0 or not np.isfinite(cell_width):
        raise ConfigError("cell width must be positive and finite")
    eta = medium.eta
    r = interface.radius
    h = float(cell_width)
    if r == 0.0:
        return PerturbationMesh(np.zeros((0, 2)), np.zeros(0), h)

    est = 0.5 * np.pi * r**2 / h**2
    if est > MAX_MESH_CELLS:
        r_max = np.sqrt(2.0 * MAX_MESH_CELLS / np.pi) * h
        raise MeshBudgetError(
            f"half-disk radius {r:g} needs ~{est:.0f} cells (budget {MAX_MESH_CELLS}); "
            f"largest feasible radius at h={h:g} is about {r_max:.3g}"
        )

    cols = _column_centers(r, h)
    n_dn = int(np.ceil(r / h + 1e-12))
    rows = -(np.arange(n_dn) + 0.5) * h
    cc, rr = np.meshgrid(cols, rows)
    c1 = cc.ravel()
    c2 = rr.ravel()
    keep = c1**2 + c2**2 < r**2
    centers = np.column_stack([c1[keep], c2[keep]])
    contrasts = np.full(centers.shape[0], eta)
    logger.debug("half-disk mesh(r=%.4g, h=%.4g): %d cells", r, h, centers.shape[0])
    return PerturbationMesh(centers, contrasts, h)
