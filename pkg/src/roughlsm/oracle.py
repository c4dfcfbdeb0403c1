"""Brute-force finite-difference reference solver (tests only).

Second-order 5-point discretization of Delta u + kappa(x)^2 u = -delta_y on a
rectangle, truncated by absorbing layers realized as complex coordinate
stretching: inside a layer of thickness L the derivative d/dx becomes
(1/s) d/dx with s(d) = 1 + i sigma0 (d/L)^2, d the depth into the layer.  The
point source is a scaled grid delta (1/h^2 at its node), which reproduces the
distributional right-hand side at second order for node-aligned sources.

This solver shares nothing with the spectral/volume route: wavenumbers enter
as a plain masked array, the interface as a staircase, and the linear algebra
is a sparse LU.  It exists to cross-check the production path at moderate
contrast, not to be fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, NumericalError
from .medium import Medium

__all__ = ["FDFDConfig", "fdfd_scattered"]


@dataclass(frozen=True)
class FDFDConfig:
    """Rectangle, grid step, and absorbing-layer parameters for one solve."""

    box: tuple[float, float, float, float]   # x_lo, x_hi, y_lo, y_hi
    grid_step: float
    pml_thickness: float
    pml_strength: float = 5.0

    def validate(self, medium: Medium) -> None:
        x_lo, x_hi, y_lo, y_hi = self.box
        if not (x_lo < x_hi and y_lo < y_hi):
            raise ConfigError("degenerate solver box")
        if self.grid_step > medium.wavelength2 / 20.0 + 1e-12:
            raise ConfigError(
                f"grid step {self.grid_step} exceeds a twentieth of the shorter "
                f"wavelength {medium.wavelength2 / 20.0:.4g}"
            )
        if self.pml_thickness < medium.wavelength1 / 2.0 - 1e-12:
            raise ConfigError("absorbing layer thinner than half the longer wavelength")
        if self.pml_strength <= 0.0:
            raise ConfigError("absorbing-layer strength must be positive")


def _stretch(coords: np.ndarray, lo: float, hi: float, thickness: float, sigma0: float) -> np.ndarray:
    """Complex stretch factor s at the given coordinates (1 in the interior)."""
    s = np.ones(coords.size, dtype=complex)
    d_lo = (lo + thickness) - coords
    mask = d_lo > 0
    s[mask] += 1j * sigma0 * (d_lo[mask] / thickness) ** 2
    d_hi = coords - (hi - thickness)
    mask = d_hi > 0
    s[mask] += 1j * sigma0 * (d_hi[mask] / thickness) ** 2
    return s


def fdfd_scattered(profile, medium: Medium, cfg: FDFDConfig, source, receivers) -> np.ndarray:
    """Scattered field u - phi_k1(., source) at the receivers.

    ``profile`` is any description of the interface height: a callable of x1
    (the perturbed interface) or an object with a ``depth`` method (the
    half-disk reference).  The medium is kappa1 above the interface curve and
    kappa2 below it, sampled at grid nodes (staircase).
    """
    cfg.validate(medium)
    surface = profile.depth if hasattr(profile, "depth") else profile
    x_lo, x_hi, y_lo, y_hi = cfg.box
    h = cfg.grid_step
    nx = int(round((x_hi - x_lo) / h)) + 1
    ny = int(round((y_hi - y_lo) / h)) + 1
    xs = x_lo + h * np.arange(nx)
    ys = y_lo + h * np.arange(ny)

    source = np.asarray(source, dtype=float)
    receivers = np.atleast_2d(np.asarray(receivers, dtype=float))
    interior = (
        x_lo + cfg.pml_thickness,
        x_hi - cfg.pml_thickness,
        y_lo + cfg.pml_thickness,
        y_hi - cfg.pml_thickness,
    )
    for name, pts in (("source", source[None, :]), ("receivers", receivers)):
        if (
            np.any(pts[:, 0] < interior[0]) or np.any(pts[:, 0] > interior[1])
            or np.any(pts[:, 1] < interior[2]) or np.any(pts[:, 1] > interior[3])
        ):
            raise ConfigError(f"{name} must lie inside the box, outside the absorbing layers")

    si = np.argmin(np.abs(xs - source[0]))
    sj = np.argmin(np.abs(ys - source[1]))
    if abs(xs[si] - source[0]) > 1e-9 or abs(ys[sj] - source[1]) > 1e-9:
        raise ConfigError("source must coincide with a grid node")

    # Wavenumber by column fraction: each node carries theta kappa1^2 +
    # (1 - theta) kappa2^2 with theta the fraction of the vertical cell
    # [y - h/2, y + h/2] above the interface at the node's x1.  A plain
    # staircase costs an O(h) interface bias that ruins the order-2
    # refinement trend this oracle is held to.
    fvals = surface(xs)
    theta = np.clip((ys[None, :] + 0.5 * h - fvals[:, None]) / h, 0.0, 1.0)
    ksq = (theta * medium.kappa1**2 + (1.0 - theta) * medium.kappa2**2).astype(complex)

    sx = _stretch(xs, x_lo, x_hi, cfg.pml_thickness, cfg.pml_strength)
    sy = _stretch(ys, y_lo, y_hi, cfg.pml_thickness, cfg.pml_strength)
    sx_half = _stretch(xs[:-1] + 0.5 * h, x_lo, x_hi, cfg.pml_thickness, cfg.pml_strength)
    sy_half = _stretch(ys[:-1] + 0.5 * h, y_lo, y_hi, cfg.pml_thickness, cfg.pml_strength)

    def idx(i, j):
        return i * ny + j

    n = nx * ny
    # (1/sx) d/dx ((1/sx) du/dx) + (1/sy) d/dy ((1/sy) du/dy) + k^2 u = -delta
    # with Dirichlet zero on the outer boundary (behind the layers).
    i = np.arange(1, nx - 1)[:, None].repeat(ny - 2, axis=1)
    j = np.arange(1, ny - 1)[None, :].repeat(nx - 2, axis=0)
    i = i.ravel()
    j = j.ravel()
    cw = 1.0 / (h * h * sx[i] * sx_half[i - 1])
    ce = 1.0 / (h * h * sx[i] * sx_half[i])
    cs = 1.0 / (h * h * sy[j] * sy_half[j - 1])
    cn = 1.0 / (h * h * sy[j] * sy_half[j])
    cc = -(cw + ce + cs + cn) + ksq[i, j]

    rows = np.concatenate([idx(i, j)] * 5)
    cols = np.concatenate([idx(i, j), idx(i - 1, j), idx(i + 1, j), idx(i, j - 1), idx(i, j + 1)])
    vals = np.concatenate([cc, cw, ce, cs, cn])
    # Dirichlet rows for the outer boundary
    bi = []
    for ii in (0, nx - 1):
        bi.append(idx(np.full(ny, ii), np.arange(ny)))
    for jj in (0, ny - 1):
        bi.append(idx(np.arange(1, nx - 1), np.full(nx - 2, jj)))
    bidx = np.concatenate(bi)
    rows = np.concatenate([rows, bidx])
    cols = np.concatenate([cols, bidx])
    vals = np.concatenate([vals, np.ones(bidx.size, dtype=complex)])

    a = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    rhs = np.zeros(n, dtype=complex)
    rhs[idx(si, sj)] = -1.0 / (h * h)
    try:
        u = spla.splu(a).solve(rhs)
    except RuntimeError as exc:
        raise NumericalError(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise NumericalError("finite-difference solve produced non-finite values")
    u = u.reshape(nx, ny)

    # bilinear interpolation at the receivers
    out = np.empty(receivers.shape[0], dtype=complex)
    for k, (rx, ry) in enumerate(receivers):
        fi = (rx - x_lo) / h
        fj = (ry - y_lo) / h
        i0 = min(int(fi), nx - 2)
        j0 = min(int(fj), ny - 2)
        tx = fi - i0
        ty = fj - j0
        out[k] = (
            (1 - tx) * (1 - ty) * u[i0, j0]
            + tx * (1 - ty) * u[i0 + 1, j0]
            + (1 - tx) * ty * u[i0, j0 + 1]
            + tx * ty * u[i0 + 1, j0 + 1]
        )

    dist = np.hypot(receivers[:, 0] - source[0], receivers[:, 1] - source[1])
    if np.any(dist < 1e-12):
        raise ConfigError("receivers must not coincide with the source")
    from .specfun import hankel1_0_many

    return out - 0.25j * hankel1_0_many(medium.kappa1 * dist)
