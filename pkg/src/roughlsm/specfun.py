"""Cylinder functions of order zero and one, and the 2-D point-source kernel.

Everything downstream (layered kernels, volume integral equation, sampling
indicator) only ever needs the outgoing Hankel functions H0^(1), H1^(1) for
real positive arguments, plus the free-space Helmholtz kernel

    phi_kappa(x, y) = (i/4) * H0^(1)(kappa * |x - y|),

which solves  Delta u + kappa^2 u = -delta_y  in 2-D with the outgoing
radiation condition.

The Bessel/Neumann pairs are built from scratch so that the evaluation is
auditable end to end:

* ascending power series for x < 12 (Abramowitz-Stegun style, with harmonic
  number corrections for Y0/Y1),
* the large-argument amplitude/phase expansion for x >= 12, truncated near its
  smallest term.

Sums are accumulated in extended precision (``np.longdouble``) so that the
cancellation in the series branch near the crossover does not eat into the
1e-10 relative accuracy target on [1e-3, 1e3].  The two branches agree to
about 1e-11 at x = 12.
"""

from __future__ import annotations

import numpy as np

from .errors import CoincidentPointsError

__all__ = [
    "EULER_GAMMA",
    "SERIES_CUTOFF",
    "hankel1_0",
    "hankel1_1",
    "hankel1_0_many",
    "hankel1_1_many",
    "phi",
    "phi_from_distance",
]

EULER_GAMMA = 0.57721566490153286061
SERIES_CUTOFF = 12.0

# Number of ascending-series terms.  At x just below the crossover the term
# ratio is (x/2)^2 / m^2, so 44 terms leave a remainder far below 1e-25.
_N_SERIES = 44
# Number of amplitude/phase terms.  For x >= 12 the term magnitudes decrease
# up to k ~ 24 and the first omitted term is ~6e-12 there.
_N_ASYMPTOTIC = 24

_LD = np.longdouble
_PI_LD = _LD("3.14159265358979323846264338328")
_GAMMA_LD = _LD("0.577215664901532860606512090082")


def _ascending_j0y0j1y1(x):
    """Ascending series for J0, Y0, J1, Y1 on a longdouble array x (0 < x < 13)."""
    q = (x / 2.0) ** 2
    j0 = np.ones_like(x)
    j1s = np.ones_like(x)          # J1 = (x/2) * j1s
    y0s = np.zeros_like(x)         # sum_{m>=1} (-1)^(m+1) H_m q^m / (m!)^2
    y1s = np.zeros_like(x)         # sum_{m>=0} (-1)^m (H_m + H_{m+1}) q^m / (m! (m+1)!)
    t0 = np.ones_like(x)           # (-1)^m q^m / (m!)^2
    t1 = np.ones_like(x)           # (-1)^m q^m / (m! (m+1)!)
    harmonic = _LD(0.0)
    y1s += t1 * 1.0                # m = 0 term: H_0 + H_1 = 1
    for m in range(1, _N_SERIES + 1):
        t0 = -t0 * q / _LD(m * m)
        t1 = -t1 * q / _LD(m * (m + 1))
        harmonic = harmonic + _LD(1.0) / _LD(m)
        j0 += t0
        j1s += t1
        y0s -= t0 * harmonic
        y1s += t1 * (2.0 * harmonic + _LD(1.0) / _LD(m + 1))
    lg = np.log(x / 2.0) + _GAMMA_LD
    two_over_pi = _LD(2.0) / _PI_LD
    j1 = (x / 2.0) * j1s
    y0 = two_over_pi * (lg * j0 + y0s)
    y1 = two_over_pi * lg * j1 - two_over_pi / x - (x / (2.0 * _PI_LD)) * y1s
    return j0, y0, j1, y1


def _asymptotic_h0h1(x):
    """Amplitude/phase expansion for H0^(1), H1^(1) on a longdouble array x >= 12.

    H_n^(1)(x) ~ sqrt(2/(pi x)) (P_n + i Q_n) exp(i (x - (2n+1) pi/4)), with
    P, Q the classical inverse-power series in 1/(8x).
    """
    out = []
    for mu in (_LD(0.0), _LD(4.0)):
        term = np.ones_like(x)
        p = np.ones_like(x)
        q = np.zeros_like(x)
        sign_p, sign_q = -1.0, 1.0
        for k in range(1, _N_ASYMPTOTIC):
            term = term * (mu - _LD((2 * k - 1) ** 2)) / (_LD(8 * k) * x)
            if k % 2 == 1:
                q += sign_q * term
                sign_q = -sign_q
            else:
                p += sign_p * term
                sign_p = -sign_p
        out.append((p, q))
    amp = np.sqrt(_LD(2.0) / (_PI_LD * x))
    h = []
    for n, (p, q) in enumerate(out):
        chi = x - (2 * n + 1) * _PI_LD / 4.0
        c, s = np.cos(chi), np.sin(chi)
        re = amp * (p * c - q * s)
        im = amp * (p * s + q * c)
        h.append((re, im))
    return h[0], h[1]


def _h0_h1_arrays(x: np.ndarray):
    """Evaluate H0^(1) and H1^(1) on a float64 array of positive arguments."""
    x = np.asarray(x, dtype=float)
    if x.size and (not np.all(np.isfinite(x)) or np.any(x <= 0.0)):
        raise ValueError("hankel functions require finite positive arguments")
    xl = x.astype(_LD)
    h0 = np.empty(x.shape, dtype=complex)
    h1 = np.empty(x.shape, dtype=complex)
    small = x < SERIES_CUTOFF
    if np.any(small):
        j0, y0, j1, y1 = _ascending_j0y0j1y1(xl[small])
        h0[small] = j0.astype(float) + 1j * y0.astype(float)
        h1[small] = j1.astype(float) + 1j * y1.astype(float)
    if np.any(~small):
        (r0, i0), (r1, i1) = _asymptotic_h0h1(xl[~small])
        h0[~small] = r0.astype(float) + 1j * i0.astype(float)
        h1[~small] = r1.astype(float) + 1j * i1.astype(float)
    return h0, h1


def hankel1_0_many(x: np.ndarray) -> np.ndarray:
    """H0^(1) on an array of positive real arguments."""
    return _h0_h1_arrays(x)[0]


def hankel1_1_many(x: np.ndarray) -> np.ndarray:
    """H1^(1) on an array of positive real arguments."""
    return _h0_h1_arrays(x)[1]


def hankel1_0(x: float) -> complex:
    """Outgoing Hankel function H0^(1)(x) for real x > 0."""
    return complex(_h0_h1_arrays(np.asarray([float(x)]))[0][0])


def hankel1_1(x: float) -> complex:
    """Outgoing Hankel function H1^(1)(x) for real x > 0."""
    return complex(_h0_h1_arrays(np.asarray([float(x)]))[1][0])


def phi_from_distance(kappa: float, r) -> np.ndarray:
    """Free-space kernel (i/4) H0^(1)(kappa r) for distances r (scalar or array)."""
    if kappa <= 0.0 or not np.isfinite(kappa):
        raise ValueError("wavenumber must be positive and finite")
    scalar = np.isscalar(r)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 1e-14):
        raise CoincidentPointsError("point-source kernel evaluated at its singularity")
    values = 0.25j * hankel1_0_many(kappa * r)
    return complex(values[0]) if scalar else values


def phi(kappa: float, x, y) -> complex:
    """Outgoing point-source field phi_kappa(x, y) = (i/4) H0^(1)(kappa |x - y|).

    Parameters
    ----------
    kappa : float
        Positive wavenumber.
    x, y : array_like, shape (2,)
        Evaluation point and source location.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return phi_from_distance(kappa, float(np.hypot(x[0] - y[0], x[1] - y[1])))
