"""Green's function of the flat two-layer medium, by spectral quadrature.

For wavenumber kappa1 above the plane x2 = 0 and kappa2 below, the outgoing
Green's function G0 of  Delta u + kappa(x2)^2 u = -delta_y  has the classical
plane-wave (Sommerfeld) representation.  With

    beta_j(xi) = sqrt(kappa_j^2 - xi^2),   Im beta_j >= 0,
    (beta_j >= 0 where it is real),

and writing S for the sum of the two distances to the plane, u/d for the
distances of the upper/lower point, and dx = |x1 - y1|:

* both points above:
    G0 = phi_k1(x, y) + (i/2pi) Int_0^inf (b1-b2)/((b1+b2) b1)
                          e^{i b1 S} cos(xi dx) dxi
* both points below: same with indices 1 and 2 swapped,
* opposite sides:
    G0 = (i/2pi) Int_0^inf 2 e^{i(b1 u + b2 d)} / (b1 + b2) cos(xi dx) dxi.

The even symmetry in xi has been used to fold the line integral onto
[0, inf).  On the real axis the principal square root of the *real* quantity
kappa^2 - xi^2 (cast to complex, hence with +0.0 imaginary part) lands exactly
on the physical sheet, so no path deformation is needed; the integrable
1/beta endpoint singularities and the sqrt kinks at the branch points
xi = kappa_j are absorbed by splitting at the branch points and applying the
sine substitution xi = m + w sin(pi t / 2) on each segment, after which the
integrand is analytic and composite Gauss-Legendre panels converge
spectrally.  The tail beyond the cap Xi decays exponentially with rate S (or
u + d), and the reflection/transmission coefficients themselves decay like
1/xi^2, which the truncation estimate exploits.

For opposite-side points that both hug the plane the transmitted integrand
decays only like e^{-xi(u+d)}/xi, so the evaluator subtracts the lower
half-space kernel phi_k2 in spectral form, integrates the difference (which
gains two extra orders of algebraic decay), and adds phi_k2(x, y) back in
closed form.

All evaluations are batched: one quadrature rule is built per (case, heights)
group and shared by every horizontal offset in the batch, so tabulating a
kernel matrix over structured point sets costs one spectral integral per
distinct (dx, heights) key.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPointsError, FileFormatError, QuadratureConvergenceError
from .medium import Medium
from .specfun import hankel1_0_many, phi, phi_from_distance

__all__ = [
    "Medium",
    "SpectralQuadrature",
    "KernelTabulator",
    "g0",
    "g0_scattered",
    "tabulate_kernel",
]

logger = logging.getLogger(__name__)

# Horizontal offsets are snapped to this quantum before keying the cache; the
# induced kernel perturbation is below 1e-12 for every wavenumber in scope.
DX_QUANTUM = 2.0**-41

# Hard ceiling on quadrature nodes per evaluation.
NODE_CAP = 2**16

_GL_T, _GL_W = np.polynomial.legendre.leggauss(16)

_CASE_UU = 0   # both points above the plane
_CASE_LL = 1   # both points below
_CASE_X = 2    # opposite sides, plain transmitted integrand
_CASE_XS = 3   # opposite sides, phi_k2-subtracted integrand

# Below this vertical offset the opposite-side evaluator switches to the
# subtracted form.
_SUBTRACT_THRESHOLD = 0.5


@dataclass(frozen=True)
class SpectralQuadrature:
    """Concrete rule for one folded spectral integral.

    nodes/weights are stored as complex for generality, but the path used here
    lies on the real axis: the physical branch (Im beta >= 0) is the limit
    from below the cut on [kappa, inf) and from above on the negative mirror,
    which is exactly where the principal square root of the real quantity
    kappa^2 - xi^2 evaluates, so a deformed path is neither needed nor safe.
    """

    nodes: np.ndarray
    weights: np.ndarray
    xi_max: float
    deformation_height: float = 0.0

    def __post_init__(self):
        if self.nodes.size and (
            np.any(self.nodes.real < -1e-12) or np.any(self.nodes.real > self.xi_max + 1e-9)
        ):
            raise QuadratureConvergenceError("spectral nodes escape [0, xi_max]")


def _segment_nodes(a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Sine-mapped composite Gauss-Legendre rule on [a, b].

    The substitution xi = m + w sin(pi t / 2) turns inverse-square-root
    endpoint singularities and sqrt kinks into analytic factors.
    """
    edges = np.linspace(-1.0, 1.0, panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    mids = 0.5 * (edges[:-1] + edges[1:])
    t = (mids[:, None] + half * _GL_T[None, :]).ravel()
    wt = np.tile(_GL_W * half, panels)
    m = 0.5 * (a + b)
    w = 0.5 * (b - a)
    arg = 0.5 * np.pi * t
    xi = m + w * np.sin(arg)
    jac = w * 0.5 * np.pi * np.cos(arg)
    return xi, wt * jac


def _panel_counts(seeds: list[int], mult: float) -> list[int]:
    return [max(2, int(np.ceil(s * mult))) for s in seeds]


def _build_quadrature(segments, panels: list[int], xi_max: float) -> SpectralQuadrature:
    if 16 * sum(panels) > NODE_CAP:
        raise QuadratureConvergenceError(
            f"spectral quadrature would need more than {NODE_CAP} nodes"
        )
    nodes, weights = [], []
    for (a, b), p in zip(segments, panels):
        xi, wq = _segment_nodes(a, b, p)
        nodes.append(xi)
        weights.append(wq)
    return SpectralQuadrature(
        np.concatenate(nodes).astype(complex),
        np.concatenate(weights).astype(complex),
        xi_max,
    )


def _betas(medium: Medium, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertical wavenumbers on the physical sheet for real xi >= 0."""
    b1 = np.sqrt((medium.kappa1**2 - xi**2).astype(complex))
    b2 = np.sqrt((medium.kappa2**2 - xi**2).astype(complex))
    return b1, b2


def _integrand(case: int, medium: Medium, hx: float, hy: float):
    """Folded integrand W(xi) for the requested case.

    hx, hy are the signed second coordinates of target and source; the
    vertical structure only enters through their distances to the plane.
    """
    if case == _CASE_UU:
        s = hx + hy

        def w(xi):
            b1, b2 = _betas(medium, xi)
            return (b1 - b2) / ((b1 + b2) * b1) * np.exp(1j * b1 * s)

    elif case == _CASE_LL:
        s = -(hx + hy)

        def w(xi):
            b1, b2 = _betas(medium, xi)
            return (b2 - b1) / ((b1 + b2) * b2) * np.exp(1j * b2 * s)

    else:
        up = hx if hx > hy else hy
        dn = -(hy if hx > hy else hx)

        if case == _CASE_X:

            def w(xi):
                b1, b2 = _betas(medium, xi)
                return 2.0 * np.exp(1j * (b1 * up + b2 * dn)) / (b1 + b2)

        else:  # _CASE_XS

            def w(xi):
                b1, b2 = _betas(medium, xi)
                main = 2.0 * np.exp(1j * (b1 * up + b2 * dn)) / (b1 + b2)
                comp = np.exp(1j * b2 * (up + dn)) / b2
                return main - comp

    return w


def _tail_envelope(case: int, medium: Medium, offset: float, xi: float) -> float:
    """Coarse upper bound on |W| at abscissa xi, used for truncation control."""
    kb = max(medium.kappa1, medium.kappa2)
    s = np.sqrt(max(xi**2 - kb**2, 0.0))
    decay = np.exp(-s * offset)
    eta = abs(medium.eta)
    if case in (_CASE_UU, _CASE_LL):
        return eta / (2.0 * xi**3) * decay
    if case == _CASE_X:
        return decay / xi
    return eta * (1.0 / xi**3 + offset / (2.0 * xi**2) + 1.0 / (2.0 * xi**2)) * decay


def _tail_estimate(case: int, medium: Medium, offset: float, xi: float) -> float:
    reach = min(1.0 / offset if offset > 0 else np.inf, 0.5 * xi)
    return _tail_envelope(case, medium, offset, xi) * reach / (2.0 * np.pi)


def _choose_xi_max(case: int, medium: Medium, offset: float) -> float:
    """Truncation point: the exponential rule 3 kappa_max + 40/offset, shrunk
    when the integrand's algebraic decay reaches 1e-12 sooner."""
    kb = max(medium.kappa1, medium.kappa2)
    if offset <= 0.0:
        raise QuadratureConvergenceError(
            "spectral integral requires a positive vertical offset between the "
            "evaluation points and the plane"
        )
    xi_exp = 3.0 * kb + 40.0 / offset
    if case == _CASE_X:
        return xi_exp
    xi = kb + 2.0
    while xi < xi_exp and _tail_estimate(case, medium, offset, xi) > 1e-12:
        xi *= 1.25
    return min(xi, xi_exp)


def _cos_transform(xi: np.ndarray, wvals: np.ndarray, dxs: np.ndarray) -> np.ndarray:
    """values[m] = sum_j cos(xi_j dxs_m) wvals_j, chunked to bound memory."""
    out = np.empty(dxs.size, dtype=complex)
    wr, wi = wvals.real.copy(), wvals.imag.copy()
    chunk = max(1, int(4e6 // max(xi.size, 1)))
    for lo in range(0, dxs.size, chunk):
        hi = min(lo + chunk, dxs.size)
        c = np.cos(dxs[lo:hi, None] * xi[None, :])
        out[lo:hi] = c @ wr + 1j * (c @ wi)
    return out


class KernelTabulator:
    """Batched, cached evaluator for the two-layer kernel G0.

    One instance per medium.  Every spectral value is cached under the key
    (target height, source height, snapped horizontal offset), so structured
    point sets (meshes, measurement lines) pay one quadrature per distinct
    key; the counters expose how many values were actually integrated.
    """

    def __init__(self, medium: Medium, tol: float = 1e-11, threads: int = 1):
        self.medium = medium
        self.tol = float(tol)
        self.threads = max(1, int(threads))
        self._cache: dict[tuple[float, float, int], complex] = {}
        self.spectral_values = 0      # kernel values obtained by quadrature
        self.quadrature_builds = 0    # spectral rules constructed
        self.pair_requests = 0        # pair evaluations served (cache or not)

    # ------------------------------------------------------------------
    # spectral core
    # ------------------------------------------------------------------

    def _classify(self, hx: float, hy: float) -> tuple[int, float]:
        """Case code and vertical offset for a height pair (plane -> upper side)."""
        up_x = hx >= 0.0
        up_y = hy >= 0.0
        if up_x and up_y:
            return _CASE_UU, hx + hy
        if not up_x and not up_y:
            return _CASE_LL, -(hx + hy)
        offset = abs(hx) + abs(hy)
        case = _CASE_XS if offset < _SUBTRACT_THRESHOLD else _CASE_X
        return case, offset

    def _spectral_batch(self, hx: float, hy: float, dxs: np.ndarray) -> np.ndarray:
        """Correction (same side) or full transmitted value (opposite sides)
        for one height pair and many horizontal offsets."""
        m = self.medium
        case, offset = self._classify(hx, hy)
        zero_contrast = m.kappa1 == m.kappa2
        if zero_contrast and case in (_CASE_UU, _CASE_LL):
            return np.zeros(dxs.size, dtype=complex)

        xi_max = _choose_xi_max(case, m, offset)
        tail = _tail_estimate(case, m, offset, xi_max)
        if tail > 1e-10:
            raise QuadratureConvergenceError(
                f"truncation at xi={xi_max:.3g} leaves an estimated tail of "
                f"{tail:.2e} (> 1e-10) for vertical offset {offset:.3g}"
            )

        ka = min(m.kappa1, m.kappa2)
        kb = max(m.kappa1, m.kappa2)
        segments = [(0.0, ka)]
        if kb > ka:
            segments.append((ka, kb))
        segments.append((kb, xi_max))

        dx_max = float(dxs.max()) if dxs.size else 0.0
        w = _integrand(case, m, hx, hy)
        seeds = []
        for a, b in segments:
            cycles = (b - a) * dx_max / (2.0 * np.pi) + kb * offset / (2.0 * np.pi)
            seeds.append(max(2, int(np.ceil(6.0 * cycles / 16.0)) + 1))

        # Double the panel multiplier until two successive rules agree; the
        # last step before the node cap may be a partial refinement.
        result = prev = None
        mult = 1.0
        last_err = None
        while True:
            quad = _build_quadrature(segments, _panel_counts(seeds, mult), xi_max)
            self.quadrature_builds += 1
            xi = quad.nodes.real
            wv = w(xi) * quad.weights
            vals = _cos_transform(xi, wv, dxs)
            if prev is not None:
                err = float(np.max(np.abs(vals - prev)))
                scale = max(1.0, float(np.max(np.abs(vals))))
                # Rules with tens of thousands of nodes bottom out on the
                # double-precision summation floor before reaching tol; accept
                # once refinement stops improving an already-tiny difference.
                stalled = last_err is not None and err > 0.5 * last_err
                if err < self.tol * scale or (stalled and err < 1e-8 * scale):
                    result = vals
                    break
                last_err = err
            prev = vals
            nxt = 2.0 * mult
            if 16 * sum(_panel_counts(seeds, nxt)) > NODE_CAP:
                # leave one panel of headroom per segment for the ceil rounding
                nxt = (NODE_CAP / 16.0 - len(seeds)) / sum(seeds)
                if nxt <= mult * 1.05:
                    raise QuadratureConvergenceError(
                        "panel doubling hit the node cap before the spectral "
                        "integral converged"
                    )
            mult = nxt

        result = result * (0.5j / np.pi)
        if case == _CASE_XS:
            vert = abs(hx) + abs(hy)
            result = result + phi_from_distance(m.kappa2, np.hypot(dxs, vert))
        return result

    # ------------------------------------------------------------------
    # cached, grouped evaluation
    # ------------------------------------------------------------------

    def _compute_group(self, hx: float, hy: float, keys: np.ndarray):
        """Spectral values for the snapped offsets of one height pair that are
        not cached yet; pure so that worker threads never touch shared state."""
        missing = np.asarray(
            [k for k in keys.tolist() if (hx, hy, k) not in self._cache], dtype=np.int64
        )
        if missing.size == 0:
            return hx, hy, missing, np.empty(0, dtype=complex)
        return hx, hy, missing, self._spectral_batch(hx, hy, missing * DX_QUANTUM)

    def _correction_block(self, targets: np.ndarray, sources: np.ndarray) -> np.ndarray:
        """Spectral part for every (target, source) pair: reflected correction
        on equal sides, full transmitted kernel across the plane."""
        shape = (targets.shape[0], sources.shape[0])
        dx = np.abs(targets[:, 0][:, None] - sources[:, 0][None, :])
        keys = np.round(dx / DX_QUANTUM).astype(np.int64).ravel()
        del dx
        self.pair_requests += keys.size

        hts, t_inv = np.unique(targets[:, 1], return_inverse=True)
        hss, s_inv = np.unique(sources[:, 1], return_inverse=True)
        gid = (t_inv[:, None] * hss.size + s_inv[None, :]).ravel()
        order = np.argsort(gid, kind="stable")
        groups, starts = np.unique(gid[order], return_index=True)
        bounds = np.append(starts, gid.size)

        slices = {
            int(g): order[bounds[i] : bounds[i + 1]] for i, g in enumerate(groups)
        }
        jobs = [
            (float(hts[g // hss.size]), float(hss[g % hss.size]), np.unique(keys[sel]))
            for g, sel in slices.items()
        ]
        if self.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                done = list(pool.map(lambda j: self._compute_group(*j), jobs))
        else:
            done = [self._compute_group(*j) for j in jobs]
        for hx, hy, newkeys, vals in done:
            for k, v in zip(newkeys.tolist(), vals.tolist()):
                self._cache[(hx, hy, k)] = v
            self.spectral_values += newkeys.size

        out = np.empty(keys.size, dtype=complex)
        for (g, sel), (hx, hy, _) in zip(slices.items(), jobs):
            uk, inv = np.unique(keys[sel], return_inverse=True)
            vals = np.fromiter(
                (self._cache[(hx, hy, int(k))] for k in uk.tolist()),
                dtype=complex,
                count=uk.size,
            )
            out[sel] = vals[inv]
        return out.reshape(shape)

    # ------------------------------------------------------------------
    # public evaluation
    # ------------------------------------------------------------------

    def g0_matrix(
        self,
        targets: np.ndarray,
        sources: np.ndarray,
        allow_coincident: bool = False,
    ) -> np.ndarray:
        """Full kernel G0(target_i, source_j) as an (n_targets, n_sources) matrix.

        With ``allow_coincident`` the free-space singular part is skipped on
        exactly coincident same-side pairs (the finite spectral correction is
        still returned); the volume solver uses this for its diagonal, which
        it replaces by an equivalent-disk closed form.
        """
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        sources = np.atleast_2d(np.asarray(sources, dtype=float))
        out = self._correction_block(targets, sources)

        same = (targets[:, 1] >= 0.0)[:, None] == (sources[:, 1] >= 0.0)[None, :]
        dist = np.hypot(
            targets[:, 0][:, None] - sources[:, 0][None, :],
            targets[:, 1][:, None] - sources[:, 1][None, :],
        )
        tiny = dist < 1e-14
        if np.any(tiny & ~same):
            raise CoincidentPointsError("coincident points on opposite sides of the plane")
        if np.any(tiny & same) and not allow_coincident:
            raise CoincidentPointsError("kernel requested at coincident points")
        upper = (targets[:, 1] >= 0.0)[:, None] & (sources[:, 1] >= 0.0)[None, :]
        for side_mask, kappa in ((upper, self.medium.kappa1), (same & ~upper, self.medium.kappa2)):
            mask = side_mask & ~tiny
            if np.any(mask):
                out[mask] += 0.25j * hankel1_0_many(kappa * dist[mask])
        return out

    def g0_scattered_matrix(self, targets: np.ndarray, sources: np.ndarray) -> np.ndarray:
        """Kernel minus the upper-medium free-space part, for sources above the
        plane: the reflected correction above, the transmitted field below."""
        sources = np.atleast_2d(np.asarray(sources, dtype=float))
        if np.any(sources[:, 1] <= 0.0):
            raise ValueError("scattered kernel is defined for sources above the plane")
        return self._correction_block(np.atleast_2d(np.asarray(targets, dtype=float)), sources)

    # ------------------------------------------------------------------
    # cache persistence
    # ------------------------------------------------------------------

    def save_cache(self, path) -> None:
        """Persist every cached spectral value (exact binary round trip)."""
        items = sorted(self._cache.items())
        np.savez(
            path,
            kappa1=self.medium.kappa1,
            kappa2=self.medium.kappa2,
            hx=np.asarray([k[0] for k, _ in items]),
            hy=np.asarray([k[1] for k, _ in items]),
            dxq=np.asarray([k[2] for k, _ in items], dtype=np.int64),
            val=np.asarray([v for _, v in items], dtype=complex),
        )

    def load_cache(self, path) -> int:
        """Merge a cache file written by :meth:`save_cache`; returns entry count."""
        with np.load(path) as data:
            if (
                float(data["kappa1"]) != self.medium.kappa1
                or float(data["kappa2"]) != self.medium.kappa2
            ):
                raise FileFormatError("kernel cache was written for a different medium")
            n = int(data["dxq"].size)
            for hx, hy, k, v in zip(data["hx"], data["hy"], data["dxq"], data["val"]):
                self._cache[(float(hx), float(hy), int(k))] = complex(v)
        return n


# ----------------------------------------------------------------------
# convenience wrappers
# ----------------------------------------------------------------------


def g0(medium: Medium, x, y, tabulator: KernelTabulator | None = None) -> complex:
    """Two-layer kernel G0(x, y) for points off the plane (heights x2 = 0 are
    treated as upper-side limits; the kernel is continuous across the plane)."""
    tab = tabulator if tabulator is not None else KernelTabulator(medium)
    return complex(tab.g0_matrix(np.asarray(x, float), np.asarray(y, float))[0, 0])


def g0_scattered(medium: Medium, x, y, tabulator: KernelTabulator | None = None) -> complex:
    """G0(x, y) - phi_k1(x, y) for x above the plane, G0(x, y) below; the
    source y must lie strictly above the plane."""
    tab = tabulator if tabulator is not None else KernelTabulator(medium)
    return complex(tab.g0_scattered_matrix(np.asarray(x, float), np.asarray(y, float))[0, 0])


def tabulate_kernel(
    medium: Medium,
    sources: np.ndarray,
    targets: np.ndarray,
    tol: float = 1e-11,
    threads: int = 1,
) -> np.ndarray:
    """Dense matrix of kernel values, entry [i, j] = G0(targets[i], sources[j])."""
    tab = KernelTabulator(medium, tol=tol, threads=threads)
    return tab.g0_matrix(np.asarray(targets, float), np.asarray(sources, float))


def _phi(medium: Medium, x, y) -> complex:
    """Upper-medium free-space kernel, re-exported for convenience."""
    return phi(medium.kappa1, x, y)
