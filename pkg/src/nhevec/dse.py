"""Deterministic equivalent of the Hermitized resolvent.

The self-consistent equation ``-1/m = w + m - |z|^2/(w + m)`` is cleared of
denominators by multiplying with ``m (w + m)``::

    -(w + m) = m (w + m)^2 - |z|^2 m
    0 = m^3 + 2 w m^2 + (w^2 + 1 - |z|^2) m + w

so ``m_z(w)`` is a root of that cubic (``m = 0`` and ``m = -w`` are never
roots of the original equation for ``w != 0``, so no spurious root enters).
The physical root is the one with ``Im m * Im w > 0``.  On the real axis the
cubic has real coefficients, so the density is positive exactly where its
discriminant (a polynomial in ``E``) is negative.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketFailure, BranchAmbiguity, QuadratureFailure

__all__ = [
    "DetEquivalent",
    "DensityProfile",
    "cubic_coeffs",
    "solve_mz",
    "rho_z",
    "support",
    "quantiles",
    "kappa_bulk",
    "eta_zt",
    "write_rho_csv",
    "write_quantiles_csv",
]

IMAG_LIFT = 1e-10
RESIDUAL_TOL = 1e-12


def cubic_coeffs(z, w):
    a2 = abs(z) ** 2
    return np.array([1.0, 2.0 * w, w * w + 1.0 - a2, w], dtype=np.complex128)


def _residual(z, w, m):
    return abs(-1.0 / m - (w + m - abs(z) ** 2 / (w + m)))


def _newton(z, w, m, steps=1):
    c = cubic_coeffs(z, w)
    for _ in range(steps):
        p = ((c[0] * m + c[1]) * m + c[2]) * m + c[3]
        dp = (3 * c[0] * m + 2 * c[1]) * m + c[2]
        if dp == 0:
            break
        m = m - p / dp
    return m


@dataclass(frozen=True)
class DetEquivalent:
    z: complex
    w: complex
    m: complex

    @property
    def u(self):
        return self.m / (self.w + self.m)

    @property
    def M(self):
        zc = complex(self.z)
        return np.array(
            [[self.m, -zc * self.u], [-zc.conjugate() * self.u, self.m]],
            dtype=np.complex128,
        )

    @property
    def residual(self):
        return _residual(self.z, self.w, self.m)


def _admissible(z, w):
    r = np.roots(cubic_coeffs(z, w))
    return r[r.imag * w.imag > 0]


def _track(z, w, n_steps=400):
    """Follow the physical root along ``i -> w`` (straight segment, Im > 0)."""
    m = 1j * (np.sqrt(5.0) - 1.0) / 2.0 if z == 0 else None
    path = 1j + (w - 1j) * np.linspace(0.0, 1.0, n_steps + 1)
    if m is None:
        m = _unique_root(z, 1j)
    for wk in path[1:]:
        r = np.roots(cubic_coeffs(z, wk))
        m = r[np.argmin(np.abs(r - m))]
    return m


def _unique_root(z, w):
    cand = _admissible(z, w)
    if cand.size == 1:
        return cand[0]
    if cand.size == 0:
        raise BranchAmbiguity(f"no admissible root at z={z}, w={w}")
    d = np.abs(cand[:, None] - cand[None, :]) + np.eye(cand.size) * np.inf
    if d.min() < 1e-10:
        raise BranchAmbiguity(f"admissible roots coalesce at z={z}, w={w}")
    return _track(z, w)


def solve_mz(z, w):
    """Solution ``m_z(w)`` of the self-consistent equation.

    For real ``w`` the boundary value from the upper half plane is returned:
    the root is selected at ``w + 1e-10 i`` and then polished by one Newton
    step on the real-axis cubic.
    """
    z = complex(z)
    w = complex(w)
    if w.imag < 0:
        raise ValueError("w must lie in the closed upper half plane")
    if w.imag == 0:
        lifted = w + 1j * IMAG_LIFT
        m = _unique_root(z, lifted)
        m = _newton(z, w, m, steps=1)
        # on the support the real cubic has a conjugate pair; keep Im m >= 0
        if m.imag < 0:
            m = m.conjugate()
    else:
        m = _unique_root(z, w)
        m = _newton(z, w, m, steps=1)
    return DetEquivalent(z, w, complex(m))


def _disc_poly(z):
    """Discriminant of the real-``E`` cubic as a polynomial in ``E``."""
    P = np.polynomial.Polynomial
    E = P([0.0, 1.0])
    a, b, c, d = P([1.0]), 2 * E, E * E + (1.0 - abs(z) ** 2), E
    return 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d


def support(z):
    """Support of ``rho_z`` as a list of closed intervals ``(a, b)``."""
    D = _disc_poly(z)
    r = D.roots()
    r = np.sort(r[np.abs(r.imag) < 1e-9].real)
    r = np.unique(np.round(r, 14))
    pts = np.concatenate([[-np.inf], r, [np.inf]])
    out = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if not (np.isfinite(lo) and np.isfinite(hi)):
            continue
        if D(0.5 * (lo + hi)) < 0:
            if out and abs(out[-1][1] - lo) < 1e-14:
                out[-1] = (out[-1][0], float(hi))
            else:
                out.append((float(lo), float(hi)))
    return out


def _rho_real(z, E, intervals=None):
    intervals = support(z) if intervals is None else intervals
    if not any(a < E < b for a, b in intervals):
        return 0.0
    r = np.roots(cubic_coeffs(z, E).real.astype(float))
    return float(np.max(np.abs(r.imag)) / np.pi)


def rho_z(z, E):
    """Density ``pi^-1 |Im m_z(E + i0)|``; zero off the support."""
    E = float(E)
    if not any(a < E < b for a, b in support(z)):
        return 0.0
    return abs(solve_mz(z, E).m.imag) / np.pi


# --- quadrature -----------------------------------------------------------


def _simpson_panels(f, a, b, tol, max_depth=50):
    """Adaptive Simpson; returns panels ``(a, b, fa, fm, fb, integral)``."""
    panels = []

    def simpson(fa, fm, fb, h):
        return h * (fa + 4 * fm + fb) / 6.0

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(0.5 * (lo + mid)), f(0.5 * (mid + hi))
        left = simpson(flo, fl, fmid, mid - lo)
        right = simpson(fmid, fr, fhi, hi - mid)
        err = left + right - whole
        if abs(err) <= 15 * eps or hi - lo < 1e-13:
            c = (err / 15.0)
            panels.append((lo, mid, flo, fl, fmid, left + 0.5 * c))
            panels.append((mid, hi, fmid, fr, fhi, right + 0.5 * c))
            continue
        if depth >= max_depth:
            raise QuadratureFailure(f"adaptive Simpson did not converge on [{lo}, {hi}]")
        stack.append((mid, hi, fmid, fr, fhi, right, eps / 2, depth + 1))
        stack.append((lo, mid, flo, fl, fmid, left, eps / 2, depth + 1))
    panels.sort(key=lambda p: p[0])
    return panels


def _parabola_integral(p, x):
    """Integral from panel start to ``x`` of the Simpson interpolant."""
    lo, hi, fa, fm, fb, _ = p
    h = hi - lo
    s = (x - lo) / h
    # Lagrange basis on s = 0, 1/2, 1
    la = s - 1.5 * s * s + (2.0 / 3.0) * s**3
    lm = 4 * (s * s / 2 - s**3 / 3)
    lb = -0.5 * s * s + (2.0 / 3.0) * s**3
    return h * (fa * la + fm * lm + fb * lb)


@dataclass
class DensityProfile:
    """Density, quantiles and bulk of ``rho_z``.

    ``gamma[j + N]`` is the quantile ``gamma_{j,z}`` for ``j = -N..N``.
    """

    z: complex
    N: int
    grid: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    mass: float
    intervals: list = field(default_factory=list)
    bulk: list = field(default_factory=list)

    def quantile(self, j):
        return float(self.gamma[j + self.N])


class _Cumulative:
    """Right half of ``rho_z`` (symmetric) as a panel table."""

    def __init__(self, z, tol=1e-10):
        self.z = complex(z)
        self.intervals = support(z)
        f = lambda E: _rho_real(self.z, E, self.intervals)  # noqa: E731
        pos = [(max(a, 0.0), b) for a, b in self.intervals if b > 0]
        self.panels = []
        for a, b in pos:
            # split at interior nodes so the square-root edges are isolated
            self.panels += _simpson_panels(f, a, b, tol / max(len(pos), 1))
        self.lo = np.array([p[0] for p in self.panels])
        self.cum = np.concatenate([[0.0], np.cumsum([p[5] for p in self.panels])])
        self.half = float(self.cum[-1])

    def invert(self, target, tol=1e-12):
        if target <= 0:
            return 0.0
        if target >= self.half:
            return float(self.panels[-1][1])
        k = int(np.searchsorted(self.cum, target, side="right") - 1)
        k = min(k, len(self.panels) - 1)
        p = self.panels[k]
        rem = target - self.cum[k]
        lo, hi = p[0], p[1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _parabola_integral(p, mid) < rem:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol:
                break
        return 0.5 * (lo + hi)


def quantiles(z, N, tau=0.0, kappa=1e-3, n_grid=401, tol=1e-10):
    """Density profile of ``rho_z`` with the ``2N + 1`` quantiles.

    ``gamma_{j,z}`` solves ``int_{-inf}^{gamma} rho_z = (j + N)/(2N)``; by
    symmetry only ``int_0^gamma rho_z = j/(2N)`` is inverted for ``j > 0``.
    """
    if abs(z) > 1 - tau:
        raise ValueError("|z| must not exceed 1 - tau")
    N = int(N)
    if N < 1:
        raise ValueError("N must be positive")
    cum = _Cumulative(z, tol=tol)
    mass = 2.0 * cum.half
    if abs(mass - 1.0) > 1e-8:
        raise QuadratureFailure(f"density mass {mass!r} differs from 1")
    pos = np.array([cum.invert(j / (2.0 * N)) for j in range(1, N + 1)])
    gamma = np.concatenate([-pos[::-1], [0.0], pos])
    edge = max(b for _, b in cum.intervals)
    grid = np.linspace(-edge, edge, n_grid)
    rho = np.array([_rho_real(complex(z), E, cum.intervals) for E in grid])
    return DensityProfile(
        complex(z), N, grid, rho, gamma, mass, cum.intervals, kappa_bulk(z, kappa)
    )


def kappa_bulk(z, kappa, n_grid=2001):
    """``{E : rho_z(E) >= kappa^(1/3)}`` as a list of closed intervals."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    level = kappa ** (1.0 / 3.0)
    iv = support(z)
    if not iv:
        return []
    f = lambda E: _rho_real(complex(z), E, iv) - level  # noqa: E731
    lo_all = min(a for a, _ in iv)
    hi_all = max(b for _, b in iv)
    xs = np.linspace(lo_all, hi_all, n_grid)
    vals = np.array([f(x) for x in xs])

    def refine(a, b):
        fa = f(a)
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = f(m)
            if (fm >= 0) == (fa >= 0):
                a, fa = m, fm
            else:
                b = m
            if b - a < 1e-14:
                break
        return 0.5 * (a + b)

    out = []
    inside = vals >= 0
    start = None
    for k in range(n_grid):
        if inside[k] and start is None:
            start = xs[k] if k == 0 else refine(xs[k - 1], xs[k])
        if start is not None and (not inside[k] or k == n_grid - 1):
            end = xs[k] if inside[k] else refine(xs[k - 1], xs[k])
            out.append((float(start), float(end)))
            start = None
    return out


def eta_zt(spectrum, t, lo=1e-8, hi=1e2, max_iter=200):
    """``eta > 0`` with ``t <H_z(eta)> = 1`` by bisection in ``log eta``.

    ``<H_z(eta)>`` is strictly decreasing, so the root is unique.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    s2 = spectrum.positive ** 2

    def g(eta):
        return t * float(np.mean(1.0 / (s2 + eta * eta))) - 1.0

    a, b = np.log(lo), np.log(hi)
    ga, gb = g(lo), g(hi)
    if ga < 0 or gb > 0:
        raise BracketFailure(f"no sign change of t<H>-1 on [{lo}, {hi}] for t={t}")
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        gm = g(np.exp(mid))
        if abs(gm) <= 1e-12 or b - a < 1e-15:
            break
        if gm > 0:
            a = mid
        else:
            b = mid
    eta = float(np.exp(mid))
    if abs(g(eta)) > 1e-10:
        raise BracketFailure(f"residual {g(eta):.3g} after bisection")
    return eta


def write_rho_csv(path, profile):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["E", "rho"])
        for E, r in zip(profile.grid, profile.rho):
            wr.writerow([f"{E:.17g}", f"{r:.17g}"])


def write_quantiles_csv(path, profile):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["j", "gamma"])
        for j in range(-profile.N, profile.N + 1):
            wr.writerow([j, f"{profile.quantile(j):.17g}"])
