"""Convex floating bodies and weighted floating bodies of planar bodies.

A cap of K in direction u at depth eps is the part of K above the line
x.u = h(u) - eps.  With boundary points X(a) = h(a) nu(a) + h'(a) nu'(a)
parametrised by the normal angle a, the height along u restricted to the
boundary is

    g(psi) = h(a) cos(psi) - h'(a) sin(psi),   a = theta_u + psi,

and g'(psi) = -f(a) sin(psi), so each side of the cap is monotone and the
chord endpoints are found by bracketed Newton.  The cap area itself comes
from Green's formula taken about one chord endpoint P,

    A = 1/2 * integral over the arc of f(a) (h(a) - P.nu(a)) da,

which is exact up to quadrature and stays well conditioned for thin caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .body import ConvexBody, _require, polar_volume, volume
from .errors import CapTooLarge, DomainError, NonConvexCut, NumericsError
from .invariants import PhiSpec, omega_phi
from .spherical import _check_unit

__all__ = [
    "FLOATING_CONSTANT",
    "CapCut",
    "FloatingLimit",
    "cap_area",
    "cap_offset",
    "cap_offsets",
    "floating_body",
    "weighted_floating_body",
    "cap_delta",
    "omega_phi_limit",
]

# (h - h_phi(t)) / t -> FLOATING_CONSTANT * h phi(kappa) / kappa for the
# weighted caps in the plane; from the parabolic cap area (4/3) sqrt(2 f) eps^{3/2}.
FLOATING_CONSTANT = (81.0 / 1024.0) ** (1.0 / 3.0)

_GL_CACHE: dict = {}


def _gauss(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


class _Curve:
    """Trigonometric interpolant of a planar support function, truncated to its significant band."""

    def __init__(self, body: ConvexBody):
        c = body.grid.circle_coefficients(body.h)
        big = np.nonzero(np.abs(c) > 1e-15 * abs(c[0]))[0]
        kmax = int(big[-1]) if big.size else 0
        self.coef = c[: kmax + 1]
        self.k = np.arange(kmax + 1, dtype=float)
        self.band = kmax
        self.area = volume(body)

    def eval(self, a):
        """h, h', f = h + h'' at angles ``a`` (any shape)."""
        a = np.asarray(a, dtype=float)
        e = np.exp(1j * a[..., None] * self.k)
        h = (e @ self.coef).real
        hp = (e @ (1j * self.k * self.coef)).real
        hpp = (e @ (-self.k**2 * self.coef)).real
        return h, hp, h + hpp

    def point(self, a):
        h, hp, _ = self.eval(a)
        c, s = np.cos(a), np.sin(a)
        return np.stack([h * c - hp * s, h * s + hp * c], axis=-1)

    def endpoint(self, theta_u, level, side, psi0):
        """Solve g(psi) = level for psi in (0, pi) on one side (+1 or -1) of theta_u."""
        lo = np.zeros_like(level)
        hi = np.full_like(level, math.pi)
        psi = np.clip(psi0, 1e-300, math.pi * 0.999)
        scale = np.abs(level) + abs(self.coef[0])
        active = np.ones(level.shape, dtype=bool)
        for _ in range(200):
            a = theta_u + side * psi
            h, hp, f = self.eval(a)
            r = h * np.cos(psi) - side * hp * np.sin(psi) - level
            lo = np.where(active & (r > 0), psi, lo)
            hi = np.where(active & (r < 0), psi, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                new = psi + r / (f * np.sin(psi))
            bad = ~np.isfinite(new) | (new < lo) | (new > hi)
            new = np.where(bad, 0.5 * (lo + hi), new)
            new = np.where(active, new, psi)
            active &= ~((np.abs(new - psi) <= 1e-13 * psi) | (np.abs(r) <= 1e-15 * scale))
            psi = new
            if not active.any():
                break
        return psi

    def cap(self, theta_u, eps):
        """Area, chord length and endpoint angles of the caps at depth ``eps``."""
        h_u, _, f_u = self.eval(theta_u)
        level = h_u - eps
        psi0 = np.sqrt(2.0 * np.maximum(eps, 0.0) / f_u)
        pm = self.endpoint(theta_u, level, -1.0, psi0)
        pp = self.endpoint(theta_u, level, 1.0, psi0)
        a0, a1 = theta_u - pm, theta_u + pp
        span = a1 - a0
        nq = int(24 + math.ceil(self.band * float(np.max(span)) / 2.0))
        x, w = _gauss(nq)
        a = 0.5 * (a0 + a1)[:, None] + 0.5 * span[:, None] * x
        h, _, f = self.eval(a)
        p_start = self.point(a0)
        p_end = self.point(a1)
        support_about_p = h - (p_start[:, 0:1] * np.cos(a) + p_start[:, 1:2] * np.sin(a))
        area = 0.25 * span * ((f * support_about_p) @ w)
        chord = np.hypot(*(p_end - p_start).T)
        return area, chord, pm, pp


def _solve_offsets(curve: _Curve, theta_u, delta):
    """Depths eps with cap area delta, by safeguarded Newton (dA/deps is the chord length)."""
    theta_u = np.atleast_1d(np.asarray(theta_u, dtype=float))
    delta = np.broadcast_to(np.asarray(delta, dtype=float), theta_u.shape).copy()
    if np.any(delta <= 0):
        raise DomainError("cap area must be positive")
    if np.any(delta > 0.5 * curve.area * (1.0 + 1e-12)):
        raise CapTooLarge(
            f"cap area {float(np.max(delta)):.6g} is not below half the area {0.5 * curve.area:.6g}"
        )
    h_u, _, f_u = curve.eval(theta_u)
    h_opp, _, _ = curve.eval(theta_u + math.pi)
    lo = np.zeros_like(delta)
    hi = h_u + h_opp
    eps = np.minimum((3.0 * delta / (4.0 * np.sqrt(2.0 * f_u))) ** (2.0 / 3.0), 0.5 * hi)
    active = np.ones(delta.shape, dtype=bool)
    for _ in range(100):
        area, chord, _, _ = curve.cap(theta_u, eps)
        r = area - delta
        lo = np.where(active & (r < 0), eps, lo)
        hi = np.where(active & (r > 0), eps, hi)
        new = eps - r / chord
        bad = ~np.isfinite(new) | (new < lo) | (new > hi)
        new = np.where(bad, 0.5 * (lo + hi), new)
        new = np.where(active, new, eps)
        active &= ~((np.abs(r) <= 1e-12 * delta) | (np.abs(new - eps) <= 1e-13 * eps))
        eps = new
        if not active.any():
            break
    area, _, _, _ = curve.cap(theta_u, eps)
    if np.any(np.abs(area - delta) > 1e-10 * delta) or not np.all(np.isfinite(eps)):
        raise NumericsError("cap offset solve did not converge")
    return eps


@dataclass(frozen=True)
class CapCut:
    direction: np.ndarray
    delta: float
    epsilon: float
    new_support: float


def _need_plane(body):
    _require(body)
    if body.dim != 2:
        raise DomainError("floating bodies are implemented for n = 2 only")


def cap_area(body: ConvexBody, u, eps: float) -> float:
    """Exact area of the cap of depth ``eps`` in direction ``u``."""
    _need_plane(body)
    d = _check_unit(u, 2)
    theta = np.array([math.atan2(d[1], d[0])])
    return float(_Curve(body).cap(theta, np.array([float(eps)]))[0][0])


def cap_offset(body: ConvexBody, u, delta: float) -> CapCut:
    """Depth of the chord in direction ``u`` that cuts a cap of area ``delta``."""
    _need_plane(body)
    d = _check_unit(u, 2)
    theta = math.atan2(d[1], d[0])
    curve = _Curve(body)
    eps = float(_solve_offsets(curve, [theta], delta)[0])
    h_u = float(curve.eval(np.array([theta]))[0][0])
    return CapCut(d, float(delta), eps, h_u - eps)


def cap_offsets(body: ConvexBody, delta) -> np.ndarray:
    """Cap depths at every grid direction (``delta`` scalar or per node)."""
    _need_plane(body)
    return _solve_offsets(_Curve(body), body.grid.theta, delta)


def _cut(body, delta):
    new = ConvexBody(body.grid, body.h - cap_offsets(body, delta))
    if not new.ok:
        raise NonConvexCut(f"cut support field fails validation: {new.report}")
    return new


def floating_body(body: ConvexBody, delta: float) -> ConvexBody:
    """Support field h(u) - eps(u) of the convex floating body K_delta."""
    return _cut(body, delta)


def cap_delta(body: ConvexBody, phi: PhiSpec, t: float) -> np.ndarray:
    """Per-direction cap area (n+1)/omega_{n-1} [(t/2) phi(kappa) kappa^{-(n+2)/(n+1)}]^{(n+1)/2}."""
    _need_plane(body)
    if not t > 0:
        raise DomainError("t must be positive")
    k = body.kappa
    return 1.5 * (0.5 * t * phi(k) * k ** (-4.0 / 3.0)) ** 1.5


def weighted_floating_body(body: ConvexBody, phi: PhiSpec, t: float) -> ConvexBody:
    return _cut(body, cap_delta(body, phi, t))


@dataclass(frozen=True)
class FloatingLimit:
    """Polar-volume slopes of K_phi(t) and their extrapolation to t = 0.

    ``extrapolated[i]`` is the polynomial extrapolation through the first
    i+1 slopes; ``ratio`` is limit / Omega_phi, the measured constant.
    """

    t: tuple
    slopes: tuple
    extrapolated: tuple
    limit: float
    omega_phi: float
    ratio: float
    predicted: float = FLOATING_CONSTANT

    @property
    def ratio_is_one(self) -> bool:
        return abs(self.ratio - 1.0) <= 0.02


def _neville_zero(x, y):
    """Values at 0 of the interpolants through the first i+1 points, for every i."""
    x = list(x)
    table = list(y)
    out = [table[0]]
    # p[j] holds the interpolant on points j..i evaluated at 0
    p = [table[0]]
    for i in range(1, len(x)):
        q = [table[i]]
        for j in range(i - 1, -1, -1):
            val = (x[i] * p[j] - x[j] * q[0]) / (x[i] - x[j])
            q.insert(0, val)
        p = q
        out.append(p[0])
    return out


def omega_phi_limit(body: ConvexBody, phi: PhiSpec, t_list) -> FloatingLimit:
    _need_plane(body)
    ts = [float(t) for t in t_list]
    if not ts or any(t <= 0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise DomainError("t_list must be positive and strictly decreasing")
    v0 = polar_volume(body)
    slopes = [(polar_volume(weighted_floating_body(body, phi, t)) - v0) / t for t in ts]
    ext = _neville_zero(ts, slopes)
    om = omega_phi(body, phi)
    return FloatingLimit(tuple(ts), tuple(slopes), tuple(ext), ext[-1], om, ext[-1] / om)
