"""Centro-affine invariant functionals of a body: Omega_p, Omega_phi, Omega_{2,p}, ...

Every p-affine quantity is evaluated through the exponent ``e = p / (n + p)``:

    Omega_p(K) = integral over S^{n-1} of  kappa^e * h / k  d(mu)

(the cone measure pulled back to the sphere).  ``e = 0`` gives n Vol(K) and
``e = 1`` gives n Vol(K polar), which is how p = 0 and p = +-inf are handled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .body import ConvexBody, _radii_matrix, _require, polar_volume, unit_ball_volume, volume
from .errors import BadIndex, DomainError

__all__ = [
    "PAffineIndex",
    "PhiSpec",
    "as_index",
    "omega_exponent",
    "omega_p",
    "omega_1p",
    "omega_phi",
    "omega_2p",
    "volume_product",
    "isoperimetric_ratio",
    "dual_index",
    "dual_p",
    "ball_omega",
]


@dataclass(frozen=True)
class PAffineIndex:
    """An admissible index p in dimension ``dim`` (p may be +-inf)."""

    p: float
    dim: int

    def __post_init__(self):
        p = float(self.p)
        if self.dim not in (2, 3):
            raise DomainError(f"unsupported dimension {self.dim}")
        if p == 0.0 or p == -self.dim or math.isnan(p):
            raise BadIndex(f"p = {p:g} is excluded (p must avoid 0 and -n = {-self.dim})")
        object.__setattr__(self, "p", p)

    @property
    def e(self) -> float:
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.dim + self.p)

    @property
    def sgn(self) -> float:
        """sgn(p / (n + p))."""
        return 1.0 if self.e > 0 else -1.0


def as_index(p, dim: int) -> PAffineIndex:
    if isinstance(p, PAffineIndex):
        if p.dim != dim:
            raise DomainError(f"index built for n={p.dim}, body has n={dim}")
        return p
    return PAffineIndex(float(p), dim)


@dataclass(frozen=True)
class PhiSpec:
    """Power weight phi(s) = scale * s**alpha."""

    alpha: float
    scale: float = 1.0
    family: str = "power"

    def __post_init__(self):
        if self.family != "power":
            raise DomainError(f"unsupported phi family {self.family!r}")
        if not (self.alpha > 0 and self.scale > 0):
            raise DomainError("phi needs alpha > 0 and scale > 0")

    @property
    def lr_admissible(self) -> bool:
        """Concave with phi(0+) = 0 and phi(s)/s -> 0 at infinity."""
        return 0.0 < self.alpha < 1.0

    def __call__(self, s):
        return self.scale * np.asarray(s, dtype=float) ** self.alpha


def omega_exponent(body: ConvexBody, e: float) -> float:
    """Integral of kappa^e against the cone measure."""
    _require(body)
    if not math.isfinite(e):
        raise BadIndex("exponent must be finite")
    return body.grid.integrate(body.kappa**e * body.h * body.f)


def omega_p(body: ConvexBody, p) -> float:
    """p-affine surface area (always positive)."""
    idx = as_index(p, body.dim)
    return omega_exponent(body, idx.e)


def omega_1p(body: ConvexBody, p) -> float:
    """First flow invariant, sgn(p/(n+p)) * Omega_p: minus the volume rate along the p-flow."""
    idx = as_index(p, body.dim)
    return idx.sgn * omega_exponent(body, idx.e)


def omega_phi(body: ConvexBody, phi: PhiSpec) -> float:
    _require(body)
    return body.grid.integrate(phi(body.kappa) * body.h * body.f)


def omega_2p(body: ConvexBody, p) -> float:
    """Closed-form second invariant of the p-flow.

    n(p-1)/(n+p) * Omega_{2np/(n-p)}(K)
        - n(n-1)/(n+p) * integral of g s(g, h, ..., h) over the sphere,

    with g = h kappa^{p/(n+p)}.  The first index is handled through its
    exponent 2p/(n+p), so p = n needs no special case.
    """
    idx = as_index(p, body.dim)
    if math.isinf(idx.p):
        raise BadIndex("omega_2p needs a finite p")
    n, pp, e = body.dim, idx.p, idx.e
    first = n * (pp - 1.0) / (n + pp) * omega_exponent(body, 2.0 * e)
    g = body.h * body.kappa**e
    a = _radii_matrix(body.grid, g)
    if n == 2:
        s = a[0]
    else:
        b = body.radii
        s = 0.5 * (a[0] * b[2] + a[2] * b[0]) - a[1] * b[1]
    second = (n - 1.0) * n / (n + pp) * body.grid.integrate(g * s)
    return first - second


def volume_product(body: ConvexBody) -> float:
    return volume(body) * polar_volume(body)


def isoperimetric_ratio(body: ConvexBody, p) -> float:
    """Omega_p^{n+p} / (n^{n+p} omega_n^{2p} Vol^{n-p}); at most 1 for p >= 1."""
    idx = as_index(p, body.dim)
    if not (idx.p >= 1.0) or math.isinf(idx.p):
        raise BadIndex(f"isoperimetric ratio needs finite p >= 1, got {idx.p:g}")
    n, pp = body.dim, idx.p
    om = omega_p(body, idx)
    w = unit_ball_volume(n)
    vol = volume(body)
    log_ratio = (n + pp) * math.log(om) - (n + pp) * math.log(n) - 2 * pp * math.log(w) - (n - pp) * math.log(vol)
    return math.exp(log_ratio)


def dual_index(q: float, n: int) -> float:
    """Index of the polar invariant: Omega_q(K) = Omega_{n^2/q}(K polar)."""
    if q == 0:
        raise BadIndex("dual index undefined at q = 0")
    if math.isinf(q):
        return 0.0
    return n * n / q


def dual_p(p: float, n: int) -> float:
    """Index of the flow followed by the polar body: -np/(n+2p)."""
    if math.isinf(p):
        return -n / 2.0
    if n + 2 * p == 0:
        raise BadIndex(f"dual flow index undefined at p = {-n / 2:g}")
    return -n * p / (n + 2 * p)


def ball_omega(radius: float, p: float, n: int) -> float:
    """Omega_p of the centred ball of given radius (closed form)."""
    e = as_index(p, n).e
    return n * unit_ball_volume(n) * radius**n * radius ** (-2.0 * n * e)
