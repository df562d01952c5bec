"""Grids on the circle and the 2-sphere with spectral calculus.

The circle S^1 carries ``m`` equispaced nodes, trigonometric differentiation
and the trapezoid rule.  The sphere S^2 carries a Gauss-Legendre x Fourier
grid: colatitudes are the roots of P_{n_theta}(cos theta), longitudes are
equispaced.  Longitudinal derivatives are spectral.  Colatitudinal ones use
barycentric differentiation on the Gauss nodes in the variable x = cos theta,
applied per longitudinal wavenumber with the pole parity made explicit (an
even mode is a polynomial in x, an odd mode is sin(theta) times one), so no
node ever sits on a pole and nothing needs regularising there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError, DomainError, NumericsError

__all__ = [
    "SphereGrid",
    "ScalarField",
    "make_grid",
    "differentiate",
    "integrate",
    "evaluate_off_grid",
]

UNIT_TOL = 1e-12


def _barycentric_matrix(nodes, weights, x):
    """Rows of the barycentric Lagrange interpolation operator evaluated at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = x[:, None] - nodes[None, :]
    hit = np.abs(diff) < 1e-15
    diff = np.where(hit, 1.0, diff)
    mat = weights[None, :] / diff
    mat /= mat.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        mat[rows] = hit[rows].astype(float)
    return mat


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Discretisation of S^{n-1} for n in {2, 3}.

    Use :func:`make_grid` rather than calling the constructor directly.
    Node values of a field are stored as a flat array; on S^2 the layout is
    theta-major, ``index = i * n_phi + j``.
    """

    dim: int
    m: int = 0
    n_theta: int = 0
    n_phi: int = 0

    theta: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    directions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim == 2:
            m = self.m
            theta = 2.0 * np.pi * np.arange(m) / m
            weights = np.full(m, 2.0 * np.pi / m)
            dirs = np.column_stack([np.cos(theta), np.sin(theta)])
            k = np.arange(m // 2 + 1, dtype=float)
            object.__setattr__(self, "_k", k)
            phi = np.empty(0)
        else:
            nt, nphi = self.n_theta, self.n_phi
            xg, wg = leggauss(nt)
            # barycentric weights for Gauss-Legendre nodes (ascending x)
            lam = (-1.0) ** np.arange(nt) * np.sqrt((1.0 - xg**2) * wg)
            order = np.argsort(-xg)  # theta ascending
            x, wg, lam = xg[order], wg[order], lam[order]
            theta = np.arccos(x)
            phi = 2.0 * np.pi * np.arange(nphi) / nphi
            weights = np.outer(wg, np.full(nphi, 2.0 * np.pi / nphi)).ravel()
            st, ct = np.sin(theta), np.cos(theta)
            dirs = np.column_stack(
                [
                    np.outer(st, np.cos(phi)).ravel(),
                    np.outer(st, np.sin(phi)).ravel(),
                    np.repeat(ct, nphi),
                ]
            )
            dx = lam[None, :] / lam[:, None] / (x[:, None] - x[None, :] + np.eye(nt))
            np.fill_diagonal(dx, 0.0)
            np.fill_diagonal(dx, -dx.sum(axis=1))
            mm = np.arange(nphi // 2 + 1)
            object.__setattr__(self, "_x", x)
            object.__setattr__(self, "_lam", lam)
            object.__setattr__(self, "_sin", st)
            object.__setattr__(self, "_cos", ct)
            object.__setattr__(self, "_dx", dx)
            object.__setattr__(self, "_dx2", dx @ dx)
            object.__setattr__(self, "_modes", mm)
            object.__setattr__(self, "_odd", (mm % 2 == 1))
            mw = np.full(mm.size, 2.0 / nphi)
            mw[0] = mw[-1] = 1.0 / nphi
            object.__setattr__(self, "_mode_w", mw)
        for name, arr in (("theta", theta), ("phi", phi), ("weights", weights), ("directions", dirs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # identity -----------------------------------------------------------
    @property
    def key(self):
        return (self.dim, self.m) if self.dim == 2 else (self.dim, self.n_theta, self.n_phi)

    def __eq__(self, other):
        return isinstance(other, SphereGrid) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def size(self) -> int:
        return self.m if self.dim == 2 else self.n_theta * self.n_phi

    @property
    def shape(self) -> tuple:
        return (self.m,) if self.dim == 2 else (self.n_theta, self.n_phi)

    @property
    def measure(self) -> float:
        return 2.0 * np.pi if self.dim == 2 else 4.0 * np.pi

    def to_json(self) -> dict:
        if self.dim == 2:
            return {"type": "uniform_angle", "m": self.m}
        return {"type": "gauss_fourier", "n_theta": self.n_theta, "n_phi": self.n_phi}

    # quadrature ---------------------------------------------------------
    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    # circle calculus ----------------------------------------------------
    def _circle_derivative(self, values, order):
        c = np.fft.rfft(values)
        ik = 1j * self._k
        if order % 2:
            ik = ik.copy()
            ik[-1] = 0.0
        return np.fft.irfft(c * ik**order, n=self.m)

    def circle_coefficients(self, values):
        """Coefficients ``c_k`` with ``f(t) = Re sum_k c_k exp(i k t)``."""
        c = np.fft.rfft(values) / self.m
        c[1:-1] *= 2.0
        return c

    def eval_circle(self, coeffs, theta, order=0):
        """Evaluate the trigonometric interpolant (or a derivative) at angles."""
        theta = np.asarray(theta, dtype=float)
        flat = theta.ravel()
        e = np.exp(1j * np.outer(flat, self._k))
        out = (e @ (coeffs * (1j * self._k) ** order)).real
        return out.reshape(theta.shape)

    # sphere calculus ----------------------------------------------------
    def _mode_split(self, values):
        c = np.fft.rfft(values.reshape(self.shape), axis=1)
        g = np.where(self._odd[None, :], c / self._sin[:, None], c)
        return c, g

    def _theta_parts(self, g0, g1, g2, s, co):
        """Mode-wise f_theta and f_thetatheta from x-polynomial values and derivatives."""
        s = s[:, None]
        co = co[:, None]
        odd = self._odd[None, :]
        val = np.where(odd, s * g0, g0)
        t1 = np.where(odd, co * g0 - s**2 * g1, -s * g1)
        t2 = np.where(odd, -s * g0 - 3.0 * s * co * g1 + s**3 * g2, -co * g1 + s**2 * g2)
        return val, t1, t2

    def sphere_partials(self, values):
        """Coordinate partials (f_t, f_p, f_tt, f_tp, f_pp) at the nodes of S^2."""
        _, g = self._mode_split(values)
        g1 = self._dx @ g
        g2 = self._dx2 @ g
        val, t1, t2 = self._theta_parts(g, g1, g2, self._sin, self._cos)
        m = self._modes.astype(float)
        ik1 = 1j * m
        ik1[-1] = 0.0
        n = self.n_phi

        def back(a):
            return np.fft.irfft(a, n=n, axis=1).ravel()

        return (
            back(t1),
            back(val * ik1),
            back(t2),
            back(t1 * ik1),
            back(val * (-(m**2))),
        )

    def frame_derivatives(self, values):
        """Gradient and covariant Hessian of a field in the orthonormal frame.

        Returns ``(g_t, g_p), (H_tt, H_tp, H_pp)`` for S^2, or
        ``(f',), (f'',)`` for S^1.
        """
        if self.dim == 2:
            return (self._circle_derivative(values, 1),), (self._circle_derivative(values, 2),)
        ft, fp, ftt, ftp, fpp = self.sphere_partials(values)
        st = np.repeat(self._sin, self.n_phi)
        cot = np.repeat(self._cos / self._sin, self.n_phi)
        grad = (ft, fp / st)
        hess = (ftt, (ftp - cot * fp) / st, fpp / st**2 + cot * ft)
        return grad, hess

    def angles(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 2:
            return np.arctan2(points[:, 1], points[:, 0]), None
        th = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
        ph = np.arctan2(points[:, 1], points[:, 0])
        return th, ph

    def interpolate(self, values, points, derivatives=False):
        """Evaluate a nodal field at arbitrary unit vectors.

        With ``derivatives=True`` also return the frame gradient and covariant
        Hessian of the interpolant at those points (same layout as
        :meth:`frame_derivatives`).
        """
        th, ph = self.angles(points)
        if self.dim == 2:
            c = self.circle_coefficients(values)
            f = self.eval_circle(c, th)
            if not derivatives:
                return f
            return f, (self.eval_circle(c, th, 1),), (self.eval_circle(c, th, 2),)
        _, g = self._mode_split(values)
        bary = _barycentric_matrix(self._x, self._lam, np.cos(th))
        s, co = np.sin(th), np.cos(th)
        v0 = bary @ g
        e = np.exp(1j * np.outer(ph, self._modes)) * self._mode_w[None, :]
        if not derivatives:
            val = np.where(self._odd[None, :], s[:, None] * v0, v0)
            return np.sum(val * e, axis=1).real
        v1 = bary @ (self._dx @ g)
        v2 = bary @ (self._dx2 @ g)
        val, t1, t2 = self._theta_parts(v0, v1, v2, s, co)
        m = self._modes.astype(float)
        f = np.sum(val * e, axis=1).real
        ft = np.sum(t1 * e, axis=1).real
        fp = np.sum(val * e * (1j * m), axis=1).real
        ftt = np.sum(t2 * e, axis=1).real
        ftp = np.sum(t1 * e * (1j * m), axis=1).real
        fpp = np.sum(val * e * (-(m**2)), axis=1).real
        cot = co / s
        grad = (ft, fp / s)
        hess = (ftt, (ftp - cot * fp) / s, fpp / s**2 + cot * ft)
        return f, grad, hess

    def frames(self, points):
        """Orthonormal tangent frames (e_theta, e_phi) at unit vectors (S^2 only)."""
        th, ph = self.angles(points)
        ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
        e_t = np.column_stack([ct * cp, ct * sp, -st])
        e_p = np.column_stack([-sp, cp, np.zeros_like(sp)])
        return e_t, e_p


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values sampled at the nodes of a :class:`SphereGrid`."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size != self.grid.size:
            raise DomainError(f"field has {v.size} values, grid has {self.grid.size} nodes")
        if not np.all(np.isfinite(v)):
            raise NumericsError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def make_grid(dim: int, *resolution) -> SphereGrid:
    """Build a grid on S^{dim-1}.

    ``make_grid(2, m)`` gives ``m`` equispaced angles; ``make_grid(3, n_theta, n_phi)``
    (or ``make_grid(3, (n_theta, n_phi))``) gives a Gauss-Legendre x uniform grid.
    """
    if len(resolution) == 1 and np.ndim(resolution[0]) == 1:
        resolution = tuple(resolution[0])
    res = [int(r) for r in resolution]
    if dim == 2:
        if len(res) != 1:
            raise ConfigError("dimension 2 takes a single node count m")
        (m,) = res
        if m < 16 or m % 2:
            raise ConfigError(f"m must be even and >= 16, got {m}")
        return SphereGrid(2, m=m)
    if dim == 3:
        if len(res) != 2:
            raise ConfigError("dimension 3 takes (n_theta, n_phi)")
        nt, nphi = res
        if nt < 8 or nphi < 16 or nphi % 2:
            raise ConfigError(f"need n_theta >= 8 and even n_phi >= 16, got {nt}x{nphi}")
        return SphereGrid(3, n_theta=nt, n_phi=nphi)
    raise ConfigError(f"unsupported dimension {dim}")


def _checked(grid, arr):
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        raise NumericsError("differentiation produced non-finite values")
    return ScalarField(grid, arr)


def differentiate(field: ScalarField, order: int = 1):
    """Spectral derivatives of a field.

    On S^1 returns ``d^order f / dtheta^order`` as a single field.  On S^2
    ``order=1`` returns the frame gradient ``(f_theta, f_phi / sin theta)``
    and ``order=2`` the covariant Hessian ``(H_tt, H_tp, H_pp)``.
    """
    if order not in (1, 2):
        raise ConfigError("order must be 1 or 2")
    grid = field.grid
    with np.errstate(over="ignore", invalid="ignore"):
        if grid.dim == 2:
            return _checked(grid, grid._circle_derivative(field.values, order))
        grad, hess = grid.frame_derivatives(field.values)
    parts = grad if order == 1 else hess
    return tuple(_checked(grid, p) for p in parts)


def integrate(field: ScalarField) -> float:
    """Quadrature of a field over the sphere with respect to surface measure."""
    val = field.grid.integrate(field.values)
    if not np.isfinite(val):
        raise NumericsError("integral is not finite")
    return val


def _check_unit(direction, dim):
    d = np.asarray(direction, dtype=float)
    if d.shape[-1] != dim:
        raise DomainError(f"direction must have {dim} components")
    norms = np.linalg.norm(np.atleast_2d(d), axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise DomainError("direction is not a unit vector")
    return d


def evaluate_off_grid(field: ScalarField, direction) -> float:
    """Interpolate a field at a unit vector (exact for band-limited data)."""
    d = _check_unit(direction, field.grid.dim)
    out = field.grid.interpolate(field.values, d)
    if np.ndim(d) == 1:
        return float(out[0])
    return out
