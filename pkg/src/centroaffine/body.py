"""Smooth convex bodies represented by their support function on a sphere grid."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DetNotOne, DomainError, InvalidBody, NumericsError, PolarDegenerate
from .spherical import ScalarField, SphereGrid, _check_unit, make_grid

__all__ = [
    "EPS_H",
    "EPS_C",
    "ConvexBody",
    "ValidityReport",
    "validate",
    "curvature_function",
    "centro_affine_curvature",
    "volume",
    "polar_volume",
    "boundary_point",
    "polar_body",
    "mixed_curvature",
    "mixed_volume",
    "linear_image",
    "unit_ball_volume",
    "ball",
    "ellipsoid",
    "body_to_json",
    "body_from_json",
    "save_body",
    "load_body",
]

EPS_H = 1e-9
EPS_C = 1e-9


def unit_ball_volume(n: int) -> float:
    """Volume of the Euclidean unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    min_h: float
    min_eig: float
    failing_node: int | None = None


def _radii_matrix(grid, values):
    """Entries of grad^2 g + g Id in the orthonormal frame (a11, a12, a22), or (g'' + g,) on S^1."""
    _, hess = grid.frame_derivatives(values)
    if grid.dim == 2:
        return (hess[0] + values,)
    return (hess[0] + values, hess[1], hess[2] + values)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Support function ``h`` sampled on ``grid``.

    Curvature data is computed once at construction.  A body built from an
    arbitrary field may be invalid; :func:`validate` reports why, and every
    geometric operation refuses invalid bodies with :class:`InvalidBody`.
    """

    grid: SphereGrid
    h: np.ndarray
    report: ValidityReport = field(init=False, repr=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float).ravel()
        if h.size != self.grid.size:
            raise DomainError(f"support field has {h.size} values, grid has {self.grid.size}")
        if not np.all(np.isfinite(h)):
            raise NumericsError("support field contains non-finite values")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        a = _radii_matrix(self.grid, h)
        if self.grid.dim == 2:
            f = a[0]
            eig = a[0]
        else:
            a11, a12, a22 = a
            f = a11 * a22 - a12**2
            eig = 0.5 * (a11 + a22 - np.sqrt((a11 - a22) ** 2 + 4.0 * a12**2))
        object.__setattr__(self, "radii", a)
        object.__setattr__(self, "f", f)
        i_h, i_e = int(np.argmin(h)), int(np.argmin(eig))
        min_h, min_eig = float(h[i_h]), float(eig[i_e])
        ok = min_h > EPS_H and min_eig > EPS_C
        failing = None if ok else (i_h if min_h <= EPS_H else i_e)
        object.__setattr__(self, "report", ValidityReport(ok, min_h, min_eig, failing))
        if ok:
            kappa = 1.0 / (f * h ** (self.dim + 1))
        else:
            kappa = None
        object.__setattr__(self, "kappa", kappa)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def ok(self) -> bool:
        return self.report.ok

    def support(self) -> ScalarField:
        return ScalarField(self.grid, self.h)


def validate(body: ConvexBody) -> ValidityReport:
    return body.report


def _require(body: ConvexBody):
    if not body.report.ok:
        r = body.report
        raise InvalidBody(
            f"body is not in the valid class: min h = {r.min_h:.3e}, "
            f"min eigenvalue = {r.min_eig:.3e} (node {r.failing_node})"
        )


def curvature_function(body: ConvexBody) -> ScalarField:
    """Product of principal radii, 1/k = det(grad^2 h + h Id)."""
    _require(body)
    return ScalarField(body.grid, body.f)


def centro_affine_curvature(body: ConvexBody) -> ScalarField:
    """k / h^{n+1} as a function of the normal."""
    _require(body)
    return ScalarField(body.grid, body.kappa)


def volume(body: ConvexBody) -> float:
    _require(body)
    return body.grid.integrate(body.h * body.f) / body.dim


def polar_volume(body: ConvexBody) -> float:
    _require(body)
    return body.grid.integrate(body.h ** (-body.dim)) / body.dim


def _boundary_points(grid, h, dirs):
    if grid.dim == 2:
        f, grad, _ = grid.interpolate(h, dirs, derivatives=True)
        perp = np.column_stack([-dirs[:, 1], dirs[:, 0]])
        return f[:, None] * dirs + grad[0][:, None] * perp
    polar = np.hypot(dirs[:, 0], dirs[:, 1]) < 1e-6
    if polar.any():
        # the frame is singular at the poles: differentiate h along two great circles instead
        dirs = dirs.copy()
        u = dirs[polar]
        out = np.empty_like(dirs)
        hu = grid.interpolate(h, u)
        x = hu[:, None] * u
        s = 1e-3
        for axis in (0, 1):
            w = np.zeros_like(u)
            w[:, axis] = 1.0
            vals = [grid.interpolate(h, math.cos(k * s) * u + math.sin(k * s) * w) for k in (-2, -1, 1, 2)]
            slope = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * s)
            x += slope[:, None] * w
        out[polar] = x
        dirs[polar] = [1.0, 0.0, 0.0]
        out[~polar] = _boundary_points(grid, h, dirs)[~polar]
        return out
    f, grad, _ = grid.interpolate(h, dirs, derivatives=True)
    e_t, e_p = grid.frames(dirs)
    return f[:, None] * dirs + grad[0][:, None] * e_t + grad[1][:, None] * e_p


def boundary_point(body: ConvexBody, u) -> np.ndarray:
    """Point of the boundary whose outer unit normal is ``u``: X = h u + grad h."""
    _require(body)
    u = _check_unit(u, body.dim)
    pts = _boundary_points(body.grid, body.h, np.atleast_2d(u))
    return pts[0] if np.ndim(u) == 1 else pts


def _polar_circle(body, oversample):
    grid, h = body.grid, body.h
    c = grid.circle_coefficients(h)
    dense = 2.0 * np.pi * np.arange(oversample * grid.m) / (oversample * grid.m)
    hd = grid.eval_circle(c, dense)
    target = grid.theta
    # the polar's support at v is max_u (u.v)/h(u); start Newton at the dense argmax
    start = np.empty_like(target)
    for lo in range(0, target.size, 256):
        t = target[lo : lo + 256]
        score = np.cos(dense[None, :] - t[:, None]) / hd[None, :]
        start[lo : lo + 256] = dense[np.argmax(score, axis=1)]
    th = start
    for _ in range(30):
        h0 = grid.eval_circle(c, th)
        h1 = grid.eval_circle(c, th, 1)
        h2 = grid.eval_circle(c, th, 2)
        # boundary point X(th) is parallel to v  <=>  th + atan(h'/h) = target
        res = np.angle(np.exp(1j * (th - target + np.arctan2(h1, h0))))
        slope = h0 * (h0 + h2) / (h0**2 + h1**2)
        step = np.clip(res / slope, -0.1, 0.1)
        th = th - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return np.cos(th - target) / grid.eval_circle(c, th)


def _polar_sphere(body, oversample):
    grid, h = body.grid, body.h
    k = max(2, int(math.ceil(math.sqrt(oversample))))
    dense = make_grid(3, k * grid.n_theta, k * grid.n_phi)
    dd = dense.directions
    hd = grid.interpolate(h, dd)
    target = grid.directions
    u = np.empty_like(target)
    for lo in range(0, target.shape[0], 128):
        v = target[lo : lo + 128]
        score = (v @ dd.T) / hd[None, :]
        u[lo : lo + 128] = dd[np.argmax(score, axis=1)]
    for _ in range(40):
        f, grad, hess = grid.interpolate(h, u, derivatives=True)
        e_t, e_p = grid.frames(u)
        X = f[:, None] * u + grad[0][:, None] * e_t + grad[1][:, None] * e_p
        r = np.linalg.norm(X, axis=1)
        w = X / r[:, None]
        a11, a12, a22 = hess[0] + f, hess[1], hess[2] + f
        cols = []
        for dx in (a11[:, None] * e_t + a12[:, None] * e_p, a12[:, None] * e_t + a22[:, None] * e_p):
            proj = dx - np.sum(dx * w, axis=1)[:, None] * w
            cols.append(proj / r[:, None])
        b = target - np.sum(target * w, axis=1)[:, None] * w
        j11 = np.sum(cols[0] * cols[0], axis=1)
        j12 = np.sum(cols[0] * cols[1], axis=1)
        j22 = np.sum(cols[1] * cols[1], axis=1)
        r1 = np.sum(cols[0] * b, axis=1)
        r2 = np.sum(cols[1] * b, axis=1)
        det = j11 * j22 - j12**2
        x1 = (j22 * r1 - j12 * r2) / det
        x2 = (j11 * r2 - j12 * r1) / det
        size = np.hypot(x1, x2)
        scale = np.minimum(1.0, 0.2 / np.maximum(size, 1e-300))
        x1, x2 = x1 * scale, x2 * scale
        u = u + x1[:, None] * e_t + x2[:, None] * e_p
        u /= np.linalg.norm(u, axis=1)[:, None]
        if np.max(size) < 1e-14:
            break
    return np.sum(u * target, axis=1) / grid.interpolate(h, u)


def polar_body(body: ConvexBody, oversample: int = 4) -> ConvexBody:
    """Polar body with respect to the origin, on the same grid.

    The polar's support at ``v`` is ``max_u (u . v) / h(u)``.  The maximiser
    is located on a boundary sampling ``oversample`` times denser than the
    grid and then polished by Newton's method on the condition that the
    boundary point X(u) is parallel to ``v``.
    """
    _require(body)
    if body.dim == 2:
        hp = _polar_circle(body, oversample)
    else:
        hp = _polar_sphere(body, oversample)
    out = ConvexBody(body.grid, hp)
    if not out.ok:
        raise PolarDegenerate(f"polar body failed validation: {out.report}")
    return out


def _fields_on_one_grid(fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise DomainError("fields live on different grids")
    return grid


def mixed_curvature(*fields: ScalarField) -> ScalarField:
    """Mixed curvature function s(g_1, ..., g_{n-1}), by polarising the determinant."""
    grid = _fields_on_one_grid(fields)
    if len(fields) != grid.dim - 1:
        raise DomainError(f"need {grid.dim - 1} fields on S^{grid.dim - 1}, got {len(fields)}")
    if grid.dim == 2:
        return ScalarField(grid, _radii_matrix(grid, fields[0].values)[0])
    a = _radii_matrix(grid, fields[0].values)
    b = _radii_matrix(grid, fields[1].values)
    # (det(A+B) - det A - det B) / 2
    s = 0.5 * (a[0] * b[2] + a[2] * b[0]) - a[1] * b[1]
    return ScalarField(grid, s)


def mixed_volume(L: ScalarField, *fields: ScalarField) -> float:
    """V(L, L_1, ..., L_{n-1}) = (1/n) * integral of h_L s(h_1, ..., h_{n-1})."""
    grid = _fields_on_one_grid((L,) + fields)
    s = mixed_curvature(*fields)
    return grid.integrate(L.values * s.values) / grid.dim


def linear_image(body: ConvexBody, A) -> ConvexBody:
    """Image of the body under ``A`` in SL(n): h_AK(u) = |A^T u| h(A^T u / |A^T u|)."""
    _require(body)
    A = np.asarray(A, dtype=float)
    n = body.dim
    if A.shape != (n, n):
        raise DomainError(f"matrix must be {n}x{n}")
    if abs(np.linalg.det(A) - 1.0) > 1e-10:
        raise DetNotOne(f"det A = {np.linalg.det(A)!r}")
    w = body.grid.directions @ A
    r = np.linalg.norm(w, axis=1)
    hn = r * body.grid.interpolate(body.h, w / r[:, None])
    out = ConvexBody(body.grid, hn)
    if not out.ok:
        raise PolarDegenerate(f"resampled image failed validation: {out.report}")
    return out


# constructors -------------------------------------------------------------


def ball(grid: SphereGrid, radius: float = 1.0, center=None) -> ConvexBody:
    h = np.full(grid.size, float(radius))
    if center is not None:
        h = h + grid.directions @ np.asarray(center, dtype=float)
    return ConvexBody(grid, h)


def ellipsoid(grid: SphereGrid, axes) -> ConvexBody:
    """Origin-centred ellipse/ellipsoid with semi-axes along the coordinate axes."""
    axes = np.asarray(axes, dtype=float)
    if axes.size != grid.dim:
        raise DomainError(f"need {grid.dim} semi-axes")
    h = np.sqrt((grid.directions**2) @ (axes**2))
    return ConvexBody(grid, h)


# serialisation ------------------------------------------------------------


def _grid_from_json(obj):
    kind = obj.get("type")
    if kind == "uniform_angle":
        return make_grid(2, obj["m"])
    if kind == "gauss_fourier":
        return make_grid(3, obj["n_theta"], obj["n_phi"])
    raise DomainError(f"unknown grid type {kind!r}")


def body_to_json(body: ConvexBody) -> str:
    grid = json.dumps(body.grid.to_json())
    values = ", ".join(format(float(v), ".17g") for v in body.h)
    return f'{{"dim": {body.dim}, "grid": {grid}, "h": [{values}]}}'


def body_from_json(text) -> ConvexBody:
    obj = json.loads(text) if isinstance(text, str) else text
    grid = _grid_from_json(obj["grid"])
    if int(obj["dim"]) != grid.dim:
        raise DomainError("dim does not match grid type")
    return ConvexBody(grid, np.asarray(obj["h"], dtype=float))


def save_body(body: ConvexBody, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(body_to_json(body))
        fh.write("\n")


def load_body(path) -> ConvexBody:
    with open(path, encoding="utf-8") as fh:
        return body_from_json(fh.read())
