"""Command-line front end.

    centroaffine body make --dim 2 --shape ellipse --axes 2,1 --grid 512 --out e.json
    centroaffine invariants --body e.json --p 1,2 --omega2 --out inv.csv
    centroaffine evolve --body e.json --p 1 --t-max 0.1 --out traj.jsonl
    centroaffine floating --body e.json --phi 0.5 --t-list 0.04,0.02,0.01 --out fl.csv
    centroaffine verify --seed 42 --trials 5 --dims 2 --out report.json

Exit status: 0 on success, 1 on violations or numerical failure, 2 on bad flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

from .body import ellipsoid, load_body, save_body, validate
from .errors import BadIndex, CentroAffineError, ConfigError, DomainError
from .flow import FlowConfig, evolve, write_trajectory
from .floating import omega_phi_limit
from .harness import DEFAULT_P_SET, BodySpec, format_table, random_body, run_suite
from .invariants import PAffineIndex, PhiSpec, isoperimetric_ratio, omega_2p, omega_p, omega_phi
from .spherical import make_grid


class UsageError(Exception):
    pass


def _floats(text, what):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"{what}: empty list")
    return vals


def _ints(text, what):
    vals = _floats(text, what)
    if any(v != int(v) for v in vals):
        raise UsageError(f"{what}: expected integers, got {text!r}")
    return [int(v) for v in vals]


def _index(p, dim):
    try:
        return PAffineIndex(p, dim)
    except BadIndex as exc:
        raise UsageError(f"--p {p:g}: excluded index ({exc})") from None


def _phi(text):
    vals = _floats(text, "--phi")
    if len(vals) > 2:
        raise UsageError("--phi takes alpha[,scale]")
    try:
        return PhiSpec(*vals)
    except DomainError as exc:
        raise UsageError(f"--phi: {exc}") from None


def _g(x):
    return "" if x is None else f"{x:.12g}"


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load(path):
    try:
        return load_body(path)
    except OSError as exc:
        raise UsageError(f"--body: cannot read {path}: {exc.strerror}") from None


def cmd_body_make(args):
    if args.dim not in (2, 3):
        raise UsageError("--dim must be 2 or 3")
    res = _ints(args.grid, "--grid")
    if len(res) != args.dim - 1:
        raise UsageError("--grid takes m for n=2 and ntheta,nphi for n=3")
    axes = tuple(_floats(args.axes, "--axes")) if args.axes else ()
    if args.shape == "ball":
        if len(axes) > 1:
            raise UsageError("--axes for a ball is a single radius")
    elif args.shape == "ellipse" and (args.dim != 2 or len(axes) != 2):
        raise UsageError("an ellipse needs --dim 2 and --axes a,b")
    elif args.shape == "ellipsoid" and (args.dim != 3 or len(axes) != 3):
        raise UsageError("an ellipsoid needs --dim 3 and --axes a,b,c")
    if any(a <= 0 for a in axes):
        raise UsageError("--axes must be positive")
    try:
        make_grid(args.dim, *res)
    except ConfigError as exc:
        raise UsageError(f"--grid: {exc}") from None
    degree, amp = 1, 0.0
    if args.perturb:
        pert = _floats(args.perturb, "--perturb")
        if len(pert) != 2 or pert[0] != int(pert[0]) or pert[0] < 1 or pert[1] < 0:
            raise UsageError("--perturb takes d,A with integer d >= 1 and A >= 0")
        degree, amp = int(pert[0]), pert[1]
    spec = BodySpec(args.dim, args.shape, axes, degree, amp, args.symmetric, tuple(res))
    if amp > 0:
        body = random_body(args.seed, 0, spec)
    else:
        body = ellipsoid(spec.grid(), spec.base_axes)
    save_body(body, args.out)
    rep = validate(body)
    print(f"wrote {args.out}: valid={rep.ok} min_h={rep.min_h:.6g} min_eig={rep.min_eig:.6g}")
    return 0


def cmd_invariants(args):
    body = _load(args.body)
    idxs = [_index(p, body.dim) for p in _floats(args.p, "--p")]
    phi = _phi(args.phi) if args.phi else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["p", "e", "omega_p", "omega_2p", "iso_ratio"] + (["omega_phi"] if phi else [])
    w.writerow(header)
    om_phi = omega_phi(body, phi) if phi else None
    for idx in idxs:
        o2 = omega_2p(body, idx) if args.omega2 and math.isfinite(idx.p) else None
        iso = isoperimetric_ratio(body, idx) if 1 <= idx.p < math.inf else None
        row = [_g(idx.p), _g(idx.e), _g(omega_p(body, idx)), _g(o2), _g(iso)]
        w.writerow(row + ([_g(om_phi)] if phi else []))
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_evolve(args):
    body = _load(args.body)
    driver = _phi(args.phi) if args.phi is not None else _index(args.p, body.dim)
    if args.t_max <= 0 or args.dt <= 0 or not 0 < args.safety <= 1 or args.stride < 1:
        raise UsageError("need --t-max > 0, --dt > 0, 0 < --safety <= 1, --stride >= 1")
    cfg = FlowConfig(driver, args.t_max, args.dt, args.safety, args.stride)
    traj = evolve(body, cfg)
    write_trajectory(traj, args.out)
    print(f"t={traj.times[-1]:.6g} snapshots={len(traj.snapshots)} stop={traj.stop_reason}")
    return 0 if traj.stop_reason in ("Completed", "NearExtinction") else 1


def cmd_floating(args):
    body = _load(args.body)
    phi = _phi(args.phi)
    ts = _floats(args.t_list, "--t-list")
    if any(t <= 0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise UsageError("--t-list must be positive and strictly decreasing")
    if body.dim != 2:
        raise UsageError("floating bodies are implemented for --dim 2 only")
    lim = omega_phi_limit(body, phi, ts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "slope", "extrapolated", "omega_phi_direct", "ratio"])
    for t, s, x in zip(lim.t, lim.slopes, lim.extrapolated):
        w.writerow([_g(t), _g(s), _g(x), _g(lim.omega_phi), _g(x / lim.omega_phi)])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_verify(args):
    dims = _ints(args.dims, "--dims")
    if any(d not in (2, 3) for d in dims):
        raise UsageError("--dims entries must be 2 or 3")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.p_set is None:
        p_set = DEFAULT_P_SET
    elif args.p_set.strip() == "":
        p_set = ()
    else:
        p_set = tuple(_floats(args.p_set, "--p-set"))
    for d in dims:
        for p in p_set:
            _index(p, d)
    report = run_suite(args.seed, args.trials, tuple(dims), p_set, args.out)
    print(format_table(report))
    bad = report.violations
    for r in bad:
        print(f"violation: {r.name} {r.details}", file=sys.stderr)
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="centroaffine", description="Centro-affine invariants of convex bodies.")
    sub = ap.add_subparsers(dest="command", required=True)

    body = sub.add_parser("body", help="construct bodies")
    bsub = body.add_subparsers(dest="action", required=True)
    mk = bsub.add_parser("make", help="write a body JSON file")
    mk.add_argument("--dim", type=int, required=True)
    mk.add_argument("--shape", choices=("ball", "ellipse", "ellipsoid"), required=True)
    mk.add_argument("--axes", default="")
    mk.add_argument("--perturb", default=None, metavar="d,A")
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--symmetric", action="store_true")
    mk.add_argument("--grid", required=True, metavar="m|ntheta,nphi")
    mk.add_argument("--out", required=True)
    mk.set_defaults(func=cmd_body_make)

    inv = sub.add_parser("invariants", help="table of p-affine invariants")
    inv.add_argument("--body", required=True)
    inv.add_argument("--p", required=True, metavar="LIST")
    inv.add_argument("--phi", default=None, metavar="alpha[,scale]")
    inv.add_argument("--omega2", action="store_true")
    inv.add_argument("--out", default=None)
    inv.set_defaults(func=cmd_invariants)

    ev = sub.add_parser("evolve", help="run a p-flow or phi-flow")
    ev.add_argument("--body", required=True)
    drv = ev.add_mutually_exclusive_group(required=True)
    drv.add_argument("--p", type=float)
    drv.add_argument("--phi", default=None, metavar="alpha[,scale]")
    ev.add_argument("--t-max", type=float, required=True)
    ev.add_argument("--dt", type=float, default=1e-3)
    ev.add_argument("--safety", type=float, default=0.5)
    ev.add_argument("--stride", type=int, default=1)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_evolve)

    fl = sub.add_parser("floating", help="weighted floating body estimate of Omega_phi")
    fl.add_argument("--body", required=True)
    fl.add_argument("--phi", required=True, metavar="alpha[,scale]")
    fl.add_argument("--t-list", required=True)
    fl.add_argument("--out", default=None)
    fl.set_defaults(func=cmd_floating)

    ver = sub.add_parser("verify", help="run the check suite")
    ver.add_argument("--seed", type=int, required=True)
    ver.add_argument("--trials", type=int, required=True)
    ver.add_argument("--dims", default="2")
    ver.add_argument("--p-set", default=None)
    ver.add_argument("--out", default=None)
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(2, f"centroaffine: error: {exc}\n")
    except CentroAffineError as exc:
        print(f"centroaffine: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
