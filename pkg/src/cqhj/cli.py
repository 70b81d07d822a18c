"""Command-line driver: one subcommand per data product.

Every subcommand writes whitespace-delimited tables (12 significant digits,
``#`` header lines) into ``--out`` plus a ``run.json`` sidecar holding the
invocation metadata. Outputs are staged and only moved into place when the
subcommand succeeds; on failure nothing is left behind and a single JSON
error line goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend
from . import cave as cv
from . import metrics as mt
from . import nodal as nd
from . import trajectory as tj
from . import wavefield as wf
from .errors import CQHJError, ScenarioError
from .scenario import Scenario, load_scenario, preset

log = logging.getLogger("cqhj")

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_INTERNAL = 3

SPIRAL_LAUNCH = (-9.11016, -1.17309)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


class Output:
    """Collects files in a staging directory; ``commit`` moves them into place."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
        self.files: list[str] = []

    def table(self, name: str, columns, rows, comments=()):
        path = self.stage / name
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            fh.write("# " + " ".join(columns) + "\n")
            for row in rows:
                if len(row) != len(columns):
                    raise ValueError(f"{name}: row has {len(row)} fields, expected {len(columns)}")
                fh.write(" ".join(fmt(v) for v in row) + "\n")
        self.files.append(name)
        return path

    def keyvalue(self, name: str, items):
        path = self.stage / name
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for key, val in items:
                fh.write(f"{key} = {fmt(val)}\n")
        self.files.append(name)
        return path

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.stage / name

    def commit(self, meta: dict):
        with open(self.stage / "run.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name in self.files + ["run.json"]:
            os.replace(self.stage / name, self.out_dir / name)
        self.discard()

    def discard(self):
        shutil.rmtree(self.stage, ignore_errors=True)


# --- subcommands ----------------------------------------------------------

SCHEMAS: dict[str, dict[str, list[str]]] = {
    "fields": {"fields.dat": ["x", "y", "re_psi", "im_psi", "re_p", "im_p", "gamma", "omega",
                              "re_q", "im_q", "pvf_x", "pvf_y", "s_real", "s_imag"]},
    "nodal": {
        "nodal.dat": ["t", "theta_deg", "omega_rate", "spacing"],
        "nodes.dat": ["t", "kind", "n", "re_z", "im_z", "residual"],
        "crossings.dat": ["theta_deg", "t"],
    },
    "trajectories": {
        "manifest.dat": ["id", "x_arrival", "re_launch", "im_launch", "status", "n_samples", "file"],
        "traj_NNNN.dat": ["t", "re_z", "im_z", "re_p", "im_p", "gamma", "omega"],
    },
    "isochrone": {"isochrone.dat": ["x_arrival", "re_launch", "im_launch", "residual", "status"]},
    "metrics": {
        "wrapping.dat": ["x_arrival", "t_first_min", "t_last_min", "t_wrap", "loop_count", "valid", "unbounded"],
        "metrics.txt": ["key = value"],
    },
    "cave": {"cave.vol": ["volume file, see docs/formats.md"]},
    "density": {"density.dat": ["t", "x", "density"]},
    "divvort": {"divvort.dat": ["t", "re_z", "im_z", "gamma", "omega"]},
    "stagnation": {"stagnation.dat": ["t", "re_dp", "im_dp", "gamma", "omega"]},
    "approx": {"approx.dat": ["start", "t", "re_exact", "im_exact", "re_approx", "im_approx", "distance"]},
    "polelocal": {"polelocal.dat": ["label", "s", "re_dz", "im_dz", "gamma_local", "omega_local",
                                    "gamma_exact", "omega_exact"]},
}


def _grid(spec):
    lo, hi, n = spec
    return np.linspace(float(lo), float(hi), int(n))


def cmd_fields(args, sup, scen, out):
    xs, ys = _grid(args.x_range), _grid(args.y_range)
    Z = (xs[None, :] + 1j * ys[:, None]).ravel()
    m, s0, s1, s2 = wf._sums(sup, Z, np.full(Z.shape, args.t))
    eps = wf.node_epsilon(sup, args.t)
    with np.errstate(all="ignore"):
        psi = np.exp(m) * s0
        node, _ = wf._near_node(m, s0, math.log(eps))
        r1 = s1 / s0
        p = -1j * sup.hbar * r1
        dp = -1j * sup.hbar * (s2 / s0 - r1 * r1)
        q = sup.hbar / (2j * sup.mass) * dp
        s_imag = -sup.hbar * (m + np.log(np.abs(s0)))
        s_real = sup.hbar * np.angle(s0)
    for arr in (p, dp, q):
        arr[node] = complex(math.nan, math.nan)
    s_imag[node] = math.nan
    s_real[node] = math.nan
    rows = zip(Z.real, Z.imag, psi.real, psi.imag, p.real, p.imag, 2 * dp.real, 2 * dp.imag,
               q.real, q.imag, p.real, -p.imag, s_real, s_imag)
    out.table("fields.dat", SCHEMAS["fields"]["fields.dat"], rows,
              [f"t = {fmt(args.t)}", "nan marks points within node_epsilon of a node"])


def cmd_nodal(args, sup, scen, out):
    ts = _grid(args.t_range)
    theta = np.degrees(nd.nodal_angle(sup, ts))
    out.table("nodal.dat", SCHEMAS["nodal"]["nodal.dat"],
              zip(ts, theta, nd.nodal_rate(sup, ts), nd.node_spacing(sup, ts)))
    n_lo, n_hi = args.n_range
    rows = []
    for t in _grid(args.node_times):
        for pt_n, pt in nd.characteristic_points(sup, t, range(n_lo, n_hi + 1), skip_failures=True):
            rows.append((t, pt.kind, pt_n, pt.z.real, pt.z.imag, pt.residual))
    out.table("nodes.dat", SCHEMAS["nodal"]["nodes.dat"], rows,
              ["stagnation rows carry n of the node below them"])
    if args.angles:
        th0, thinf = (math.degrees(a) for a in nd.theta_limits(sup))
        out.table("crossings.dat", SCHEMAS["nodal"]["crossings.dat"],
                  [(a, mt.time_at_angle(sup, a)) for a in args.angles],
                  [f"theta0_deg = {fmt(th0)}", f"theta_inf_deg = {fmt(thinf)}"])


def _targets(args):
    lo, hi, step = args.targets
    return tj.isochrone_targets(float(lo), float(hi), float(step))


def _launches(args, sup):
    """Explicit ``--launch`` points or an isochrone shot from ``--targets``."""
    if args.launch:
        return [(math.nan, complex(re, im)) for re, im in args.launch], None
    iso = tj.isochrone(sup, args.kind, _targets(args), args.t_arrival, args.t_launch, args.tol)
    return iso.arrivals, iso


def cmd_trajectories(args, sup, scen, out):
    launches, iso = _launches(args, sup)
    rows = []
    for i, (x, z0) in enumerate(launches):
        traj = tj.integrate(sup, args.kind, z0, args.t_launch, args.t_end, args.tol, strict=False)
        name = f"traj_{i:04d}.dat"
        out.table(name, SCHEMAS["trajectories"]["traj_NNNN.dat"],
                  zip(traj.t, traj.z.real, traj.z.imag, traj.p.real, traj.p.imag, traj.gamma, traj.omega),
                  [f"kind = {args.kind}", f"launch = {fmt(z0.real)} {fmt(z0.imag)}", f"status = {traj.status}"])
        rows.append((i, x, z0.real, z0.imag, traj.status, len(traj), name))
    comments = [f"kind = {args.kind}"]
    if iso is not None:
        comments.append(f"excluded = {iso.excluded}")
        comments.append(f"failed = {iso.failed}")
    out.table("manifest.dat", SCHEMAS["trajectories"]["manifest.dat"], rows, comments)


def cmd_isochrone(args, sup, scen, out):
    iso = tj.isochrone(sup, args.kind, _targets(args), args.t_arrival, args.t_launch, args.tol)
    rows = []
    for e in iso.entries:
        z = e.z_launch if e.z_launch is not None else complex(math.nan, math.nan)
        rows.append((e.x_arrival, z.real, z.imag, math.nan if e.residual is None else e.residual, e.status))
    out.table("isochrone.dat", SCHEMAS["isochrone"]["isochrone.dat"], rows,
              [f"t_arrival = {fmt(args.t_arrival)}", f"t_launch = {fmt(args.t_launch)}", f"kind = {args.kind}"])


def cmd_metrics(args, sup, scen, out):
    t_end = args.t_end
    if t_end is None:
        t_end = mt.ENSEMBLE_SPAN * nd.symmetric_params(sup).t_max_interference
    records, iso, _ = mt.ensemble_wrapping(sup, _targets(args), args.t_arrival, args.t_launch, t_end,
                                           args.tol, args.smoothing)
    xs = [x for x, _ in iso.arrivals]
    rows = [(x, r.t_first_min, r.t_last_min, r.t_wrap, r.loop_count, r.valid, r.unbounded)
            for x, r in zip(xs, records)]
    out.table("wrapping.dat", SCHEMAS["metrics"]["wrapping.dat"], rows,
              [f"window = {fmt(args.t_launch)} {fmt(t_end)}", f"smoothing = {args.smoothing}"])
    summ = mt.summarize(records, iso.excluded, iso.failed)
    items = [("n_targets", len(iso.entries)), ("n_excluded", summ.n_excluded), ("n_failed", summ.n_failed),
             ("n_valid", summ.n_valid), ("n_unbounded", summ.n_unbounded), ("n_invalid", summ.n_invalid),
             ("mean_wrap", summ.mean), ("mean_wrap_unbounded", summ.mean_is_lower_bound),
             ("min_wrap", summ.minimum), ("max_wrap", summ.maximum),
             ("window_first", summ.common_window[0]), ("window_last", summ.common_window[1])]
    try:
        life = mt.interference_lifetime(sup, args.theta_enter, args.theta_exit)
        items += [("lifetime_theta_enter", life.theta_enter), ("lifetime_theta_exit", life.theta_exit),
                  ("lifetime_t_enter", life.t_enter), ("lifetime_t_exit", life.t_exit), ("lifetime", life.lifetime)]
    except mt.NeverEnters as exc:
        items += [("lifetime_error", str(exc))]
    out.keyvalue("metrics.txt", items)


def cmd_cave(args, sup, scen, out):
    spec = cv.GridSpec(cv.Axis(*_axis(args.x_range)), cv.Axis(*_axis(args.y_range)), cv.Axis(*_axis(args.t_range)))
    grid = cv.sample_cave(sup, spec, scen.iso_psi if args.iso_psi is None else args.iso_psi,
                          scen.iso_dpsi if args.iso_dpsi is None else args.iso_dpsi,
                          budget=args.budget, meta=_scenario_meta(scen))
    cv.export_volume(grid, out.path("cave.vol"), args.format)


def _axis(spec):
    lo, hi, n = spec
    return float(lo), float(hi), int(n)


def _scenario_meta(scen: Scenario) -> dict:
    meta = {"scenario": scen.name, "mass": repr(scen.mass), "hbar": repr(scen.hbar)}
    for i, (x0, vp, s0) in enumerate(scen.packets):
        meta[f"packet{i}"] = f"{x0!r} {vp!r} {s0!r}"
    return meta


def cmd_density(args, sup, scen, out):
    xs, ts = _grid(args.x_range), _grid(args.t_range)
    rows = []
    for t in ts:
        rho = wf.probability_density(sup, xs, t)
        rows.extend(zip(np.full(xs.shape, t), xs, rho))
    out.table("density.dat", SCHEMAS["density"]["density.dat"], rows)


def _single_launch(args, scen):
    if args.launch:
        re, im = args.launch[0]
        return complex(re, im)
    if scen.name == "case1":
        return complex(*SPIRAL_LAUNCH)
    raise ScenarioError("--launch RE IM is required for this scenario")


def cmd_divvort(args, sup, scen, out):
    z0 = _single_launch(args, scen)
    traj = tj.integrate(sup, "quantum", z0, args.t_launch, args.t_end, args.tol, strict=False)
    n = int(math.floor((traj.t[-1] - traj.t[0]) / args.dt + 1e-9)) + 1
    ts = traj.t[0] + args.dt * np.arange(n)
    z, _, dp = traj.resample(ts)
    out.table("divvort.dat", SCHEMAS["divvort"]["divvort.dat"],
              zip(ts, z.real, z.imag, 2 * dp.real, 2 * dp.imag),
              [f"launch = {fmt(z0.real)} {fmt(z0.imag)}", f"status = {traj.status}"])


def cmd_stagnation(args, sup, scen, out):
    ts = _grid(args.t_range)
    z = complex(*args.z)
    dp, g, o = wf.qmf_dz(sup, np.full(ts.shape, z), ts)
    out.table("stagnation.dat", SCHEMAS["stagnation"]["stagnation.dat"], zip(ts, dp.real, dp.imag, g, o),
              [f"z = {fmt(z.real)} {fmt(z.imag)}"])


def cmd_approx(args, sup, scen, out):
    zc = complex(*args.z)
    exp = tj.stagnation_expansion(sup, zc, args.t0)
    dts = _grid(args.dt_range)
    rows = []
    for k, (re, im) in enumerate(args.start):
        zs = zc + complex(re, im)
        approx = tj.approx_trajectory(exp, zs, dts)
        fwd = tj.integrate(sup, "quantum", zs, args.t0, args.t0 + dts[-1], args.tol) if dts[-1] > 0 else None
        bwd = tj.integrate(sup, "quantum", zs, args.t0, args.t0 + dts[0], args.tol) if dts[0] < 0 else None
        for dt, za in zip(dts, approx):
            traj = fwd if dt >= 0 and fwd is not None else bwd
            ze = zs if traj is None else traj.at(args.t0 + dt)
            rows.append((k, args.t0 + dt, ze.real, ze.imag, za.real, za.imag, abs(zs - zc)))
    out.table("approx.dat", SCHEMAS["approx"]["approx.dat"], rows,
              [f"z0 = {fmt(zc.real)} {fmt(zc.imag)}", f"t0 = {fmt(args.t0)}",
               f"alpha = {fmt(exp.alpha.real)} {fmt(exp.alpha.imag)}",
               f"beta = {fmt(exp.beta.real)} {fmt(exp.beta.imag)}"])


def cmd_polelocal(args, sup, scen, out):
    node = nd.refine_node(sup, nd.node_position(sup, args.n, args.t), args.t)
    rows = []
    for label, (s, dz) in nd.pole_streamlines(args.samples, args.radius).items():
        _, g_exact, o_exact = wf.qmf_dz(sup, node.z + dz, np.full(dz.shape, args.t))
        for si, d, ge, oe in zip(s, dz, g_exact, o_exact):
            gl, ol = nd.pole_local_div_vort(1, complex(d), sup.hbar)
            rows.append((label, si, d.real, d.imag, gl, ol, ge, oe))
    out.table("polelocal.dat", SCHEMAS["polelocal"]["polelocal.dat"], rows,
              [f"node = {fmt(node.z.real)} {fmt(node.z.imag)}", f"t = {fmt(args.t)}", f"radius = {fmt(args.radius)}"])


COMMANDS = {
    "fields": (cmd_fields, "local field values on an (x, y) grid at one time"),
    "nodal": (cmd_nodal, "nodal-line angle, rate, spacing and node/stagnation tables"),
    "trajectories": (cmd_trajectories, "trajectory dumps for an isochrone ensemble or explicit launches"),
    "isochrone": (cmd_isochrone, "launch points whose trajectories reach given real-axis targets"),
    "metrics": (cmd_metrics, "wrapping times, ensemble average and nodal-line lifetime"),
    "cave": (cmd_cave, "|psi| and |dpsi/dz| volumes for isosurface rendering"),
    "density": (cmd_density, "|psi|^2 on the real axis"),
    "divvort": (cmd_divvort, "divergence and vorticity along one trajectory"),
    "stagnation": (cmd_stagnation, "dp/dz at a fixed point versus time"),
    "approx": (cmd_approx, "exact versus linearised trajectories near a stagnation point"),
    "polelocal": (cmd_polelocal, "pole-local divergence/vorticity on hyperbolic streamlines"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqhj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=["case1", "case2"], help="built-in scenario (default case1)")
    src.add_argument("--scenario", type=Path, help="TOML scenario file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    common.add_argument("--tol", type=float, default=tj.DEFAULT_TOL, help="integrator rtol = atol")
    common.add_argument("--schema", action="store_true", help="print the column schema and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    p = {}
    for name, (_, help_text) in COMMANDS.items():
        p[name] = sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    p["fields"].add_argument("--t", type=float, default=5.0)
    p["fields"].add_argument("--x-range", nargs=3, type=float, default=[-4, 4, 161], metavar=("LO", "HI", "N"))
    p["fields"].add_argument("--y-range", nargs=3, type=float, default=[-3, 3, 121], metavar=("LO", "HI", "N"))

    p["nodal"].add_argument("--t-range", nargs=3, type=float, default=[0, 10, 101], metavar=("LO", "HI", "N"))
    p["nodal"].add_argument("--node-times", nargs=3, type=float, default=[0, 10, 11], metavar=("LO", "HI", "N"))
    p["nodal"].add_argument("--n-range", nargs=2, type=int, default=[-3, 2], metavar=("NLO", "NHI"))
    p["nodal"].add_argument("--angles", nargs="+", type=float, metavar="DEG",
                            help="report the times at which the nodal line reaches these angles")

    for name in ("trajectories", "isochrone", "metrics", "divvort"):
        q = p[name]
        q.add_argument("--t-launch", type=float, default=0.0)
        if name != "divvort":
            q.add_argument("--targets", nargs=3, type=float, default=[-3.9, 3.9, 0.05], metavar=("LO", "HI", "STEP"))
            q.add_argument("--t-arrival", type=float, default=5.0)
    for name in ("trajectories", "isochrone"):
        p[name].add_argument("--kind", choices=tj.KINDS, default="quantum")
    p["trajectories"].add_argument("--t-end", type=float, default=10.0)
    for name in ("trajectories", "divvort"):
        p[name].add_argument("--launch", nargs=2, type=float, action="append", metavar=("RE", "IM"))
    p["divvort"].add_argument("--t-end", type=float, default=10.0)
    p["divvort"].add_argument("--dt", type=float, default=0.01)
    p["metrics"].add_argument("--t-end", type=float, default=None, help="default 4 x (x0/vp)")
    p["metrics"].add_argument("--smoothing", type=int, default=mt.SMOOTHING)
    p["metrics"].add_argument("--theta-enter", type=float, default=-10.0)
    p["metrics"].add_argument("--theta-exit", type=float, default=10.0)

    p["cave"].add_argument("--x-range", nargs=3, type=float, default=[-4, 4, 161], metavar=("LO", "HI", "N"))
    p["cave"].add_argument("--y-range", nargs=3, type=float, default=[-3, 3, 121], metavar=("LO", "HI", "N"))
    p["cave"].add_argument("--t-range", nargs=3, type=float, default=[0, 10, 201], metavar=("LO", "HI", "N"))
    p["cave"].add_argument("--format", choices=cv.FORMATS, default="binary")
    p["cave"].add_argument("--iso-psi", type=float)
    p["cave"].add_argument("--iso-dpsi", type=float)
    p["cave"].add_argument("--budget", type=int, default=cv.DEFAULT_BUDGET)

    p["density"].add_argument("--x-range", nargs=3, type=float, default=[-15, 15, 601], metavar=("LO", "HI", "N"))
    p["density"].add_argument("--t-range", nargs=3, type=float, default=[0, 10, 101], metavar=("LO", "HI", "N"))

    p["stagnation"].add_argument("--t-range", nargs=3, type=float, default=[0, 10, 1001], metavar=("LO", "HI", "N"))
    p["stagnation"].add_argument("--z", nargs=2, type=float, default=[0.0, 0.0], metavar=("RE", "IM"))

    p["approx"].add_argument("--z", nargs=2, type=float, default=[0.0, 0.0], metavar=("RE", "IM"))
    p["approx"].add_argument("--t0", type=float, default=5.0)
    p["approx"].add_argument("--dt-range", nargs=3, type=float, default=[-0.5, 0.5, 101], metavar=("LO", "HI", "N"))
    p["approx"].add_argument("--start", nargs=2, type=float, action="append", metavar=("RE", "IM"),
                             help="offset of a start point from the stagnation point (repeatable)")

    p["polelocal"].add_argument("--n", type=int, default=0)
    p["polelocal"].add_argument("--t", type=float, default=5.0)
    p["polelocal"].add_argument("--radius", type=float, default=0.1)
    p["polelocal"].add_argument("--samples", type=int, default=201)
    return parser


def _error_line(exc: BaseException) -> str:
    return json.dumps({"status": "error", "error": type(exc).__name__, "message": str(exc)}, sort_keys=True)


def _resolve_scenario(args) -> Scenario:
    if args.scenario is not None:
        return load_scenario(args.scenario)
    return preset(args.preset or "case1")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.schema:
        print(json.dumps({args.command: SCHEMAS[args.command]}, indent=2))
        return EXIT_OK
    if args.command == "approx" and not args.start:
        args.start = [(0.05, 0.0), (0.1, 0.0), (0.2, 0.0)]

    out = None
    created = not args.out.exists()
    try:
        scen = _resolve_scenario(args)
        sup = scen.superposition()
        out = Output(args.out)
        started = time.time()
        COMMANDS[args.command][0](args, sup, scen, out)
        meta = {
            "command": args.command,
            "argv": list(sys.argv[1:] if argv is None else argv),
            "scenario": scen.to_dict(),
            "tol": args.tol,
            "version": __version__,
            "backend": _backend.kernels.NAME,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
            "elapsed_s": round(time.time() - started, 3),
            "files": sorted(out.files),
        }
        out.commit(meta)
    except (CQHJError, OSError, ValueError) as exc:
        if out is not None:
            out.discard()
        if created:
            _remove_if_empty(args.out)
        print(_error_line(exc), file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        if out is not None:
            out.discard()
        if created:
            _remove_if_empty(args.out)
        print(_error_line(exc), file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _remove_if_empty(path: Path):
    try:
        path.rmdir()
    except OSError:
        pass

