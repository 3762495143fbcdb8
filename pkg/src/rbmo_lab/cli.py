"""
rbmo-lab: batch front end.

    rbmo-lab gen-measure --measure cantor:8 --write cantor8.json
    rbmo-lab k-coeff --measure lebesgue:1000 --q 0.5005:0.015625 --r 0.5005:0.25
    rbmo-lab t1-check --kernel cauchy1d --measure lebesgue:512 --out cert.json --csv-dir plots/

Every subcommand writes one JSON report (stdout unless --out) embedding the
resolved configuration, the measure hash and the toolkit version.  Exit
codes: 0 success, 2 validation failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import k_coefficient, k_log_bound, k_of_cube
from .errors import RBMOLabError, SolverFailure, ValidationError
from .geometry import (Cube, build_family, check_doubling_params, default_beta,
                       doubling_subfamily)
from .measures import (AtomicMeasure, gen_cantor, gen_lebesgue_grid, growth_check,
                       read_measure, write_measure)
from .operators import (TruncationGrid, cancellation_check, dyadic_annuli, get_kernel,
                        hoelder_check, size_check, truncated_matrix)
from .rbmo import l1_norm, seminorm_A, seminorm_E
from .t1 import boundedness_probe, certify_operator, standard_basket
from .testfn import build_test_family, fit_test_family, phi_vs_K_probe

log = logging.getLogger("rbmo_lab")

# nested-pair LPs grow quadratically in the family, so default families stay small
AUTO_ANCHORS = 32

SUBCOMMANDS = ("gen-measure", "growth-check", "k-coeff", "doubling-scan", "rbmo-norm",
               "kernel-check", "apply-czo", "test-family", "t1-check", "boundedness-probe")


# ---------------------------------------------------------------- inputs

def parse_measure(descriptor: str, n: float | None = None) -> AtomicMeasure:
    """lebesgue:N | lebesgue2d:N | cantor:DEPTH[:RATIO] | file:PATH | PATH.json"""
    kind, _, rest = descriptor.partition(":")
    if descriptor.endswith(".json") and kind not in ("file",):
        mu = read_measure(descriptor)
    elif kind == "file":
        mu = read_measure(rest)
    elif kind == "lebesgue":
        mu = gen_lebesgue_grid((0.0, 1.0), int(rest))
    elif kind == "lebesgue2d":
        mu = gen_lebesgue_grid([(0.0, 1.0), (0.0, 1.0)], int(rest))
    elif kind == "cantor":
        depth, _, ratio = rest.partition(":")
        mu = gen_cantor(int(depth), float(ratio) if ratio else 1 / 3)
    else:
        raise ValidationError(f"cannot parse measure descriptor {descriptor!r}")
    if n is not None:
        mu = AtomicMeasure(mu.points, mu.weights, n, mu.scale, mu.label)
    return mu


def parse_cube(text: str) -> Cube:
    """CENTER:SIDE with the center as comma-separated coordinates."""
    try:
        center, side = text.rsplit(":", 1)
        return Cube.from_side(tuple(float(c) for c in center.split(",")), float(side))
    except ValueError as exc:
        raise ValidationError(f"bad cube {text!r}; expected CENTER:SIDE") from exc


def parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def make_function(mu: AtomicMeasure, descriptor: str, seed: int) -> np.ndarray:
    """indicator-left | coord | random | const:C | phi:INDEX | file:PATH"""
    kind, _, arg = descriptor.partition(":")
    x = mu.points[:, 0]
    if kind == "indicator-left":
        lo, hi = x.min(), x.max()
        return (x <= 0.5 * (lo + hi)).astype(float)
    if kind == "coord":
        return x.copy()
    if kind == "random":
        return np.random.default_rng(seed).standard_normal(mu.n_atoms)
    if kind == "const":
        return np.full(mu.n_atoms, float(arg or 1.0))
    if kind == "phi":
        from .testfn import phi_at_atoms
        return phi_at_atoms(mu, mu.points[int(arg or 0)])
    if kind == "file":
        return np.asarray(json.loads(Path(arg).read_text()), dtype=float)
    raise ValidationError(f"unknown function descriptor {descriptor!r}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys override the defaults")
    common.add_argument("--measure", default="lebesgue:256")
    common.add_argument("--n", type=float, default=None, help="override the growth dimension")
    common.add_argument("--ladder-base", type=float, default=2.0 ** -6)
    common.add_argument("--levels", type=int, default=7)
    common.add_argument("--anchor-stride", type=int, default=None,
                        help=f"anchor every k-th atom; default keeps about {AUTO_ANCHORS} anchors, 1 uses all")
    common.add_argument("--anchor-policy", default="atoms", choices=["atoms", "atoms+midpoints"])
    common.add_argument("--alpha", type=float, default=10.0)
    common.add_argument("--beta", type=float, default=None, help="default 2 * alpha^n")
    common.add_argument("--kernel", default="cauchy1d")
    common.add_argument("--kernel-scale", type=float, default=1.0)
    common.add_argument("--component", type=int, default=0)
    common.add_argument("--eps", default=None, help="comma-separated truncation levels")
    common.add_argument("--n-eps", type=int, default=4)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--csv-dir", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rbmo-lab", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-measure", parents=[common])
    s.add_argument("--write", default=None, help="also write the measure JSON here")

    s = sub.add_parser("growth-check", parents=[common])
    s.add_argument("--cap", type=float, default=1e6)

    s = sub.add_parser("k-coeff", parents=[common])
    s.add_argument("--q", required=True, help="CENTER:SIDE")
    s.add_argument("--r", default=None, help="CENTER:SIDE; omit to compute K(Q)")

    sub.add_parser("doubling-scan", parents=[common])

    s = sub.add_parser("rbmo-norm", parents=[common])
    s.add_argument("--function", default="indicator-left")
    s.add_argument("--flavor", choices=["E", "A"], default="E")
    s.add_argument("--rho", type=float, default=2.0)

    s = sub.add_parser("kernel-check", parents=[common])
    s.add_argument("--n-samples", type=int, default=10_000)
    s.add_argument("--probe-point", default=None)
    s.add_argument("--cancellation-cap", type=float, default=10.0)

    s = sub.add_parser("apply-czo", parents=[common])
    s.add_argument("--function", default="const:1")

    s = sub.add_parser("test-family", parents=[common])
    s.add_argument("--base-points", default=None, help="comma-separated atom indices")
    s.add_argument("--radii", default=None, help="comma-separated radii for the phi/K table")

    s = sub.add_parser("t1-check", parents=[common])
    s.add_argument("--cancellation-policy", choices=["warn", "refuse"], default="warn")
    s.add_argument("--cancellation-cap", type=float, default=10.0)

    s = sub.add_parser("boundedness-probe", parents=[common])
    s.add_argument("--n-random", type=int, default=2)
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        sp = parser._subparsers._group_actions[0].choices[args.command]
        sp.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()})
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------- helpers

def _clean(obj):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _family(args, mu):
    stride = args.anchor_stride
    auto = stride is None
    if auto:
        stride = -(-mu.n_atoms // AUTO_ANCHORS)
    anchors = None if stride <= 1 else np.arange(0, mu.n_atoms, stride)
    if auto and anchors is not None:
        # the atom nearest the middle lets the top cube cover the support
        lo, hi = mu.points.min(axis=0), mu.points.max(axis=0)
        middle = int(np.argmin(mu.distances_from((lo + hi) / 2)))
        anchors = np.union1d(anchors, [middle])
    return build_family(mu, args.ladder_base, args.levels, args.anchor_policy, anchors)


def _beta(args, mu) -> float:
    beta = args.beta if args.beta is not None else default_beta(args.alpha, mu.growth_dim)
    check_doubling_params(args.alpha, beta, mu.growth_dim)
    return beta


def _doubling(args, mu):
    return doubling_subfamily(mu, _family(args, mu), args.alpha, _beta(args, mu))


def _kernel(args, mu):
    K = get_kernel(args.kernel, mu.growth_dim, component=args.component)
    return K.scaled(args.kernel_scale) if args.kernel_scale != 1 else K


def _grid(args, mu) -> TruncationGrid:
    if args.eps:
        return TruncationGrid(tuple(sorted(parse_floats(args.eps))))
    return TruncationGrid.default(mu, args.n_eps)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "csv_dir", "verbose")}


# ---------------------------------------------------------------- commands

def cmd_gen_measure(args, mu):
    if args.write:
        write_measure(mu, args.write)
    return {"measure_json": mu.to_json()}


def cmd_growth_check(args, mu):
    return growth_check(mu, _family(args, mu), args.cap).to_json()


def cmd_k_coeff(args, mu):
    Q = parse_cube(args.q)
    if args.r is None:
        res = k_of_cube(mu, Q)
        return {"K_of_Q": res.to_json(), "Q": Q.to_json()}
    R = parse_cube(args.r)
    res = k_coefficient(mu, Q, R)
    out = res.to_json()
    if R.side > Q.side:
        out["log_bound"] = k_log_bound(mu, Q, R)
    out.update(Q=Q.to_json(), R=R.to_json())
    return out


def cmd_doubling_scan(args, mu):
    fam = _family(args, mu)
    beta = _beta(args, mu)
    D = doubling_subfamily(mu, fam, args.alpha, beta)
    dset = set(D)
    return {"alpha": args.alpha, "beta": beta, "family_size": len(fam), "doubling_count": len(D),
            "cubes": [{"cube": Q.to_json(), "doubling": Q in dset} for Q in fam]}


def cmd_rbmo_norm(args, mu):
    f = make_function(mu, args.function, args.seed)
    if args.flavor == "E":
        w = seminorm_E(mu, f, _doubling(args, mu))
        out = w.to_json()
        out["norm_star"] = w.seminorm + l1_norm(mu, f)
    else:
        w = seminorm_A(mu, f, _family(args, mu), args.rho)
        out = w.to_json()
    out["l1"] = l1_norm(mu, f)
    return out


def cmd_kernel_check(args, mu):
    K = _kernel(args, mu)
    x = (np.array(parse_floats(args.probe_point)) if args.probe_point
         else mu.points[mu.n_atoms // 2])
    canc = cancellation_check(K, mu, x, dyadic_annuli(mu, x), args.cancellation_cap)
    return {"kernel": K.name, "size_ratio": size_check(K, mu),
            "hoelder_ratio": hoelder_check(K, mu, n_samples=args.n_samples, seed=args.seed),
            "cancellation": canc.to_json(), "probe_point": x}


def cmd_apply_czo(args, mu):
    K = _kernel(args, mu)
    f = make_function(mu, args.function, args.seed)
    rows = [{"epsilon": eps, "values": truncated_matrix(mu, K, eps) @ f} for eps in _grid(args, mu)]
    return {"kernel": K.name, "points": mu.points, "applications": rows}


def cmd_test_family(args, mu):
    D = _doubling(args, mu)
    if args.base_points:
        idx = [int(v) for v in args.base_points.split(",")]
    else:
        idx = sorted({int(i) for i in np.linspace(0, mu.n_atoms - 1, 3)})
    fam = build_test_family(mu, idx, D)
    radii = parse_floats(args.radii) if args.radii else [2.0 ** -k for k in range(1, 7)]
    probe = phi_vs_K_probe(mu, mu.points[idx[0]], radii)
    out = {"test_family": [tf.to_json() for tf in fam], "phi_vs_K": probe.rows(),
           "phi_vs_K_base": mu.points[idx[0]]}
    try:
        out["fit"] = fit_test_family(fam).to_json()
    except ValidationError as exc:
        out["fit"] = {"error": str(exc)}
    return out


def cmd_t1_check(args, mu):
    cert = certify_operator(mu, _kernel(args, mu), _grid(args, mu), _doubling(args, mu),
                            args.cancellation_policy, args.cancellation_cap)
    return {"kernel": args.kernel, "certificate": cert.to_json()}


def cmd_boundedness_probe(args, mu):
    D = _doubling(args, mu)
    basket = standard_basket(mu, D, args.seed, args.n_random)
    rep = boundedness_probe(mu, _kernel(args, mu), basket, D, _grid(args, mu))
    return {"kernel": args.kernel, "probe": rep.to_json()}


COMMANDS = {
    "gen-measure": cmd_gen_measure,
    "growth-check": cmd_growth_check,
    "k-coeff": cmd_k_coeff,
    "doubling-scan": cmd_doubling_scan,
    "rbmo-norm": cmd_rbmo_norm,
    "kernel-check": cmd_kernel_check,
    "apply-czo": cmd_apply_czo,
    "test-family": cmd_test_family,
    "t1-check": cmd_t1_check,
    "boundedness-probe": cmd_boundedness_probe,
}


# ---------------------------------------------------------------- outputs

CSV_TABLES = {
    "phi_vs_K.csv": ("phi_vs_K", ["radius", "phi", "K"]),
    "certificate.csv": ("certificate", ["K", "osc_times_K"]),
    "eps_sweep.csv": ("certificate", ["epsilon", "best_C"]),
}


def _csv_rows(report: dict, name: str) -> list[list]:
    result = report.get("result", {})
    if name == "phi_vs_K.csv":
        return [[r["radius"], r["phi"], r["K"]] for r in result.get("phi_vs_K", [])]
    cert = result.get("certificate", {})
    certs = cert.get("certificates", [])
    if name == "eps_sweep.csv":
        return [[c["epsilon"], c["best_C"]] for c in certs]
    if not certs:
        return []
    worst = max(certs, key=lambda c: c["best_C"])
    return [[c["K"], c["osc_residual"]] for c in worst["cubes"]]


def emit_plot_data(report: dict, directory) -> list[Path]:
    """Write the CSV tables whose source section is present in ``report``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    result = report.get("result", {})
    for name, (section, header) in CSV_TABLES.items():
        if section not in result:
            continue
        path = directory / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in _csv_rows(report, name):
                w.writerow([repr(float(v)) for v in row])
        written.append(path)
    return written


def run(args: argparse.Namespace) -> int:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        mu = parse_measure(args.measure, args.n)
        _beta(args, mu)
        result = COMMANDS[args.command](args, mu)
    except SolverFailure as exc:
        print(f"rbmo-lab: solver failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, ValueError, OSError) as exc:
        print(f"rbmo-lab: invalid input: {exc}", file=sys.stderr)
        return 2
    except RBMOLabError as exc:
        print(f"rbmo-lab: {exc}", file=sys.stderr)
        return 2
    report = _clean({
        "tool": "rbmo-lab",
        "version": __version__,
        "subcommand": args.command,
        "config": _config(args),
        "measure": {"label": mu.label, "hash": mu.digest(), "m": mu.ambient_dim,
                    "n": mu.growth_dim, "resolution": mu.resolution()},
        "result": result,
    })
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv_dir:
        emit_plot_data(report, args.csv_dir)
    return 0


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
