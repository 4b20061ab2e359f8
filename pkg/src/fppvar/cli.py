"""Command line entry point.

Subcommands: phi, psi, check-neargamma, verify-poincare, averaging,
fpp run | response | sweep.  Reports are JSON, tables are CSV.  Exit codes:
0 success, 1 verification failure (an inequality margin below tolerance or a
failed property check), 2 usage or domain error.

A ``--config FILE`` of flat ``key=value`` lines supplies defaults; explicit
command-line flags always win.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional

import numpy as np

from . import cube_averaging, experiments, fpp, gaussian, phi as phi_mod, poincare
from .edge_distributions import classify, parse_distribution, psi as psi_fn

MAX_SEED = 2 ** 64 - 1


class CliError(Exception):
    """Usage/domain error; maps to exit code 2."""


def _load_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            if not eq:
                raise CliError(f"bad config line: {raw.strip()!r}")
            out[key.strip()] = val.strip()
    return out


def _resolve(ns: argparse.Namespace, config: dict[str, str], key: str, cast, default):
    val = getattr(ns, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in config:
        return cast(config[key])
    return default


def _seed_type(text: str) -> int:
    val = int(text)
    if not (0 <= val <= MAX_SEED):
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _emit(text: str, out_path: Optional[str]) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(dataclasses.asdict(obj), indent=2, default=_jsonable) + "\n"


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fppvar")
    parser.add_argument("--config", help="key=value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", help="evaluate the variance-discount function")
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("psi", help="evaluate the quantile-coupling factor")
    p.add_argument("--dist", required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("check-neargamma", help="nearly-gamma classification report")
    p.add_argument("--dist", required=True)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--out")

    p = sub.add_parser("verify-poincare", help="variance inequality report")
    p.add_argument("--function", required=True,
                   choices=sorted(poincare.REGISTRY))
    p.add_argument("--mode", choices=("quad", "mc"), default="quad")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=_seed_type)
    p.add_argument("--order", type=int)
    p.add_argument("--out")

    p = sub.add_parser("averaging", help="cube averaging function")
    p.add_argument("--m", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--verify", action="store_true")
    group.add_argument("--eval", metavar="BITSTRING")
    p.add_argument("--out")

    fp = sub.add_parser("fpp", help="first passage percolation")
    fsub = fp.add_subparsers(dest="fpp_command", required=True)

    p = fsub.add_parser("run", help="one passage time with geodesic")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dist")
    p.add_argument("--seed", type=_seed_type)
    p.add_argument("--out")

    p = fsub.add_parser("response", help="single-edge response curve (CSV)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dist")
    p.add_argument("--seed", type=_seed_type)
    p.add_argument("--edge", type=int, required=True)
    p.add_argument("--y-max", type=float)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--out")

    p = fsub.add_parser("sweep", help="variance scaling sweep (CSV)")
    p.add_argument("--dist")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--ns")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=_seed_type)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")

    return parser


def _cmd_phi(ns, config) -> int:
    value = phi_mod.phi(ns.u)
    _emit(repr(value) + "\n", ns.out)
    return 0


def _cmd_psi(ns, config) -> int:
    dist = parse_distribution(ns.dist)
    _emit(repr(psi_fn(dist, ns.y)) + "\n", ns.out)
    return 0


def _cmd_check_neargamma(ns, config) -> int:
    dist = parse_distribution(ns.dist)
    grid = _resolve(ns, config, "grid-size", int, 50_000)
    report = classify(dist, quantile_grid_size=grid)
    _emit(_json(report), ns.out)
    return 0 if report.verdict != "fail" else 1


def _cmd_verify_poincare(ns, config) -> int:
    tf = poincare.REGISTRY[ns.function]
    if ns.mode == "quad":
        order = _resolve(ns, config, "order", int, 64 if tf.n_cont <= 2 else 24)
        report = poincare.verify_modified_poincare(tf, rule=gaussian.hermite_rule(order))
    else:
        samples = _resolve(ns, config, "samples", int, 100_000)
        seed = _resolve(ns, config, "seed", int, 0)
        report = poincare.verify_modified_poincare(tf, mc={"samples": samples, "seed": seed})
    _emit(_json(report), ns.out)
    return 0 if report.passed else 1


def _cmd_averaging(ns, config) -> int:
    if ns.verify:
        report = cube_averaging.verify_averaging_properties(ns.m)
        _emit(_json(report), ns.out)
        return 0 if (report.gradient_ok and report.level_bound_ok) else 1
    bits = [int(c) for c in ns.eval.strip()]
    _emit(f"{cube_averaging.g_m(bits, ns.m)}\n", ns.out)
    return 0


def _default_field(ns, config):
    d = ns.d
    n = ns.n
    if n < 1:
        raise CliError("--n must be positive")
    spec = _resolve(ns, config, "dist", str, "exp:rate=1")
    seed = _resolve(ns, config, "seed", int, 0)
    grid = experiments.box_for_target(d, n)
    field = fpp.field_from_distribution(grid, spec, seed)
    return field, (n,) + (0,) * (d - 1)


def _cmd_fpp_run(ns, config) -> int:
    field, target = _default_field(ns, config)
    origin = (0,) * field.grid.d
    res = fpp.passage_time(field, origin, target)
    payload = {
        "distance": res.distance,
        "geodesic_edges": sorted(res.geodesic_edges),
        "source": list(res.source),
        "target": list(res.target),
    }
    _emit(json.dumps(payload, indent=2) + "\n", ns.out)
    return 0


def _cmd_fpp_response(ns, config) -> int:
    field, target = _default_field(ns, config)
    y_max = _resolve(ns, config, "y-max", float, 30.0)
    points = _resolve(ns, config, "grid-points", int, 61)
    grid = np.linspace(0.0, y_max, points)
    curve = fpp.single_edge_response(field, target, ns.edge, grid)
    lines = ["y,distance"]
    for y, d in zip(curve.ys, curve.distances):
        lines.append(f"{y!r},{d!r}")
    _emit("\n".join(lines) + "\n", ns.out)
    return 0


def _cmd_fpp_sweep(ns, config) -> int:
    spec = _resolve(ns, config, "dist", str, "exp:rate=1")
    samples = _resolve(ns, config, "samples", int, 2000)
    seed = _resolve(ns, config, "seed", int, 0)
    workers = _resolve(ns, config, "workers", int, 1)
    ns_text = _resolve(ns, config, "ns", str, "8,16,32,64")
    try:
        n_list = [int(tok) for tok in ns_text.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(f"bad --ns list: {ns_text!r}") from exc
    dist = parse_distribution(spec)
    result = experiments.sweep(dist, ns.d, n_list, samples, seed, workers=workers)
    _emit(result.to_csv(), ns.out)
    return 0


_HANDLERS = {
    "phi": _cmd_phi,
    "psi": _cmd_psi,
    "check-neargamma": _cmd_check_neargamma,
    "verify-poincare": _cmd_verify_poincare,
    "averaging": _cmd_averaging,
}


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _load_config(ns.config) if ns.config else {}
        if ns.command == "fpp":
            handler = {
                "run": _cmd_fpp_run,
                "response": _cmd_fpp_response,
                "sweep": _cmd_fpp_sweep,
            }[ns.fpp_command]
        else:
            handler = _HANDLERS[ns.command]
        return handler(ns, config)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
