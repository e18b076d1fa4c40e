"""Command line entry point: verification suites, time evolution and table emission."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import greenfn as gf
from . import noisecurrent as nc
from . import susceptibility as sus
from . import timedomain as td
from .medium import Config, ConfigError, DomainError, discretize, load_config
from .oracle import random_initial
from .spectral import ClassicalData, spectral_rule
from .suites import SUITES, run_suite

log = logging.getLogger("polarizon")

EXIT_FAIL = 1
EXIT_CONFIG = 2


def _f(x) -> str:
    return repr(float(x))


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("POLARIZON_THREADS")
    return int(env) if env else None


def _limits(n: int | None):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def _open_out(path: str | None):
    if path is None or path == "-":
        return nullcontext(sys.stdout)
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return open(p, "w", newline="")


def _config(args) -> Config:
    cfg = load_config(args.config)
    return cfg.quick_version() if args.quick else cfg


# --- verify -----------------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    report = run_suite(cfg, args.suite, quick=args.quick, seed=args.seed)
    with _open_out(args.out) as fh:
        fh.write(report.to_json())
    for c in report.checks:
        log.info("%s %s residual=%.3e tol=%.1e", "PASS" if c.passed else "FAIL", c.id,
                 c.residual, c.tolerance)
    if args.dump_j:
        dump_j(cfg.quick_version() if args.quick else cfg, Path(args.dump_j))
    return 0 if report.passed else EXIT_FAIL


def dump_j(cfg: Config, folder: Path) -> None:
    """One CSV per omega node: coefficient rows of J(z_i, omega) on the interior columns."""
    folder.mkdir(parents=True, exist_ok=True)
    sites = discretize(cfg.profile, cfg.grid)
    z = cfg.grid.z_nodes
    for k, w in enumerate(cfg.grid.omega_nodes):
        J = nc.build_noise_current(sites, [w])
        with open(folder / f"j_omega_{k:04d}.csv", "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["omega", "z", "block", "z_prime", "re", "im"])
            named = [(b, J.blocks[b]) for b in nc.BLOCKS]
            named += [(f"pole{j}", p.amp) for j, p in enumerate(J.poles)]
            for name, M in named:
                for i in range(sites.n):
                    for j in range(sites.n):
                        out.writerow([_f(w), _f(z[i]), name, _f(z[j]),
                                      _f(M[i, j].real), _f(M[i, j].imag)])


# --- evolve -------------------------------------------------------------------------------

def read_initial(path: str, cols_z: np.ndarray, nodes: np.ndarray) -> ClassicalData:
    """CSV rows (field, z, omega, value); omega is ignored for A, Pi, X, P.

    Positions snap to the nearest column and bath frequencies to the nearest
    node; fields that are not listed start at zero.
    """
    C, K = len(cols_z), len(nodes)
    d = {k: np.zeros(C) for k in ("A", "Pi", "X", "P")}
    d.update(Y=np.zeros((C, K)), Q=np.zeros((C, K)))
    with open(path, newline="") as fh:
        for n, row in enumerate(csv.DictReader(fh)):
            name = row["field"].strip()
            if name not in d:
                raise ConfigError(f"{path}: row {n + 1}: unknown field {name!r}")
            i = int(np.argmin(np.abs(cols_z - float(row["z"]))))
            if name in ("Y", "Q"):
                k = int(np.argmin(np.abs(nodes - float(row["omega"]))))
                d[name][i, k] = float(row["value"])
            else:
                d[name][i] = float(row["value"])
    return ClassicalData(**d)


def cmd_evolve(args) -> int:
    cfg = _config(args)
    sites = discretize(cfg.profile, cfg.grid)
    grid = cfg.grid
    pad = args.pad
    cols = sites.padded(pad)
    cols_z = (np.arange(cols.n) - pad + 0.5) * sites.dz
    if args.initial:
        data = read_initial(args.initial, cols_z, grid.omega_nodes)
    else:
        data = random_initial(cols, grid.omega_nodes, np.random.default_rng(args.seed))
    times = np.linspace(0.0, args.t_max, args.nt)
    rule = spectral_rule(sites, grid.omega_nodes, grid.omega_weights, t_max=args.t_max)
    traj = td.trajectory(sites, rule, args.kind, times, data, pad)
    with _open_out(args.out) as fh:
        out = csv.writer(fh)
        out.writerow(["t", "z", "value"])
        for a, t in enumerate(times):
            for i, z in enumerate(grid.z_nodes):
                out.writerow([_f(t), _f(z), _f(traj.values[a, i])])
    return 0


# --- tables -------------------------------------------------------------------------------

def _layer(cfg: Config, idx: int):
    layers = list(cfg.profile.layers) + [cfg.profile.exterior]
    if not -1 <= idx < len(layers):
        raise ConfigError(f"--layer {idx}: have {len(cfg.profile.layers)} layers plus exterior "
                          f"(index {len(cfg.profile.layers)} or -1)")
    return layers[idx]


def cmd_susceptibility(args) -> int:
    cfg = _config(args)
    lay = _layer(cfg, args.layer)
    w = cfg.grid.omega_nodes
    chi = sus.chi_omega(lay, w)
    with _open_out(args.out) as fh:
        out = csv.writer(fh)
        out.writerow(["omega", "re_chi", "im_chi"])
        for a, c in zip(w, chi):
            out.writerow([_f(a), _f(c.real), _f(c.imag)])
    report = run_suite(load_config(args.config), "susceptibility", quick=args.quick, seed=args.seed)
    _write_side_report(args.out, ".report.json", report.to_json().rstrip())
    return 0 if report.passed else EXIT_FAIL


def _write_side_report(out: str | None, suffix: str, text: str) -> None:
    if out is None or out == "-":
        sys.stderr.write(text + "\n")
    else:
        Path(out).with_suffix(suffix).write_text(text + "\n")


def _snap(cfg: Config, omega: float) -> float:
    nodes = cfg.grid.omega_nodes
    w = float(nodes[cfg.grid.nearest_node(omega)])
    if abs(w - omega) > 1e-12 * max(1.0, abs(omega)):
        log.warning("omega=%g is not a grid node; using the nearest node %g", omega, w)
    return w


def _green_csv(fh, G: np.ndarray) -> None:
    out = csv.writer(fh)
    n = G.shape[0]
    out.writerow([f"{p}_{j}" for j in range(n) for p in ("re", "im")])
    for i in range(n):
        out.writerow([_f(x) for j in range(n) for x in (G[i, j].real, G[i, j].imag)])


def cmd_greenfn(args) -> int:
    cfg = _config(args)
    w = _snap(cfg, args.omega)
    sites = discretize(cfg.profile, cfg.grid)
    G = gf.lattice_green(sites, [w]).G[0]
    with _open_out(args.out) as fh:
        _green_csv(fh, G)
    records = []
    for rule in gf.SUM_RULES:
        r = gf.sum_rule(sites, rule, cfg.grid.omega_max)
        records.append({"rule": rule, "target": _cplx(np.diag(r.target)[0]),
                        "value": _cplx(np.diag(r.value)[0]), "residual": r.diagonal_residual(),
                        "omega_max": cfg.grid.omega_max, "Nz": cfg.grid.Nz})
    _write_side_report(args.out, ".sum_rules.json", json.dumps(records, indent=1))
    return 0


def _cplx(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def cmd_emit(args) -> int:
    cfg = _config(args)
    grid = cfg.grid
    with _open_out(args.out) as fh:
        out = csv.writer(fh)
        if args.what == "chi":
            out.writerow(["omega", "layer", "re", "im"])
            names = [f"layer{i}" for i in range(len(cfg.profile.layers))] + ["exterior"]
            for name, lay in zip(names, list(cfg.profile.layers) + [cfg.profile.exterior]):
                for a, c in zip(grid.omega_nodes, sus.chi_omega(lay, grid.omega_nodes)):
                    out.writerow([_f(a), name, _f(c.real), _f(c.imag)])
        elif args.what == "jdiag":
            sites = discretize(cfg.profile, grid)
            rep = nc.jj_commutators(sites, grid.omega_nodes, grid.omega_weights)
            out.writerow(["omega", "z", "kernel", "target", "ratio"])
            for k, w in enumerate(grid.omega_nodes):
                for i, z in enumerate(grid.z_nodes):
                    t = rep.diag_scale[k, i]
                    r = rep.diag_ratio[k, i]
                    out.writerow([_f(w), _f(z), _f(r * t), _f(t), _f(r)])
        else:
            if args.omega is None:
                raise ConfigError("emit green needs --omega")
            w = _snap(cfg, args.omega)
            sites = discretize(cfg.profile, grid)
            _green_csv(fh, gf.lattice_green(sites, [w]).G[0])
    return 0


# --- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON configuration file")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--quick", action="store_true", help="reduced grid, relaxed tolerances")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS threads (falls back to POLARIZON_THREADS)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="polarizon", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    v.add_argument("--dump-j", metavar="DIR", help="write noise-current rows per omega node")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("evolve", parents=[common], help="field history from initial data")
    e.add_argument("--kind", choices=td.KINDS, default="E")
    e.add_argument("--t-max", type=float, default=20.0)
    e.add_argument("--nt", type=int, default=200)
    e.add_argument("--initial", help="CSV with columns field, z, omega, value")
    e.add_argument("--pad", type=int, default=4, help="exterior columns per side carrying data")
    e.set_defaults(func=cmd_evolve)

    s = sub.add_parser("susceptibility", parents=[common], help="chi(omega) of one layer")
    s.add_argument("--layer", type=int, default=0, help="layer index; -1 for the exterior")
    s.set_defaults(func=cmd_susceptibility)

    g = sub.add_parser("greenfn", parents=[common], help="G(z, z', omega) and sum rules")
    g.add_argument("--omega", type=float, required=True)
    g.set_defaults(func=cmd_greenfn)

    m = sub.add_parser("emit", parents=[common], help="numeric tables")
    m.add_argument("--what", choices=("chi", "green", "jdiag"), required=True)
    m.add_argument("--omega", type=float)
    m.set_defaults(func=cmd_emit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        with _limits(_threads(args.threads)):
            return args.func(args)
    except (ConfigError, DomainError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
