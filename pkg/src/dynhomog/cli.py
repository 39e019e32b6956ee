"""Command-line front end.

    dynhomog dispersion|homogenize|fields|verify --config FILE [--jobs N] [--out DIR]

Exit codes: 0 success, 2 bad config, 3 solver failure, 4 branch not found,
5 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__, _kernels
from .config import ConfigError, RunConfig, load_config
from .dispersion import Scan, find_branches
from .errors import DynHomogError, InsufficientRoots, SolverError, ZeroAverage
from .fields import reconstruct, rms_mismatch, subregion_grid
from .homogenizer import solve_eigenfields
from .oracle import exact_dispersion, field_integration_homog, mode_shape
from .spectral import assemble
from .verify import FAULTS, run_verify

log = logging.getLogger("dynhomog")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_BRANCH, EXIT_VERIFY = 0, 2, 3, 4, 5

DISPERSION_COLUMNS = (
    "branch", "qa", "q", "omega", "omega_scaled",
    "omega_exact", "omega_exact_scaled", "rel_error", "residual",
)
EFFECTIVE_COLUMNS = (
    "branch", "qa", "q", "omega", "omega_scaled",
    "D_bar_re", "D_bar_im", "rho_bar_re", "rho_bar_im",
    "S1_re", "S1_im", "S2_re", "S2_im",
    "D_eff_re", "D_eff_im", "rho_eff_re", "rho_eff_im",
    "omega_exact", "omega_exact_scaled",
    "D_eff_exact_re", "D_eff_exact_im", "rho_eff_exact_re", "rho_eff_exact_im",
    "D_eff_rel_error", "rho_eff_rel_error",
)
FIELD_COLUMNS = (
    "x",
    "sigma_re", "sigma_im", "velocity_re", "velocity_im",
    "strain_re", "strain_im", "momentum_re", "momentum_im",
    "sigma_exact_re", "sigma_exact_im", "velocity_exact_re", "velocity_exact_im",
    "sigma_rms_mismatch", "velocity_rms_mismatch",
)


# ---------------------------------------------------------------- output helpers


def _fmt(value, precision: int) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    x = float(value)
    if x == 0.0:
        x = 0.0  # drop the sign of negative zero
    return format(x, f".{precision}g")


def write_table(directory: Path, stem: str, columns, rows, fmt: str, precision: int) -> Path:
    """Write rows as ``stem.csv`` or ``stem.json`` with fixed-precision numbers."""
    directory.mkdir(parents=True, exist_ok=True)
    text_rows = [[_fmt(v, precision) for v in row] for row in rows]
    if fmt == "csv":
        path = directory / f"{stem}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            w.writerows(text_rows)
    else:
        path = directory / f"{stem}.json"
        records = [
            {c: (int(v) if c == "branch" else float(v)) for c, v in zip(columns, row)} for row in text_rows
        ]
        path.write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")
    return path


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_meta(out: Path, command: str, cfg: RunConfig, sha: str, outputs, extra=None) -> None:
    dcell = cfg.discretized()
    basis = cfg.basis(dcell)
    meta = {
        "command": command,
        "config_sha256": sha,
        "tolerances": cfg.tolerances.model_dump(),
        "reference": {"rho0": dcell.ref.density, "D0": dcell.ref.compliance},
        "discretization": list(dcell.counts),
        "n_max": basis.n_max,
        "backend": _kernels.get_backend(),
        "versions": {
            "dynhomog": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": platform.python_version(),
        },
        "outputs": sorted(outputs),
    }
    if extra:
        meta.update(extra)
    _write_json(out / "run_meta.json", meta)


@contextmanager
def _mapper(jobs: int):
    """Order-preserving map: builtin for one job, a process pool otherwise."""
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield lambda fn, items: pool.map(fn, items, chunksize=1)


def _default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------- sweep setup


class _Setup:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.cell = cfg.unit_cell()
        self.dcell = cfg.discretized()
        self.basis = cfg.basis(self.dcell)
        self.a = self.cell.period
        self.c0 = self.dcell.ref.wave_speed
        tol = cfg.tolerances
        self.eps_pole, self.tol_root = tol.eps_pole, tol.tol_root
        self.steps_per_unit = cfg.scan.steps_per_unit
        self.scan = None
        if cfg.scan.omega_max is not None:
            w_max = cfg.scan.omega_max * self.c0 / self.a
            steps = max(1, math.ceil(cfg.scan.steps_per_unit * cfg.scan.omega_max))
            self.scan = Scan(1e-6 * w_max, w_max, steps)

    def scaled(self, omega: float) -> float:
        return omega * self.a / self.c0

    def branch_args(self, q: float, n_branches: int):
        return (self.dcell, self.basis, q, n_branches, self.scan, self.eps_pole, self.tol_root, self.steps_per_unit)


def _sweep_job(args):
    """Micromechanical roots, exact roots and (optionally) exact effective parameters at one q."""
    (dcell, basis, q, n, scan, eps_pole, tol_root, steps), with_oracle_params = args
    points = find_branches(dcell, basis, q, n, scan, eps_pole, tol_root, steps)
    exact = exact_dispersion(dcell.cell, q, n)
    oracle = []
    if with_oracle_params:
        for w in exact:
            try:
                oracle.append(field_integration_homog(mode_shape(dcell.cell, q, w)))
            except ZeroAverage:
                oracle.append((complex(math.nan, math.nan), complex(math.nan, math.nan)))
    return points, exact, oracle


def _sweep(setup: _Setup, map_fn, with_oracle_params: bool):
    n = setup.cfg.scan.n_branches
    jobs = [(setup.branch_args(q, n), with_oracle_params) for q in setup.cfg.q_values()]
    per_q = list(map_fn(_sweep_job, jobs))
    # branch-major, q ascending
    return [(b, per_q[i]) for b in range(n) for i in range(len(per_q))]


def _rel(x, ref) -> float:
    return abs(x - ref) / abs(ref) if abs(ref) > 0 else math.nan


def cmd_dispersion(cfg: RunConfig, out: Path, map_fn) -> list[str]:
    s = _Setup(cfg)
    rows = []
    for b, (points, exact, _) in _sweep(s, map_fn, False):
        p, w_ex = points[b], exact[b]
        rows.append((
            p.branch, p.q * s.a, p.q, p.omega, s.scaled(p.omega),
            w_ex, s.scaled(w_ex), _rel(p.omega, w_ex), p.residual,
        ))
    path = write_table(out, "dispersion", DISPERSION_COLUMNS, rows, cfg.output.format, cfg.output.precision)
    return [path.name]


def cmd_homogenize(cfg: RunConfig, out: Path, map_fn) -> list[str]:
    s = _Setup(cfg)
    rows = []
    for b, (points, exact, oracle) in _sweep(s, map_fn, True):
        p, w_ex = points[b], exact[b]
        D_ex, r_ex = oracle[b]
        P = p.params
        rows.append((
            p.branch, p.q * s.a, p.q, p.omega, s.scaled(p.omega),
            P.D_bar.real, P.D_bar.imag, P.rho_bar.real, P.rho_bar.imag,
            P.S1.real, P.S1.imag, P.S2.real, P.S2.imag,
            p.D_eff.real, p.D_eff.imag, p.rho_eff.real, p.rho_eff.imag,
            w_ex, s.scaled(w_ex),
            D_ex.real, D_ex.imag, r_ex.real, r_ex.imag,
            _rel(p.D_eff, D_ex), _rel(p.rho_eff, r_ex),
        ))
    path = write_table(out, "effective", EFFECTIVE_COLUMNS, rows, cfg.output.format, cfg.output.precision)
    return [path.name]


class BranchNotFound(DynHomogError):
    pass


def cmd_fields(cfg: RunConfig, out: Path, q_frac: float, branch: int) -> tuple[list[str], dict]:
    s = _Setup(cfg)
    q = q_frac * math.pi / s.a
    try:
        points = find_branches(*s.branch_args(q, branch))
        w_ex = exact_dispersion(s.cell, q, branch)[branch - 1]
    except InsufficientRoots as exc:
        raise BranchNotFound(f"branch {branch} not found at q a = {q * s.a:.6g}: {exc}") from exc
    mode = mode_shape(s.cell, q, w_ex)
    sol = solve_eigenfields(assemble(s.dcell, s.basis, w_ex, q, s.eps_pole))
    grid = subregion_grid(s.dcell, cfg.fields.points_per_subregion)
    prof = reconstruct(sol, s.dcell, s.basis, mode.sigma_avg, mode.velocity_avg, grid)
    _, sig_ex, vel_ex, _, _ = mode.evaluate(prof.x)
    e_sig = rms_mismatch(prof.sigma, sig_ex, prof.weights)
    e_vel = rms_mismatch(prof.velocity, vel_ex, prof.weights)
    rows = [
        (
            x, sg.real, sg.imag, v.real, v.imag, e.real, e.imag, m.real, m.imag,
            se.real, se.imag, ve.real, ve.imag, e_sig, e_vel,
        )
        for x, sg, v, e, m, se, ve in zip(
            prof.x, prof.sigma, prof.velocity, prof.strain, prof.momentum, sig_ex, vel_ex
        )
    ]
    stem = f"fields_q{q_frac:.6g}_b{branch}"
    path = write_table(out, stem, FIELD_COLUMNS, rows, cfg.output.format, cfg.output.precision)
    context = {
        "fields": {
            "qa": q * s.a,
            "branch": branch,
            "omega": points[branch - 1].omega,
            "omega_exact": w_ex,
            "sigma_rms_mismatch": e_sig,
            "velocity_rms_mismatch": e_vel,
        }
    }
    return [path.name], context


def cmd_verify(cfg: RunConfig, out: Path, map_fn, inject=None) -> tuple[list[str], dict]:
    s = _Setup(cfg)
    if cfg.scan.omega_max is not None:
        w_max = cfg.scan.omega_max * s.c0 / s.a
    else:
        c_max = max(layer.material.wave_speed for layer in s.cell.layers)
        w_max = (cfg.scan.n_branches + 1) * math.pi * c_max / s.a
    report = run_verify(
        s.dcell,
        s.basis,
        seed=cfg.effective_seed(),
        samples=cfg.verify.samples,
        omega_max=w_max,
        n_branches=cfg.scan.n_branches,
        branch_q_points=cfg.verify.branch_q_points,
        scan=s.scan,
        eps_pole=s.eps_pole,
        tol_root=s.tol_root,
        steps_per_unit=s.steps_per_unit,
        inject=inject,
        map_fn=map_fn,
    )
    _write_json(out / "verify.json", report)
    return ["verify.json"], report


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynhomog", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML or JSON run configuration")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: available CPUs)")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("dispersion", help="micromechanical and exact dispersion branches"))
    common(sub.add_parser("homogenize", help="overall and on-branch effective parameters"))
    pf = common(sub.add_parser("fields", help="reconstructed and exact field profiles"))
    pf.add_argument("--q", type=float, default=None, help="wavenumber as a fraction of pi/a")
    pf.add_argument("--branch", type=int, default=None)
    pv = common(sub.add_parser("verify", help="invariant suite"))
    pv.add_argument("--inject-fault", choices=FAULTS, default=None, help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, sha = load_config(args.config)
    except FileNotFoundError:
        print(f"config error: {args.config}: no such file", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error in {args.config}:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or cfg.output.directory)
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    if jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    extra = None
    try:
        with _mapper(jobs) as map_fn:
            if args.command == "dispersion":
                outputs = cmd_dispersion(cfg, out, map_fn)
            elif args.command == "homogenize":
                outputs = cmd_homogenize(cfg, out, map_fn)
            elif args.command == "fields":
                q_frac = args.q if args.q is not None else cfg.fields.q
                branch = args.branch if args.branch is not None else cfg.fields.branch
                if not (0.0 < q_frac <= 1.0) or branch < 1:
                    print("config error: --q must lie in (0, 1] and --branch must be >= 1", file=sys.stderr)
                    return EXIT_CONFIG
                outputs, extra = cmd_fields(cfg, out, q_frac, branch)
            else:
                outputs, report = cmd_verify(cfg, out, map_fn, args.inject_fault)
                extra = {"seed": report["seed"]}
    except BranchNotFound as exc:
        print(f"branch not found: {exc}", file=sys.stderr)
        return EXIT_BRANCH
    except (SolverError, DynHomogError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    _write_meta(out, args.command, cfg, sha, outputs, extra)
    if args.command == "verify" and not report["passed"]:
        print(f"verify failed: {', '.join(report['failed'])}", file=sys.stderr)
        return EXIT_VERIFY
    for name in outputs:
        print(out / name)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
