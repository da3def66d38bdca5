"""Command line front end: configuration, execution, artifact emission.

Subcommands
-----------
simulate   draw a path ensemble and write it as CSV
norms      Holder / fractional Sobolev / G-psi norms of a stored ensemble
measure    ball-measure exponent fit and chaining-distance classification
audit      one inequality audit (geometry, grr, rosenthal, tightness,
           rectangle, kramer)
clt        the full norm-law comparison along an n-schedule

Every run emits ``<subcommand>.csv``, ``<subcommand>.json``, and
``manifest.json`` into the output directory.  The manifest records the
config digest, resolved seed, worker count, and package versions; no
wall-clock state is written anywhere, so reruns are byte-identical.

Exit codes: 0 success, 1 audit violations, 2 input or config errors,
3 numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace
from typing import Optional

import numpy as np

try:
    import tomllib
except ImportError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from . import clt as clt_mod
from .clt import (AuditRow, CltExperiment, clt_verdict, holder_target_distance,
                  kramer_clt_audit, rectangle_clt_audit, tightness_audit,
                  write_report_csv, write_report_json)
from .errors import (DegenerateError, Delta2DivergentError, DomainError,
                     EmptySupportError, GammaNotPsiError, HolderCltError,
                     InputError, InsufficientReplicasError,
                     KramerViolationError, MgfOverflowError, NoCommonSupportError,
                     NonFiniteError, NonIntegrableError, NotInvertibleError,
                     NotPsdError, PreconditionError, SupportBelowThetaError,
                     UnboundedConjugateError)
from .fields import (FieldModel, _grid_points, model_from_spec,
                     rosenthal_audit, simulate)
from .geometry import (MetricMeasureSpace, arnold_imkeller_audit,
                       classify_measure, fit_ball_exponent, v_functional)
from .grand_lebesgue import MomentFunction, PsiFunction, gpsi_norm
from .holder import (GridField, ModulusSpec, fractional_sobolev_norm,
                     grr_audit_paths, holder_norm)
from .orlicz import YoungFunction

log = logging.getLogger("holderclt")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

CONFIG_SCHEMA = 1

_INPUT_ERRORS = (InputError, DomainError, SupportBelowThetaError,
                 PreconditionError, InsufficientReplicasError,
                 EmptySupportError, NoCommonSupportError)
_NUMERICAL_ERRORS = (NotPsdError, Delta2DivergentError, KramerViolationError,
                     MgfOverflowError, NonIntegrableError, DegenerateError,
                     NonFiniteError, UnboundedConjugateError,
                     NotInvertibleError, GammaNotPsiError)

_AUDIT_KINDS = ("geometry", "grr", "rosenthal", "tightness", "rectangle",
                "kramer")


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: subcommand, config, seed, output, parallelism."""

    subcommand: str
    config_path: Path
    seed: int
    out_dir: Path
    workers: int
    verbosity: int
    audit_kind: Optional[str] = None
    overrides: Optional[dict] = None


def _load_config(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as err:
        raise InputError(f"malformed config {path}: {err}")
    if cfg.get("schema") != CONFIG_SCHEMA:
        raise InputError(
            f"config schema must be {CONFIG_SCHEMA}, got {cfg.get('schema')!r}")
    return cfg


def _resolve_seed(cfg: dict, flag_seed: Optional[int]) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    if "seed" not in cfg:
        raise InputError("no seed: provide --seed or a top-level seed key")
    return int(cfg["seed"])


def _grid_from(cfg_section: dict):
    grid = cfg_section.get("grid")
    if grid is None:
        raise InputError("config needs a grid (int or list of ints)")
    if isinstance(grid, list):
        return tuple(int(g) for g in grid)
    return int(grid)


def _model_from(cfg: dict) -> FieldModel:
    spec = cfg.get("model")
    if spec is None:
        raise InputError("config needs a [model] table")
    return model_from_spec(spec)


def _psi_from(section: dict) -> PsiFunction:
    return PsiFunction.power(
        float(section.get("exponent", 0.5)),
        a=float(section.get("a", 1.0)),
        b=float(section.get("b", np.inf)),
        scale=float(section.get("scale", 1.0)))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([_fmt(v) for v in row])


def _write_json(path: Path, tree: dict) -> None:
    path.write_text(json.dumps(tree, sort_keys=True, indent=2,
                               default=clt_mod._py) + "\n")


def _versions() -> dict:
    import scipy

    from . import __version__
    return {
        "holderclt": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
    }


def _write_manifest(rc: RunConfig) -> None:
    digest = hashlib.sha256(rc.config_path.read_bytes()).hexdigest()
    tree = {
        "schema": CONFIG_SCHEMA,
        "subcommand": rc.subcommand,
        "audit_kind": rc.audit_kind,
        "config": rc.config_path.name,
        "config_sha256": digest,
        "seed": rc.seed,
        "workers": rc.workers,
        "overrides": rc.overrides or {},
        "versions": _versions(),
    }
    _write_json(rc.out_dir / "manifest.json", tree)


def _audit_report(rows, extra: dict):
    tree = dict(extra)
    tree["rows"] = [
        {"n": r.n, "statistic": r.statistic, "value": clt_mod._py(r.value),
         "se": clt_mod._py(r.se), "bound": clt_mod._py(r.bound),
         "violated": r.violated, "regime": r.regime}
        for r in rows]
    return SimpleNamespace(rows=tuple(rows), tree=lambda: tree)


# ------------------------------------------------------------ handlers

def _cmd_simulate(cfg: dict, rc: RunConfig) -> int:
    sec = cfg.get("experiment", {})
    model = _model_from(cfg)
    grid = _grid_from(sec)
    replicas = int(sec.get("replicas", 100))
    stream = int(cfg.get("simulate", {}).get("stream", 0))
    ens = simulate(model, grid, replicas, rc.seed, stream=stream)
    vals = ens.flat
    columns = ["replica"] + [f"v{k}" for k in range(vals.shape[1])]
    rows = [[r] + list(vals[r]) for r in range(vals.shape[0])]
    _write_csv(rc.out_dir / "simulate.csv", columns, rows)
    _write_json(rc.out_dir / "simulate.json", {
        "schema": CONFIG_SCHEMA,
        "kind": "ensemble",
        "model": model.name,
        "grid_shape": list(ens.grid_shape),
        "replicas": replicas,
        "seed": rc.seed,
        "stream": stream,
        "value_stats": {
            "mean": float(vals.mean()),
            "std": float(vals.std()),
            "min": float(vals.min()),
            "max": float(vals.max()),
        },
    })
    return 0


def _read_field_file(path: Path) -> np.ndarray:
    if not path.exists():
        raise InputError(f"field file not found: {path}")
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("replica,"):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        data = np.atleast_2d(data)[:, 1:]
    else:
        data = np.atleast_2d(np.loadtxt(path, delimiter=","))
    if not np.all(np.isfinite(data)):
        raise InputError(f"field file contains non-finite values: {path}")
    return data


def _cmd_norms(cfg: dict, rc: RunConfig) -> int:
    sec = cfg.get("norms")
    if sec is None:
        raise InputError("config needs a [norms] table")
    field_path = Path(sec.get("field_file", ""))
    values = _read_field_file(field_path)
    grid = _grid_from(sec)
    shape = (grid,) if isinstance(grid, int) else tuple(grid)
    if int(np.prod(shape)) != values.shape[1]:
        raise InputError(
            f"grid {shape} does not match {values.shape[1]} columns")

    h_exp = float(sec.get("holder_exponent", 0.5))
    s_alpha = float(sec.get("sobolev_alpha", 0.4))
    s_p = float(sec.get("sobolev_p", 8.0))
    pts = _grid_points(shape)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :],
                          axis=-1) ** h_exp
    rows = []
    sups = []
    for r in range(values.shape[0]):
        field = GridField(values=values[r].reshape(shape))
        rows.append([r, f"holder_norm[{h_exp:g}]",
                     holder_norm(field, dist).norm])
        rows.append([r, f"sobolev_norm[alpha={s_alpha:g};p={s_p:g}]",
                     fractional_sobolev_norm(field, s_alpha, s_p)])
        sups.append(float(np.abs(values[r]).max()))
    tree_extra = {}
    if "psi" in sec:
        psi = _psi_from(sec["psi"])
        mf = MomentFunction.from_samples(np.array(sups))
        gval = gpsi_norm(mf, psi)
        rows.append(["all", "gpsi_norm[sup_abs]", gval])
        tree_extra["gpsi_norm"] = clt_mod._py(gval)
    _write_csv(rc.out_dir / "norms.csv", ["replica", "statistic", "value"],
               rows)
    _write_json(rc.out_dir / "norms.json", {
        "schema": CONFIG_SCHEMA,
        "kind": "norms",
        "replicas": values.shape[0],
        "grid_shape": list(shape),
        "rows": [{"replica": a, "statistic": b, "value": clt_mod._py(c)}
                 for a, b, c in rows],
        **tree_extra,
    })
    return 0


def _cmd_measure(cfg: dict, rc: RunConfig) -> int:
    sec = cfg.get("measure", {})
    n = int(sec.get("n", 256))
    dim = int(sec.get("dim", 1))
    space = MetricMeasureSpace.uniform_grid(n, dim=dim)
    fit = fit_ball_exponent(space)
    phi = YoungFunction.power(float(sec.get("phi_power", 4.0)))
    v = float(sec.get("v", 1.0))
    cls = classify_measure(space, phi, None, v)
    rows = [
        ["ball_exponent", fit.theta],
        ["ball_c_theta", fit.c_theta],
        ["dimension", float(dim)],
        ["weakly_majorizing", float(cls.weakly_majorizing)],
        ["minorizing", float(cls.minorizing)],
        ["majorizing", float(cls.majorizing)],
    ]
    _write_csv(rc.out_dir / "measure.csv", ["statistic", "value"], rows)
    _write_json(rc.out_dir / "measure.json", {
        "schema": CONFIG_SCHEMA,
        "kind": "measure",
        "n": n,
        "dim": dim,
        "ball_exponent": fit.theta,
        "ball_c_theta": fit.c_theta,
        "classification": {
            "weakly_majorizing": cls.weakly_majorizing,
            "minorizing": cls.minorizing,
            "majorizing": cls.majorizing,
        },
    })
    return 0


def _audit_geometry(cfg: dict, rc: RunConfig, sec: dict):
    model = _model_from(cfg)
    grid = _grid_from(cfg.get("experiment", {}))
    replicas = int(sec.get("paths", cfg.get("experiment", {}).get("replicas", 100)))
    phi = YoungFunction.power(float(sec.get("phi_power", 4.0)))
    ens = simulate(model, grid, replicas, rc.seed)
    if isinstance(grid, tuple):
        raise InputError("the geometry audit runs on one-dimensional grids")
    space = MetricMeasureSpace.uniform_grid(grid, dim=1)
    rep = arnold_imkeller_audit(ens.flat, space, phi)
    row = AuditRow(n=1, statistic="w_lipschitz_worst_ratio",
                   value=rep.worst_ratio, se=float("nan"), bound=1.0,
                   violated=rep.violations > 0, regime="path-audit")
    extra = {"kind": "geometry", "violations": rep.violations,
             "pairs_checked": rep.pairs_checked, "v_value": rep.v_value}
    return _audit_report([row], extra), rep.violations


def _audit_grr(cfg: dict, rc: RunConfig, sec: dict):
    model = _model_from(cfg)
    grid = _grid_from(cfg.get("experiment", {}))
    replicas = int(sec.get("paths", cfg.get("experiment", {}).get("replicas", 100)))
    alpha = float(sec.get("alpha", 0.4))
    p = float(sec.get("p", 8.0))
    ens = simulate(model, grid, replicas, rc.seed)
    rep = grr_audit_paths(ens.flat, alpha, p)
    row = AuditRow(n=1, statistic=f"grr_ratio[alpha={alpha:g};p={p:g}]",
                   value=rep.worst_ratio, se=float("nan"), bound=1.0,
                   violated=rep.violations > 0, regime="path-audit")
    extra = {"kind": "grr", "violations": rep.violations,
             "pairs_checked": rep.pairs_checked,
             "coefficient": rep.coefficient,
             "sobolev_norm": rep.sobolev_norm}
    return _audit_report([row], extra), rep.violations


def _audit_rosenthal(cfg: dict, rc: RunConfig, sec: dict):
    n_values = [int(v) for v in sec.get("n_values", [16, 256])]
    p_sec = sec.get("p")
    p_values = ([float(p_sec)] if p_sec is not None
                else [float(v) for v in sec.get("p_values", [4.0, 8.0])])
    replicas = int(sec.get("paths", sec.get("replicas", 10_000)))
    innovation = sec.get("innovation", "rademacher")
    rep = rosenthal_audit(n_values, p_values, replicas, rc.seed,
                          innovation=innovation)
    rows = [AuditRow(n=c.n, statistic=f"moment_ratio[p={c.p:g}]",
                     value=c.empirical, se=c.standard_error,
                     bound=c.factor * c.base_norm, violated=c.violation,
                     regime="explicit-constant")
            for c in rep.checks]
    extra = {"kind": "rosenthal", "violations": rep.violations,
             "innovation": innovation, "replicas": replicas}
    return _audit_report(rows, extra), rep.violations


def _experiment_from(cfg: dict, rc: RunConfig, need_schedule: bool = True,
                     rho=None, omega=None) -> CltExperiment:
    sec = cfg.get("experiment", {})
    model = _model_from(cfg)
    grid = _grid_from(sec)
    schedule = tuple(int(v) for v in sec.get("n_schedule", [1]))
    if need_schedule and "n_schedule" not in sec:
        raise InputError("config needs experiment.n_schedule")
    replicas = int(sec.get("replicas", 100))
    return CltExperiment(model=model, grid=grid, n_schedule=schedule,
                         replicas=replicas, seed=rc.seed, rho=rho,
                         omega=omega, workers=rc.workers)


def _audit_tightness(cfg: dict, rc: RunConfig, sec: dict):
    exp = _experiment_from(cfg, rc)
    p_sec = sec.get("p")
    p_grid = ([float(p_sec)] if p_sec is not None
              else [float(v) for v in sec.get("p_grid", [4.0, 8.0])])
    theta = float(sec.get("theta", 2.0))
    c_theta = float(sec.get("c_theta", 1.0))
    psi = _psi_from(sec.get("psi", {"exponent": 0.5, "a": theta + 0.5}))
    rep = tightness_audit(exp, p_grid=p_grid, theta=theta, psi=psi,
                          c_theta=c_theta)
    return rep, rep.violations


def _audit_rectangle(cfg: dict, rc: RunConfig, sec: dict):
    exp = _experiment_from(cfg, rc)
    alpha = sec.get("alpha", 0.4)
    alphas = ([float(a) for a in alpha] if isinstance(alpha, list)
              else float(alpha))
    if "nu" not in sec:
        raise InputError("the rectangle audit needs an [audit.nu] table")
    nu = _psi_from(sec["nu"])
    p_grid = sec.get("p_grid")
    if p_grid is not None:
        p_grid = [float(v) for v in p_grid]
    omega0 = None
    if "omega0" in sec:
        omega0 = ModulusSpec.rectangle_power(float(sec["omega0"]["alpha"]))
    rep = rectangle_clt_audit(exp, alphas, nu, omega0=omega0, p_grid=p_grid)
    return rep, rep.violations


def _audit_kramer(cfg: dict, rc: RunConfig, sec: dict):
    exp = _experiment_from(cfg, rc)
    rep = kramer_clt_audit(
        exp,
        lam_max=float(sec.get("lam_max", 2.0)),
        n_lambda=int(sec.get("n_lambda", 33)),
        theta_exponent=float(sec.get("theta_exponent", 0.5)),
        run_verdict=bool(sec.get("run_verdict", False)))
    return rep, rep.violations


_AUDIT_HANDLERS = {
    "geometry": _audit_geometry,
    "grr": _audit_grr,
    "rosenthal": _audit_rosenthal,
    "tightness": _audit_tightness,
    "rectangle": _audit_rectangle,
    "kramer": _audit_kramer,
}


def _cmd_audit(cfg: dict, rc: RunConfig) -> int:
    sec = dict(cfg.get("audit", {}))
    for key, val in (rc.overrides or {}).items():
        if val is not None:
            sec[key] = val
    rep, violations = _AUDIT_HANDLERS[rc.audit_kind](cfg, rc, sec)
    write_report_csv(rep, rc.out_dir / "audit.csv")
    write_report_json(rep, rc.out_dir / "audit.json")
    return int(violations)


def _cmd_clt(cfg: dict, rc: RunConfig) -> int:
    norm = cfg.get("norm")
    if norm is None:
        raise InputError("config needs a [norm] table (holder or rectangle)")
    kind = norm.get("kind", "holder")
    rho = None
    omega = None
    sec = cfg.get("experiment", {})
    if kind == "holder":
        rho = holder_target_distance(_model_from(cfg), _grid_from(sec),
                                     float(norm.get("exponent", 0.5)))
    elif kind == "rectangle":
        omega = ModulusSpec.rectangle_power(float(norm.get("alpha", 0.5)))
    else:
        raise InputError(f"unknown norm kind {kind!r}")
    exp = _experiment_from(cfg, rc, rho=rho, omega=omega)
    rep = clt_verdict(exp)
    write_report_csv(rep, rc.out_dir / "clt.csv")
    write_report_json(rep, rc.out_dir / "clt.json")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "norms": _cmd_norms,
    "measure": _cmd_measure,
    "audit": _cmd_audit,
    "clt": _cmd_clt,
}


# ------------------------------------------------------------ driver

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holderclt",
        description="Norms, distance audits, and CLT diagnostics for "
                    "random fields")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="TOML config file")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default=None,
                        help="output directory (default $HOLDERCLT_OUT or .)")
        sp.add_argument("--workers", type=int, default=1,
                        help="parallelism degree")
        sp.add_argument("-v", "--verbose", action="count", default=0)

    for name in ("simulate", "norms", "measure", "clt"):
        common(sub.add_parser(name))
    ap = sub.add_parser("audit")
    ap.add_argument("kind", choices=_AUDIT_KINDS)
    common(ap)
    ap.add_argument("--alpha", type=float, default=None,
                    help="override the audit alpha")
    ap.add_argument("--p", type=float, default=None,
                    help="override the audit moment order")
    ap.add_argument("--paths", type=int, default=None,
                    help="override the replica count")
    return parser


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s")

    out_root = args.out or os.environ.get("HOLDERCLT_OUT") or "."
    overrides = None
    audit_kind = None
    if args.subcommand == "audit":
        audit_kind = args.kind
        overrides = {"alpha": args.alpha, "p": args.p, "paths": args.paths}

    try:
        config_path = Path(args.config)
        cfg = _load_config(config_path)
        rc = RunConfig(
            subcommand=args.subcommand,
            config_path=config_path,
            seed=_resolve_seed(cfg, args.seed),
            out_dir=Path(out_root),
            workers=max(1, int(args.workers)),
            verbosity=args.verbose,
            audit_kind=audit_kind,
            overrides=overrides)
        rc.out_dir.mkdir(parents=True, exist_ok=True)
        violations = _HANDLERS[args.subcommand](cfg, rc)
        _write_manifest(rc)
    except _INPUT_ERRORS as err:
        log.error("%s", err)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except _NUMERICAL_ERRORS as err:
        log.error("%s", err)
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HolderCltError as err:  # pragma: no cover - catch-all mapping
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT

    log.info("wrote %s artifacts to %s", args.subcommand, rc.out_dir)
    if violations:
        log.warning("%d audit violations", violations)
        return EXIT_VIOLATION
    return EXIT_OK


def main() -> None:  # console entry point
    sys.exit(run())


if __name__ == "__main__":
    main()
