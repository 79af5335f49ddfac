"""``gradfit`` command-line driver.

Settings come from built-in defaults, then an optional INI file (``--config``),
then command-line flags. Every CSV starts with a ``#`` comment recording the
config hash and seed, followed by a header row.

Exit codes: 0 success, 1 numerical failure or failed verification, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import acceptance
from .chain import (
    ChainGeometry,
    DimensionError,
    InvalidInputError,
    ProbeParams,
    evolve,
    field_generator,
    gauge_fix,
    ghz_state,
    gradient_generator,
    linear_field,
    noon_state,
    w_state,
)
from .estimator import TrialConfig
from .experiments import default_gradient_rule, run_trials, summarize_ensemble, sweep_scaling
from .fisher import fi_matrix_numeric, optimal_state_qfi_bound, qfi_matrix_w, qfi_pure_diagonal
from .measurement import FieldModel, make_basis, outcome_distribution, prob_a_linear, prob_b_linear

OUT_ENV = "GRADFIT_OUT"
DEFAULT_OUT = "gradfit-out"
FAILURE_MARKER = "FAILED"
log = logging.getLogger("gradfit")


class ConfigError(Exception):
    pass


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


# section -> key -> parser; keys are unique across sections
SCHEMA = {
    "probe": {"gamma": float, "time": float, "spacing": float, "x1": float},
    "run": {
        "n": int,
        "g": float,
        "b1": float,
        "basis": str,
        "state": str,
        "shots": int,
        "repeats": int,
        "seed": int,
        "prior_sign": int,
        "workers": int,
        "out": str,
    },
    "sweep": {"n_list": _int_list, "analytic_only": _bool, "phase_span": float},
}
PARSERS = {k: f for section in SCHEMA.values() for k, f in section.items()}


@dataclass(frozen=True)
class RunConfig:
    gamma: float = 1.0
    time: float = 1.0
    spacing: float = 1.0
    x1: float = 0.0
    n: int = 8
    g: float = 0.05
    b1: float = 0.0
    basis: str = "b"
    state: str = "w"
    shots: int = 100000
    repeats: int = 200
    seed: int = 0
    prior_sign: int = 1
    workers: int = 1
    out: str | None = None
    n_list: tuple = (8, 16, 32, 64)
    analytic_only: bool = False
    phase_span: float = 0.4

    def validate(self) -> "RunConfig":
        problems = []
        for name in ("gamma", "time", "spacing"):
            v = getattr(self, name)
            if not np.isfinite(v) or v == 0:
                problems.append(f"{name} must be finite and nonzero")
        if self.n < 2:
            problems.append("n must be >= 2")
        if self.basis not in ("a", "b", "fourier", "cascade"):
            problems.append("basis must be a or b")
        if self.state not in ("w", "ghz", "noon"):
            problems.append("state must be w, ghz or noon")
        if self.shots < 1:
            problems.append("shots must be >= 1")
        if self.repeats < 2:
            problems.append("repeats must be >= 2")
        if self.seed < 0:
            problems.append("seed must be >= 0")
        if self.prior_sign not in (1, -1):
            problems.append("prior_sign must be 1 or -1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if any(v < 2 for v in self.n_list) or len(set(self.n_list)) < 3:
            problems.append("n_list needs at least 3 distinct values >= 2")
        if not all(np.isfinite(v) for v in (self.g, self.b1, self.x1, self.phase_span)):
            problems.append("g, b1, x1 and phase_span must be finite")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    @property
    def params(self) -> ProbeParams:
        return ProbeParams(self.gamma, self.time)

    @property
    def geometry(self) -> ChainGeometry:
        return ChainGeometry(self.n, self.spacing, self.x1)

    @property
    def basis_label(self) -> str:
        return {"fourier": "a", "cascade": "b"}.get(self.basis, self.basis)

    def digest(self) -> str:
        """Hash of every setting that affects results (the output directory does not)."""
        data = asdict(self)
        data.pop("out")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]

    def out_dir(self) -> Path:
        return Path(self.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def read_config_file(path: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                values[key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in PARSERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    names = {f.name for f in fields(RunConfig)}
    return replace(RunConfig(), **{k: v for k, v in values.items() if k in names}).validate()


# ---- output helpers ----

def _fmt(value, digits: int) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{digits}g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, cfg: RunConfig, header, rows, digits: int = 17) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg.digest()} seed={cfg.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v, digits) for v in row])
    return path


def write_series(path: Path, cfg: RunConfig, xs, ys, labels) -> Path:
    """Two-column whitespace-separated plot data."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# config_hash={cfg.digest()} seed={cfg.seed}\n# {labels[0]} {labels[1]}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{_fmt(x, 17)} {_fmt(y, 17)}\n")
    return path


def _matrix_rows(entries, first_index: int):
    return [[first_index + i, *row] for i, row in enumerate(entries)]


def _matrix_header(n_cols: int, first_index: int):
    return ["index", *[f"B{first_index + j}" for j in range(n_cols)]]


def _eigen_rows(info):
    return [[k, ev, sv] for k, (ev, sv) in enumerate(zip(info.eigenvalues, info.singular_values))]


# ---- subcommands ----

def cmd_probs(cfg: RunConfig, out: Path) -> int:
    label = cfg.basis_label
    n, params, a = cfg.n, cfg.params, cfg.spacing
    closed = (prob_a_linear if label == "a" else prob_b_linear)(n, params, a, cfg.g).probs
    field = linear_field(ChainGeometry(n, a), 0.0, cfg.g)
    projected = outcome_distribution(evolve(w_state(n), field, params), make_basis(label, n)).probs
    diff = np.abs(closed - projected)
    write_csv(
        out / f"probs_{label}_n{n}.csv",
        cfg,
        ["xi", "closed_form", "projection", "abs_diff"],
        [[xi, closed[xi], projected[xi], diff[xi]] for xi in range(n)],
    )
    for xi in range(n):
        print(f"{xi}\t{closed[xi]:.17g}\t{projected[xi]:.17g}")
    print(f"max |closed - projection| = {diff.max():.3g}")
    return 0


def _write_matrix(cfg, out, stem, info, first_index):
    write_csv(out / f"{stem}.csv", cfg, _matrix_header(info.entries.shape[1], first_index), _matrix_rows(info.entries, first_index))
    write_csv(out / f"{stem}_eigen.csv", cfg, ["k", "eigenvalue", "singular_value"], _eigen_rows(info))
    write_csv(
        out / f"{stem}_summary.csv",
        cfg,
        ["dimension", "min_eigenvalue", "max_eigenvalue", "condition_ratio", "singular"],
        [[info.entries.shape[0], info.eigenvalues.min(), info.eigenvalues.max(), info.condition_ratio, info.singular]],
        digits=6,
    )
    print(np.array2string(info.entries, precision=6, suppress_small=True))
    print(f"singular: {'yes' if info.singular else 'no'} (condition ratio {info.condition_ratio:.3g})")


def cmd_fisher(cfg: RunConfig, out: Path) -> int:
    label = cfg.basis_label
    field = linear_field(cfg.geometry, cfg.b1, cfg.g)
    info = fi_matrix_numeric(FieldModel(make_basis(label, cfg.n), cfg.params), gauge_fix(field), params=cfg.params)
    _write_matrix(cfg, out, f"fisher_{label}_n{cfg.n}", info, 2)
    return 0


def cmd_qfi(cfg: RunConfig, out: Path) -> int:
    n, params = cfg.n, cfg.params
    if cfg.state == "w":
        gens = [field_generator(n, m, params) for m in range(2, n + 1)]
        info = qfi_pure_diagonal(w_state(n), gens)
        _write_matrix(cfg, out, f"qfi_w_n{n}", info, 2)
        gap = float(np.abs(info.entries - qfi_matrix_w(n, params).entries).max())
        print(f"max |general - closed form| = {gap:.3g}")
        return 0
    state = ghz_state(n) if cfg.state == "ghz" else noon_state(n)
    gen = gradient_generator(n, params, cfg.spacing)
    value = float(qfi_pure_diagonal(state, [gen]).entries[0, 0])
    bound = optimal_state_qfi_bound(gen)
    write_csv(out / f"qfi_{cfg.state}_n{n}.csv", cfg, ["n", "state", "qfi_gradient", "optimal_state_bound"], [[n, cfg.state, value, bound]])
    print(f"{value:.17g}")
    return 0


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    geo = cfg.geometry
    config = TrialConfig(geo, cfg.params, linear_field(geo, cfg.b1, cfg.g), "cascade", cfg.shots, cfg.seed, cfg.prior_sign)
    estimates = run_trials(config, cfg.repeats, cfg.workers)
    write_csv(
        out / "simulate_trials.csv",
        cfg,
        ["trial", "g_hat", "intercept", "log_likelihood", "converged", "iterations", "grad_norm"],
        [[i, e.g_hat, e.intercept, e.log_likelihood, e.converged, e.iterations, e.grad_norm] for i, e in enumerate(estimates)],
    )
    stats = summarize_ensemble(config, estimates)
    row = stats.row()
    write_csv(out / "simulate_stats.csv", cfg, ["n", "g", "shots", *row], [[cfg.n, cfg.g, cfg.shots, *row.values()]], digits=6)
    for key, value in row.items():
        print(f"{key}: {_fmt(value, 6)}")
    if not stats.valid:
        raise RuntimeError(f"{stats.failures} of {stats.repeats} trials did not converge")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    report = sweep_scaling(
        cfg.n_list,
        cfg.shots,
        gradient_rule=default_gradient_rule(cfg.params, cfg.spacing, cfg.phase_span),
        seed=cfg.seed,
        repeats=cfg.repeats,
        params=cfg.params,
        spacing=cfg.spacing,
        analytic_only=cfg.analytic_only,
        workers=cfg.workers,
    )
    cols = ["n", "gradient", "shots", "crb", "std_g"]
    write_csv(out / "sweep.csv", cfg, cols, [[r[c] for c in cols] for r in report.rows], digits=6)
    ns = [r["n"] for r in report.rows]
    files = {"table": "sweep.csv", "crb": "sweep_crb.dat"}
    write_series(out / "sweep_crb.dat", cfg, ns, [r["crb"] for r in report.rows], ("n", "crb"))
    if not cfg.analytic_only:
        write_series(out / "sweep_std.dat", cfg, ns, [r["std_g"] for r in report.rows], ("n", "std_g"))
        files["std"] = "sweep_std.dat"
    manifest = {
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "analytic_only": cfg.analytic_only,
        "series": files,
        "x": "n",
        "slope": report.slope,
        "slope_ci95": report.slope_ci,
        "crb_slope": report.crb_slope,
        "log_scale": True,
    }
    (out / "sweep_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"slope: {report.slope:.6g} (95% CI +/- {report.slope_ci:.3g}); crb slope: {report.crb_slope:.6g}")
    return 0


def cmd_verify(cfg: RunConfig, out: Path, criteria=None) -> int:
    return 0 if acceptance.run_all(criteria) else 1


COMMANDS = {
    "probs": cmd_probs,
    "fisher": cmd_fisher,
    "qfi": cmd_qfi,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [probe], [run] and [sweep] sections")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--gamma", type=float)
    common.add_argument("--time", type=float)
    common.add_argument("--spacing", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gradfit", description="Field-gradient estimation with W-state probes on a spin chain.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probs", parents=[common], help="outcome probabilities on a linear field")
    p.add_argument("--basis", choices=["a", "b", "fourier", "cascade"])
    p.add_argument("--n", type=int)
    p.add_argument("--g", type=float)

    p = sub.add_parser("fisher", parents=[common], help="numeric Fisher matrix over B_2..B_N")
    p.add_argument("--basis", choices=["a", "b", "fourier", "cascade"])
    p.add_argument("--n", type=int)
    p.add_argument("--g", type=float)
    p.add_argument("--b1", type=float)

    p = sub.add_parser("qfi", parents=[common], help="quantum Fisher information of a probe state")
    p.add_argument("--state", choices=["w", "ghz", "noon"])
    p.add_argument("--n", type=int)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo ensemble of gradient fits")
    p.add_argument("--n", type=int)
    p.add_argument("--g", type=float)
    p.add_argument("--b1", type=float)
    p.add_argument("--shots", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--prior-sign", dest="prior_sign", type=int, choices=[1, -1])
    p.add_argument("--workers", type=int)

    p = sub.add_parser("sweep", parents=[common], help="scaling of the gradient error with N")
    p.add_argument("--n", dest="n_list", type=_int_list, help="comma-separated chain lengths")
    p.add_argument("--shots", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--phase-span", dest="phase_span", type=float, help="gamma*t*a*G*N used to pick G per N")
    p.add_argument("--analytic-only", dest="analytic_only", action="store_const", const=True)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--criteria", type=_int_list, help="comma-separated subset, e.g. 1,5,9")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"gradfit: config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "verify":
        criteria = getattr(args, "criteria", None)
        unknown = set(criteria or ()) - set(acceptance.CRITERIA)
        if unknown:
            print(f"gradfit: config error: unknown criteria {sorted(unknown)}", file=sys.stderr)
            return 2
        return cmd_verify(cfg, cfg.out_dir(), criteria)

    out = cfg.out_dir()
    marker = out / FAILURE_MARKER
    try:
        out.mkdir(parents=True, exist_ok=True)
        marker.unlink(missing_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (InvalidInputError, DimensionError) as exc:
        print(f"gradfit: config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        # keep whatever was written, flag the directory
        marker.write_text(f"{args.command}: {exc}\n")
        print(f"gradfit: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
