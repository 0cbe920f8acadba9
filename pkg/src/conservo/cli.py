"""``conservo`` command line: run experiments and write CSV results.

Subcommands::

    conservo list
    conservo run --experiment lv2 --method mn_dmm
    conservo table --experiment lorenz
    conservo convergence --experiment lv2 --method mixed

Settings come from the experiment registry, then an optional ``--config``
file of ``key = value`` lines, then explicit flags (highest precedence).
Exit status is 0 on success, 1 on a usage or config error and 2 when an
integration was truncated.
"""

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConservoError, InvalidParams
from .harness import convergence_study, integrate, stored_defects, summarize
from .steppers import BASE_SCHEMES, StepperConfig
from .systems import EXPERIMENTS

EXIT_OK, EXIT_CONFIG, EXIT_TRUNCATED = 0, 1, 2

# user-facing method name -> stepper variant
METHODS = {
    "mn_dmm": "direct",
    "direct": "direct",
    "mixed": "mixed",
    "mixed_svd": "mixed_svd",
    "rk4": "rk4",
    "implicit_midpoint": "implicit_midpoint",
}
TABLE_METHODS = ("rk4", "implicit_midpoint", "mn_dmm", "mixed", "mixed_svd")

_FLOAT_KEYS = ("tau", "t_final", "delta", "epsilon")
_INT_KEYS = ("max_iters", "decimate", "seed", "halvings")
_STR_KEYS = ("experiment", "method", "output_dir", "base_scheme")
CONFIG_KEYS = _FLOAT_KEYS + _INT_KEYS + _STR_KEYS


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share the config-error exit status
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def fmt(x):
    """Floats with 17 significant digits; strings pass through."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        out[key] = _coerce(key, value.strip())
    return out


def _coerce(key, value):
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
    except ValueError:
        raise ConfigError(f"'{key}': cannot parse {value!r}") from None
    return value


@dataclass
class RunConfig:
    experiment: str
    method: str
    tau: float
    t_final: float
    delta: float
    epsilon: float
    max_iters: int
    output_dir: Path
    decimate: int = 1
    seed: int = 0
    base_scheme: str = "improved_euler"
    halvings: int = 3

    def stepper(self, method=None):
        return StepperConfig(
            tau=self.tau,
            delta=self.delta,
            epsilon=self.epsilon,
            max_iters=self.max_iters,
            variant=METHODS[method or self.method],
            base_scheme=self.base_scheme,
        )


def resolve(args, need_method=True):
    """Merge registry defaults, config file and flags into a RunConfig.

    With ``need_method=False`` the method stays ``None`` unless given.
    """
    given = read_config(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            given[key] = value

    name = given.get("experiment")
    if name is None:
        raise ConfigError("'experiment' is required")
    if name not in EXPERIMENTS:
        raise ConfigError(f"'experiment': unknown {name!r}; valid: {', '.join(EXPERIMENTS)}")
    exp = EXPERIMENTS[name]

    method = given.get("method")
    if method is None and need_method:
        method = "mn_dmm"
    if method is not None and method not in METHODS:
        raise ConfigError(f"'method': unknown {method!r}; valid: {', '.join(METHODS)}")
    base = given.get("base_scheme", "improved_euler")
    if base not in BASE_SCHEMES:
        raise ConfigError(f"'base_scheme': unknown {base!r}; valid: {', '.join(BASE_SCHEMES)}")

    cfg = RunConfig(
        experiment=name,
        method=method,
        tau=given.get("tau", exp.tau),
        t_final=given.get("t_final", exp.t_final),
        delta=given.get("delta", exp.delta),
        epsilon=given.get("epsilon", exp.epsilon),
        max_iters=given.get("max_iters", exp.max_iters),
        output_dir=Path(given.get("output_dir", ".")),
        decimate=given.get("decimate", 1),
        seed=given.get("seed", 0),
        base_scheme=base,
        halvings=given.get("halvings", 3),
    )
    for key in _FLOAT_KEYS + ("max_iters", "decimate"):
        value = getattr(cfg, key)
        if not (value > 0 and math.isfinite(value)):
            raise ConfigError(f"'{key}' must be positive, got {value}")
    if cfg.t_final <= exp.t0:
        raise ConfigError(f"'t_final' must exceed the start time {exp.t0}")
    if cfg.seed < 0:
        raise ConfigError("'seed' must be non-negative")
    if cfg.halvings < 2:
        raise ConfigError("'halvings' must be at least 2")
    return cfg, exp


def _prepare_dir(path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"'output_dir': cannot create {path}: {exc.strerror}") from None


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def summary_header(m):
    return (["method"] + [f"psi_defect_max_{i}" for i in range(m)]
            + ["mean_fpi", "max_kappa", "nonconverged", "wall_s"])


def summary_row(name, report, m):
    defects = [math.nan] * m if report.failed else list(report.max_psi_defect)
    return ([name] + defects
            + [report.mean_fpi, report.max_kappa, report.nonconverged_steps, report.wall_time])


def _run_one(cfg, exp, method):
    system, x0 = exp.build(cfg.seed)
    traj = integrate(system, cfg.stepper(method), x0, exp.t0, cfg.t_final, cfg.decimate)
    return system, traj, summarize(traj, system)


def write_trajectory(path, traj, system):
    n, m = system.n, system.m
    header = (["step", "t"] + [f"x_{i}" for i in range(n)]
              + [f"psi_defect_{i}" for i in range(m)] + ["fpi", "kappa", "converged"])
    log = traj.diagnostics
    defects = stored_defects(traj, system)
    rows = []
    for i, step in enumerate(traj.step_index):
        if step == 0:
            extra = [0, math.nan, True]
        else:
            extra = [log.iterations[step - 1], log.kappa[step - 1], log.converged[step - 1]]
        rows.append([step, traj.times[i], *traj.states[i], *defects[i], *extra])
    _write_csv(path, header, rows)


def write_defect_series(path, traj, system):
    """Per stored row, the largest per-step defect since the previous row
    (with ``decimate=1`` this is the plain per-step series)."""
    m = system.m
    per_step = traj.diagnostics.psi_defect
    rows = []
    prev = 0
    for i, step in enumerate(traj.step_index):
        if step == 0:
            block = np.zeros(m)
        else:
            block = np.nanmax(per_step[prev:step], axis=0)
        prev = step
        rows.append([step, traj.times[i], *block])
    _write_csv(path, ["step", "t"] + [f"psi_defect_{i}" for i in range(m)], rows)


def _failure_note(report):
    return f"{report.failure} at step {report.failed_step}"


def cmd_run(cfg, exp):
    _prepare_dir(cfg.output_dir)
    system, traj, report = _run_one(cfg, exp, cfg.method)
    stem = cfg.output_dir / f"{cfg.experiment}_{cfg.method}"
    write_trajectory(f"{stem}_traj.csv", traj, system)
    write_defect_series(f"{stem}_defect.csv", traj, system)
    _write_csv(f"{stem}_summary.csv", summary_header(system.m),
               [summary_row(cfg.method, report, system.m)])
    print(render_table([(cfg.method, report)], system))
    if report.failed:
        print(f"truncated: {_failure_note(report)}", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


def _sci(x):
    if x is None:
        return "--"
    return "nan" if math.isnan(x) else f"{x:.3e}"


def render_table(rows, system):
    """Plain-text table; mean FPIs count corrector iterations only."""
    names = list(system.conserved_names)
    header = ["method"] + [f"|{nm}-{nm}0|" for nm in names] + ["mean FPIs", "max kappa", "note"]
    body = []
    for name, r in rows:
        defects = [math.nan] * len(names) if r.failed else list(r.max_psi_defect)
        fpi = "--" if r.mean_fpi is None else f"{r.mean_fpi:.3f}"
        kap = "--" if r.max_kappa is None else f"{r.max_kappa:.4g}"
        note = _failure_note(r) if r.failed else ""
        body.append([name] + [_sci(d) for d in defects] + [fpi, kap, note])
    widths = [max(len(row[c]) for row in [header] + body) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in [header] + body]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def cmd_table(cfg, exp, methods):
    _prepare_dir(cfg.output_dir)
    results = []
    system = None
    for method in methods:
        system, _traj, report = _run_one(cfg, exp, method)
        results.append((method, report))
    m = system.m
    _write_csv(cfg.output_dir / f"{cfg.experiment}_table.csv", summary_header(m),
               [summary_row(name, r, m) for name, r in results])
    print(f"{cfg.experiment}: tau={fmt(cfg.tau)} T={fmt(cfg.t_final)} "
          f"delta={cfg.delta:g} epsilon={cfg.epsilon:g} K={cfg.max_iters}")
    print(render_table(results, system))
    return EXIT_TRUNCATED if any(r.failed for _n, r in results) else EXIT_OK


def cmd_list():
    print(f"{'experiment':<14}{'tau':>24}{'T':>24}{'delta':>8}{'epsilon':>9}{'K':>4}")
    for e in EXPERIMENTS.values():
        print(f"{e.name:<14}{fmt(e.tau):>24}{fmt(e.t_final):>24}"
              f"{e.delta:>8.0e}{e.epsilon:>9.0e}{e.max_iters:>4}")
    print()
    print("methods: " + ", ".join(METHODS))
    print("(mn_dmm is the direct variant)")
    return EXIT_OK


def cmd_convergence(cfg, exp):
    _prepare_dir(cfg.output_dir)
    system, x0 = exp.build(cfg.seed)
    study = convergence_study(system, cfg.stepper(), x0, exp.t0, cfg.t_final, cfg.halvings)
    orders = list(study.orders) + [math.nan]
    rows = [[tau, err, p, fail or ""]
            for tau, err, p, fail in zip(study.taus, study.errors, orders, study.failures)]
    _write_csv(cfg.output_dir / f"{cfg.experiment}_{cfg.method}_convergence.csv",
               ["tau", "error", "order", "failure"], rows)
    print(f"{'tau':>12}{'error':>12}{'order':>8}")
    for tau, err, p, fail in rows:
        order = "" if math.isnan(p) else f"{p:.3f}"
        print(f"{tau:>12.4e}{_sci(err):>12}{order:>8}  {fail}")
    return EXIT_TRUNCATED if any(study.failures) else EXIT_OK


def build_parser():
    parser = _Parser(prog="conservo", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, method_action="store"):
        p.add_argument("--experiment")
        p.add_argument("--method", action=method_action,
                       help="one of: " + ", ".join(METHODS))
        p.add_argument("--tau", type=float)
        p.add_argument("--t-final", dest="t_final", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--decimate", type=int, help="store every k-th state")
        p.add_argument("--seed", type=int, help="vortex configuration seed")
        p.add_argument("--base-scheme", dest="base_scheme",
                       help="improved_euler or trapezoidal")
        p.add_argument("--config", help="file of 'key = value' lines")

    common(sub.add_parser("run", help="integrate one experiment with one method"))
    common(sub.add_parser("table", help="compare methods on one experiment"),
           method_action="append")
    conv = sub.add_parser("convergence", help="observed order under step halving")
    common(conv)
    conv.add_argument("--halvings", type=int)
    sub.add_parser("list", help="show experiments and methods")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            return cmd_list()
        if args.command == "table":
            methods = args.method
            args.method = None
            cfg, exp = resolve(args, need_method=False)
            if not methods:
                methods = [cfg.method] if cfg.method else list(TABLE_METHODS)
            bad = [m for m in methods if m not in METHODS]
            if bad:
                raise ConfigError(f"'method': unknown {bad[0]!r}; valid: {', '.join(METHODS)}")
            return cmd_table(cfg, exp, methods)
        cfg, exp = resolve(args)
        if args.command == "run":
            return cmd_run(cfg, exp)
        return cmd_convergence(cfg, exp)
    except ConfigError as exc:
        print(f"conservo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParams as exc:
        print(f"conservo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConservoError as exc:
        print(f"conservo: {exc}", file=sys.stderr)
        return EXIT_TRUNCATED


if __name__ == "__main__":
    sys.exit(main())
