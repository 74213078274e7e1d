"""
Command-line experiment harness.

    lfl generate|run|filters|verify [--problem shaw|gravity|file] [--n N]
        [--noise R] [--seed S] [--m-max M] [--c VALUE|opt|ladder:A:B:K]
        [--tau T] [--reorth full|none] [--out DIR] [--jobs J]
        [--reproducible] [--config FILE] [--no-plots]

Exit codes: 0 ok, 1 usage or invalid input, 2 numerical failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import report
from .bidiag import bidiagonalize, to_tridiag
from .filters import lanczos_filters_ratio, lanczos_filters_recurrence, truncation_filters
from .problems import (
    add_noise,
    build_gravity,
    build_shaw,
    from_matrix,
    load_problem,
    optimal_tikhonov_parameter,
    read_matrix_csv,
    save_problem,
    tikhonov_direct,
    write_matrix_csv,
)
from .solvers import best_cgt_parameter, cgne_iterate, cgt_iterate, discrepancy_stop
from .tridiag import shift_increments
from .verify import FAULTS, run_checks

log = logging.getLogger("lfl")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
DEFAULT_NOISE = {"shaw": 1e-4, "gravity": 1e-2, "file": 0.0}
DEFAULT_SIZE = {"shaw": 400, "gravity": 200}
FILTER_LADDER = (1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4)  # multiples of max(a_i)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CSpec:
    kind: str  # "value", "opt", "ladder" or "auto"
    start: float = 0.0
    stop: float = 0.0
    count: int = 1

    @classmethod
    def parse(cls, text: str | None) -> "CSpec":
        if text is None or text == "auto":
            return cls("auto")
        if text == "opt":
            return cls("opt")
        if text.startswith("ladder:"):
            parts = text.split(":")
            if len(parts) != 4:
                raise ConfigError(f"ladder needs the form ladder:A:B:K, got {text!r}")
            try:
                a, b, k = float(parts[1]), float(parts[2]), int(parts[3])
            except ValueError as exc:
                raise ConfigError(f"bad ladder {text!r}: {exc}") from None
            if k < 1:
                raise ConfigError("ladder count must be >= 1")
            if not (a > 0 and b > 0) and not (a == 0 and b == 0):
                raise ConfigError("ladder endpoints must both be positive (or both zero)")
            return cls("ladder", a, b, k)
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"--c must be VALUE, opt or ladder:A:B:K, got {text!r}") from None
        if not (value >= 0 and np.isfinite(value)):
            raise ConfigError(f"shift must be finite and nonnegative, got {text!r}")
        return cls("value", value, value, 1)

    def values(self) -> list[float]:
        if self.kind == "value":
            return [self.start]
        if self.kind == "ladder":
            if self.start == 0:
                return [0.0]
            return [float(v) for v in np.geomspace(self.start, self.stop, self.count)]
        return []

    def __str__(self):
        if self.kind == "value":
            return repr(self.start)
        if self.kind == "ladder":
            return f"ladder:{self.start!r}:{self.stop!r}:{self.count}"
        return self.kind


@dataclass(frozen=True)
class RunConfig:
    problem: str = "shaw"
    n: int | None = None
    rel_noise: float | None = None
    seed: int = 0
    m_max: int = 30
    c_spec: str = "auto"
    tau: float = 1.0
    reorth: str = "full"
    output_dir: str = "lfl-out"
    input: str | None = None
    rhs: str | None = None
    abs_noise: float | None = None
    solution: str = "piecewise_linear"
    jobs: int = 1
    reproducible: bool = False
    plots: bool = True
    inject_fault: str | None = None

    def __post_init__(self):
        if self.problem not in ("shaw", "gravity", "file"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.problem == "file" and not self.input:
            raise ConfigError("--problem file needs --input")
        if self.n is not None and (not isinstance(self.n, int) or self.n < 2):
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        if self.rel_noise is not None and not (self.rel_noise >= 0 and np.isfinite(self.rel_noise)):
            raise ConfigError(f"noise level must be >= 0, got {self.rel_noise}")
        if self.abs_noise is not None and not self.abs_noise > 0:
            raise ConfigError(f"absolute noise must be > 0, got {self.abs_noise}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not isinstance(self.m_max, int) or self.m_max < 1:
            raise ConfigError(f"m-max must be a positive integer, got {self.m_max!r}")
        if not self.tau >= 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if self.reorth not in ("full", "none"):
            raise ConfigError(f"reorth must be full or none, got {self.reorth!r}")
        if self.solution not in ("smooth", "piecewise_linear"):
            raise ConfigError(f"unknown gravity solution {self.solution!r}")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"jobs must be a positive integer, got {self.jobs!r}")
        if self.inject_fault is not None and self.inject_fault not in FAULTS:
            raise ConfigError(f"unknown fault {self.inject_fault!r}")
        CSpec.parse(self.c_spec)

    @property
    def c(self) -> CSpec:
        return CSpec.parse(self.c_spec)

    @property
    def size(self) -> int | None:
        return self.n if self.n is not None else DEFAULT_SIZE.get(self.problem)

    @property
    def noise(self) -> float:
        return self.rel_noise if self.rel_noise is not None else DEFAULT_NOISE[self.problem]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag destination -> RunConfig field
_FLAG_FIELDS = {
    "problem": "problem",
    "n": "n",
    "noise": "rel_noise",
    "seed": "seed",
    "m_max": "m_max",
    "c": "c_spec",
    "tau": "tau",
    "reorth": "reorth",
    "out": "output_dir",
    "input": "input",
    "rhs": "rhs",
    "noise_abs": "abs_noise",
    "solution": "solution",
    "jobs": "jobs",
    "reproducible": "reproducible",
    "no_plots": "plots",
    "inject_fault": "inject_fault",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lfl", description="CGNE / CG-Tikhonov experiments with Lanczos filter factors")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "generate": "write a test problem (JSON + matrix CSV)",
        "run": "CGNE and CGT iterates, discrepancy stop, summary",
        "filters": "Lanczos filter tables for a shift ladder",
        "verify": "run the identity checks; nonzero exit on failure",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("--config", help="JSON config file (its values win over flags)")
        p.add_argument("--problem", choices=["shaw", "gravity", "file"], default=None)
        p.add_argument("--input", help="problem JSON, or matrix CSV for --problem file")
        p.add_argument("--rhs", help="right-hand side CSV (one value per line) for a matrix CSV input")
        p.add_argument("--n", type=int, default=None, help="problem size (shaw 400, gravity 200)")
        p.add_argument("--noise", type=float, default=None, help="relative noise level (shaw 1e-4, gravity 1e-2)")
        p.add_argument("--noise-abs", type=float, default=None, help="known noise norm for external data")
        p.add_argument("--solution", choices=["smooth", "piecewise_linear"], default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--m-max", type=int, default=None)
        p.add_argument("--c", default=None, help="VALUE, opt or ladder:A:B:K")
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--reorth", choices=["full", "none"], default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--reproducible", action="store_const", const=True, default=None)
        p.add_argument("--no-plots", action="store_const", const=False, default=None)
        if name == "verify":
            p.add_argument("--inject-fault", choices=list(FAULTS), default=None)
    return parser


def resolve_config(args) -> RunConfig:
    explicit = {}
    for dest, fname in _FLAG_FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            explicit[fname] = v
    merged = dict(explicit)
    if args.config:
        try:
            from_file = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(from_file, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
        for key, value in from_file.items():
            if key in explicit and explicit[key] != value:
                log.warning("config file overrides --%s: %r -> %r", key, explicit[key], value)
        merged.update(from_file)
    return RunConfig.from_dict(merged)


def _read_vector_csv(path) -> np.ndarray:
    rows = np.atleast_2d(read_matrix_csv(path))
    return rows.ravel()


def load_config_problem(cfg: RunConfig):
    if cfg.problem == "shaw":
        p = build_shaw(cfg.size)
    elif cfg.problem == "gravity":
        p = build_gravity(cfg.size, cfg.solution)
    else:
        path = Path(cfg.input)
        if path.suffix.lower() == ".json":
            p = load_problem(path)
        else:
            matrix = read_matrix_csv(path)
            if cfg.rhs is None:
                raise ConfigError("a matrix CSV input needs --rhs")
            p = from_matrix(matrix, rhs=_read_vector_csv(cfg.rhs))
        return p
    return add_noise(p, cfg.noise, seed=cfg.seed) if cfg.noise > 0 else p


def _noise_norm(cfg: RunConfig, problem) -> float | None:
    if cfg.abs_noise is not None:
        return cfg.abs_noise
    return problem.abs_noise if problem.abs_noise > 0 else None


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _setup(cfg: RunConfig):
    problem = load_config_problem(cfg)
    n = problem.n
    steps = max(cfg.m_max, min(n, 60))
    gkb = bidiagonalize(problem.matrix, problem.rhs, steps, reorth=cfg.reorth)
    m_eff = min(cfg.m_max, gkb.m)
    if m_eff < cfg.m_max:
        log.warning("bidiagonalization broke down (%s); iterations truncated at m = %d", gkb.breakdown, m_eff)
    return problem, gkb, m_eff


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(cfg: RunConfig) -> int:
    problem = load_config_problem(cfg)
    out = _out(cfg)
    stem = f"{problem.kernel_name}_{problem.n}"
    written = [save_problem(problem, out / f"{stem}.json"), write_matrix_csv(problem.matrix, out / f"{stem}_matrix.csv")]
    rows = [[i, problem.grid_t[i], problem.x_true[i] if problem.x_true is not None else None, problem.rhs[i]] for i in range(problem.n)]
    written.append(report.write_csv(out / f"{stem}_vectors.csv", ["i", "t", "x_true", "y"], rows, reproducible=True))
    if cfg.plots and problem.x_true is not None:
        written.append(report.plot_solutions(out / f"{stem}_solution.png", problem.grid_t, problem.x_true, {}, title=stem))
    for path in written:
        print(path)
    return EXIT_OK


def _shift_values(cfg, gkb, m, problem):
    """Resolve the --c spec; returns (values, c_opt or None)."""
    spec = cfg.c
    c_opt = None
    if spec.kind in ("opt", "auto") and problem.x_true is not None:
        c_opt = best_cgt_parameter(gkb, m, problem.x_true).c
    if spec.kind == "opt":
        if c_opt is None:
            raise ConfigError("--c opt needs a problem with a known true solution")
        return [c_opt], c_opt
    if spec.kind == "auto":
        amax = float(to_tridiag(gkb, m).a.max())
        values = [k * amax for k in FILTER_LADDER]
        return (values + [c_opt]) if c_opt is not None else values, c_opt
    return spec.values(), c_opt


def cmd_run(cfg: RunConfig) -> int:
    problem, gkb, m_eff = _setup(cfg)
    out = _out(cfg)
    xt = problem.x_true
    cgne = _pmap(lambda m: cgne_iterate(gkb, m, xt), range(0, m_eff + 1), cfg.jobs)
    c_values, c_opt = _shift_values(cfg, gkb, m_eff, problem)
    cells = [(c, m) for c in c_values for m in range(1, m_eff + 1)]
    cgt = _pmap(lambda cm: cgt_iterate(gkb, cm[1], cm[0], xt), cells, cfg.jobs)

    summary = {
        "problem": problem.kernel_name,
        "n": problem.n,
        "seed": problem.seed,
        "rel_noise": problem.rel_noise,
        "abs_noise": problem.abs_noise,
        "m_max": cfg.m_max,
        "m_computed": m_eff,
        "truncated": m_eff < cfg.m_max,
        "breakdown": None if gkb.breakdown is None else list(gkb.breakdown),
        "c_values": c_values,
        "c_opt": c_opt,
        "tau": cfg.tau,
    }
    delta = _noise_norm(cfg, problem)
    stop = None
    if delta is not None:
        stop = discrepancy_stop(gkb, delta, cfg.tau, x_true=xt)
        summary.update(m_discr=stop.m, discrepancy_capped=stop.capped, err_at_m_discr=stop.record.err_norm)
    else:
        summary.update(m_discr=None, discrepancy_capped=None, err_at_m_discr=None)
    if xt is not None:
        errs = [r.err_norm for r in cgne[1:]]
        k = int(np.argmin(errs))
        summary.update(best_cgne_m=k + 1, best_cgne_err=errs[k])
        best_cgt = {}
        for c in c_values:
            recs = [r for r in cgt if r.c == c]
            best_cgt[repr(c)] = {"err_at_m_max": recs[-1].err_norm, "min_err": min(r.err_norm for r in recs)}
        summary["cgt"] = best_cgt
        if c_opt is not None:
            summary["cgt_err_at_c_opt"] = cgt_iterate(gkb, m_eff, c_opt, xt).err_norm
        tik = optimal_tikhonov_parameter(problem)
        summary.update(tikhonov_c_opt=tik.c, tikhonov_err=tik.error, tikhonov_at_boundary=tik.at_boundary)

    rep = cfg.reproducible
    report.write_csv(out / "iterates.csv", report.ITERATE_HEADER,
                     [*report.iterate_rows(cgne, "cgne"), *report.iterate_rows(cgt, "cgt")], reproducible=rep)
    report.write_csv(out / "omega.csv", report.OMEGA_HEADER,
                     [*report.omega_rows(cgne, "cgne"), *report.omega_rows(cgt, "cgt")], reproducible=rep)
    report.write_json(out / "summary.json", summary)
    cfg.save(out / "config.json")

    if cfg.plots:
        ms = [r.m for r in cgne[1:]]
        curves = {"CGNE residual": (ms, [r.nat_res_norm for r in cgne[1:]])}
        report.plot_error_curves(out / "residuals.png", curves, summary["m_discr"], ylabel="||y - A x_m||",
                                 title=f"{problem.kernel_name}({problem.n}) data fit")
        if xt is not None:
            curves = {"CGNE": (ms, [r.err_norm for r in cgne[1:]])}
            for c in c_values:
                recs = [r for r in cgt if r.c == c]
                curves[f"CGT c={c:.2e}"] = ([r.m for r in recs], [r.err_norm for r in recs])
            report.plot_error_curves(out / "errors.png", curves, summary["m_discr"],
                                     title=f"{problem.kernel_name}({problem.n}) true error")
        sols = {}
        if stop is not None:
            sols[f"CGNE m_discr={stop.m}"] = stop.record.x
        if c_opt is not None:
            sols[f"CGT m={m_eff}, c={c_opt:.2e}"] = cgt_iterate(gkb, m_eff, c_opt).x
            sols[f"Tikhonov c={summary['tikhonov_c_opt']:.2e}"] = tikhonov_direct(problem, summary["tikhonov_c_opt"])
        if sols:
            report.plot_solutions(out / "solutions.png", problem.grid_t, xt, sols,
                                  title=f"{problem.kernel_name}({problem.n})")
    print(json.dumps(report._jsonable(summary), sort_keys=True))
    return EXIT_OK


def cmd_filters(cfg: RunConfig) -> int:
    problem, gkb, m = _setup(cfg)
    out = _out(cfg)
    rep = cfg.reproducible
    name = problem.kernel_name
    c_values, c_opt = _shift_values(cfg, gkb, m, problem)
    c_values = [0.0] + [c for c in c_values if c != 0.0]
    T = to_tridiag(gkb, m)

    ratio = _pmap(lambda c: lanczos_filters_ratio(gkb, m, c), c_values, cfg.jobs)
    recur = _pmap(lambda c: lanczos_filters_recurrence(T, c), c_values, cfg.jobs)
    report.write_csv(out / "filters.csv", report.FILTER_HEADER,
                     [row for f in ratio for row in report.filter_rows(name, m, f.c, f.gamma, f.defined)], reproducible=rep)
    report.write_csv(out / "filters_recurrence.csv", report.FILTER_HEADER,
                     [row for f in recur for row in report.filter_rows(name, m, f.c, f.gamma, f.defined)], reproducible=rep)

    rows = []
    for c in c_values:
        inc = shift_increments(T, c)
        rows += [[c, *r] for r in report.recurrence_rows(inc)]
    report.write_csv(out / "recurrences.csv", ["c", *report.RECURRENCE_HEADER], rows, reproducible=rep)

    coeffs = {f"CGNE m={m}": cgne_iterate(gkb, m).omega}
    delta = _noise_norm(cfg, problem)
    m_stop = None
    if delta is not None:
        m_stop = min(discrepancy_stop(gkb, delta, cfg.tau).m, m)
        gamma, defined = truncation_filters(gkb, m_stop, m)
        report.write_csv(out / "truncation_filters.csv", ["problem", "m_stop", "m", "i", "gamma", "defined_flag"],
                         [[name, m_stop, m, i, g if ok else None, bool(ok)]
                          for i, (g, ok) in enumerate(zip(gamma, defined), start=1)], reproducible=rep)
        coeffs[f"CGNE m_discr={m_stop}"] = cgne_iterate(gkb, m_stop).omega if m_stop > 0 else np.empty(0)
    if c_opt is not None:
        coeffs[f"CGT m={m}, c={c_opt:.2e}"] = cgt_iterate(gkb, m, c_opt).omega
    crow = [[label, i, w] for label, om in coeffs.items() for i, w in enumerate(om, start=1)]
    report.write_csv(out / "coefficients.csv", ["series", "i", "omega"], crow, reproducible=rep)

    if cfg.plots:
        report.plot_filters(out / "filters.png", {f"c={f.c:.1e}": f.gamma for f in ratio},
                            title=f"Lanczos filters, {name}({problem.n}), m={m}")
        report.plot_coefficients(out / "coefficients.png", coeffs, title=f"{name}({problem.n})")
        if m_stop is not None:
            report.plot_filters(out / "truncation_filters.png", {f"m_stop={m_stop}": np.where(defined, gamma, np.nan)},
                                title=f"x_{m_stop} in the basis of x_{m}", log=False)
    print(out / "filters.csv")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    problem, gkb, m = _setup(cfg)
    out = _out(cfg)
    spec = cfg.c
    c_values = spec.values() if spec.kind in ("value", "ladder") else None
    results = run_checks(gkb, m_max=min(m, 15), c_values=c_values, fault=cfg.inject_fault)
    failed = [r.name for r in results if not r.passed]
    payload = {
        "problem": problem.kernel_name,
        "n": problem.n,
        "fault": cfg.inject_fault,
        "passed": not failed,
        "failed": failed,
        "checks": [r.to_dict() for r in results],
    }
    report.write_json(out / "verify.json", payload)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: measured {r.measured:.3e} (tolerance {r.tolerance:.1e})")
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "filters": cmd_filters, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = resolve_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](cfg)
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
