"""Command line front end: reductions, single solves, lambda-grid surveys, simulations.

Subcommands ``reduce``, ``eigen``, ``survey``, ``simulate`` and ``check``.
Exit codes: 0 success, 1 configuration or usage error, 2 numeric failure,
3 acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .eigenfn import (SolveOptions, l1_norm, l1_norm_2d, lattice_indices, lp_truncated_norms,
                      lp_truncated_norms_2d, residual_generator_1d, residual_generator_2d,
                      residual_semigroup_1d, residual_semigroup_2d, solve_1d, solve_2d_isotropic,
                      weyl_residual_minimize)
from .eigenfn.one_d import semigroup_time_limit as _time_limit_1d
from .eigenfn.two_d import semigroup_time_limit as _time_limit_2d
from .errors import ConfigError, NumericError, OULabError, StabilityError, DegeneracyError
from .gauss_core import left_eigenpairs
from .ou_model import (QuadSpec, Spec1D, Spec2D, bump_profile, gaussian_bump_profile,
                       linear_profile, load_model, model_with_complex_eigenpair,
                       model_with_real_eigenpair, plane_wave_profile, quadratic_profile,
                       reduce_1d, reduce_2d, require_stable, rinf_identity_check,
                       variance_identity_check)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 1, 2, 3
SIG = 12  # significant digits in every emitted number

# ---------------------------------------------------------------------------
# builtin models


def _demo1d():
    return model_with_real_eigenpair(-1.0, 1.0, 8, np.random.default_rng(1001)) + (-1.0,)


def _demo2d_iso():
    model, x0 = model_with_complex_eigenpair(-1.0, 2.0, 8, np.random.default_rng(1002))
    return model, x0, complex(-1.0, 2.0)


def _demo2d_general():
    G = np.eye(2) + 0.35 * np.random.default_rng(7).standard_normal((2, 2))
    model, x0 = model_with_complex_eigenpair(-1.0, 2.0, 8, np.random.default_rng(1003), G=G)
    return model, x0, complex(-1.0, 2.0)


def _bigmodel():
    return model_with_real_eigenpair(-1.0, 1.0, 64, np.random.default_rng(1004)) + (-1.0,)


BUILTINS = {
    "demo1d": _demo1d,
    "demo2d_iso": _demo2d_iso,
    "demo2d_general": _demo2d_general,
    "bigmodel": _bigmodel,
}


@dataclass(frozen=True)
class Reduced:
    """A model together with its reduction; ``kind`` is 1d, 2d_iso or 2d_general."""

    model: object
    spec: object
    kind: str


def _classify(spec):
    if isinstance(spec, Spec1D):
        return "1d"
    return "2d_iso" if spec.is_isotropic else "2d_general"


def _pick_eigenpair(model, reduction):
    w, V = left_eigenpairs(model.A)
    tol = 1e-10 * max(1.0, np.abs(w).max())
    for lam, v in zip(w, V.T):
        real = abs(lam.imag) <= tol
        if reduction == "1d" and not real:
            continue
        if reduction == "2d" and (real or lam.imag < 0):
            continue
        if reduction == "auto" and not real and lam.imag < 0:
            continue
        if real:
            return v.real / np.linalg.norm(v.real), float(lam.real)
        return v, complex(lam)
    raise ConfigError(f"model has no eigenpair suitable for reduction '{reduction}'")


def resolve_model(model="demo1d", model_file="", reduction="auto"):
    """Load a builtin or a model file and reduce it."""
    if model_file:
        try:
            m = load_model(model_file)
        except OSError as exc:
            raise ConfigError(f"cannot read model file {model_file}: {exc}") from exc
        require_stable(m)
        x0, gamma = _pick_eigenpair(m, reduction)
    else:
        if model not in BUILTINS:
            raise ConfigError(f"unknown builtin '{model}'; choose from {', '.join(BUILTINS)}")
        m, x0, gamma = BUILTINS[model]()
        if reduction == "1d" and isinstance(gamma, complex):
            raise ConfigError(f"builtin '{model}' has a complex eigenpair; use reduction 2d")
        if reduction == "2d" and not isinstance(gamma, complex):
            raise ConfigError(f"builtin '{model}' has a real eigenpair; use reduction 1d")
    spec = reduce_1d(m, x0, gamma) if isinstance(gamma, float) else reduce_2d(m, x0, gamma)
    return Reduced(m, spec, _classify(spec))


# ---------------------------------------------------------------------------
# survey configuration


@dataclass(frozen=True)
class SurveyConfig:
    model: str = "demo1d"
    model_file: str = ""
    reduction: str = "auto"
    re_min: float = -2.0
    re_max: float = -0.5
    im_min: float = -2.0
    im_max: float = 2.0
    step: float = 0.5
    times: tuple = (0.1, 0.2)
    gen_tol: float = 1e-8
    semi_tol: float = 1e-3
    rtol: float = 1e-12
    t_cap: float = 30.0
    quad_tol: float = 1e-10
    seed: int = 0
    jobs: int = 1
    out_csv: str = ""
    out_json: str = ""

    def __post_init__(self):
        validate_config(self)

    def as_dict(self, echo=False):
        d = dataclasses.asdict(self)
        d["times"] = list(self.times)
        if echo:
            for k in EXECUTION_ONLY:
                del d[k]
        return d

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


# worker count and output paths do not change results, so they stay out of reports
EXECUTION_ONLY = ("jobs", "out_csv", "out_json")
_FIELDS = {f.name: f for f in dataclasses.fields(SurveyConfig)}


def validate_config(cfg):
    if cfg.reduction not in ("auto", "1d", "2d"):
        raise ConfigError(f"reduction must be auto, 1d or 2d, got '{cfg.reduction}'")
    if not cfg.model_file and cfg.model not in BUILTINS:
        raise ConfigError(f"unknown builtin '{cfg.model}'; choose from {', '.join(BUILTINS)}")
    vals = [cfg.re_min, cfg.re_max, cfg.im_min, cfg.im_max, cfg.step]
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError("grid bounds and step must be finite")
    if not cfg.re_max < 0:
        raise ConfigError("grid must lie in the open left half-plane "
                          f"(re_max = {cfg.re_max:g} is not negative)")
    if not cfg.step > 0:
        raise ConfigError(f"step must be positive, got {cfg.step:g}")
    for name in ("gen_tol", "semi_tol", "rtol", "t_cap", "quad_tol"):
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} must be positive")
    if not cfg.times or any(not (t > 0) for t in cfg.times):
        raise ConfigError("times must be a non-empty list of positive numbers")
    if cfg.jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {cfg.jobs}")
    if not 0 <= cfg.seed < 2 ** 63:
        raise ConfigError("seed must lie in [0, 2^63)")


def _coerce(name, text):
    kind = _FIELDS[name].type
    try:
        if name == "times":
            if isinstance(text, (list, tuple)):
                return tuple(float(t) for t in text)
            return tuple(float(s) for s in str(text).replace(",", " ").split())
        if kind == "float":
            return float(text)
        if kind == "int":
            return int(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc
    return str(text)


def config_from_mapping(mapping, base=None):
    unknown = sorted(set(mapping) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kw = {k: _coerce(k, v) for k, v in mapping.items()}
    return dataclasses.replace(base or SurveyConfig(), **kw)


def parse_config(text, base=None):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        mapping[key] = value
    return config_from_mapping(mapping, base)


def load_config(path, base=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base)


def format_config(cfg):
    out = []
    for name, value in cfg.as_dict().items():
        if name == "times":
            value = ", ".join(repr(float(t)) for t in value)
        elif isinstance(value, float):
            value = repr(value)
        out.append(f"{name} = {value}")
    return "\n".join(out) + "\n"


def lambda_grid(cfg):
    """Grid points ``re_min + i step`` (outer) by ``im_min + j step`` (inner).

    Points are built by multiplication, not accumulation, so halving the
    step reproduces every old point bit for bit.
    """
    def axis(lo, hi):
        if hi < lo:
            return []
        n = int(math.floor((hi - lo) / cfg.step + 1e-9)) + 1
        return [lo + i * cfg.step for i in range(n)]

    return [complex(r, i) for r in axis(cfg.re_min, cfg.re_max)
            for i in axis(cfg.im_min, cfg.im_max)]


# ---------------------------------------------------------------------------
# survey


def _row_template(lam, times):
    row = {"lambda_re": lam.real, "lambda_im": lam.imag, "gen_residual": math.nan,
           "l1_norm": math.nan, "l2_trunc_ratio": math.nan, "pass": False, "error": ""}
    for k in range(len(times)):
        row[f"semi_residual_t{k}"] = math.nan
    return row


def survey_row(task):
    """Residuals and norms for one lambda; every library error lands in the row."""
    kind, spec, lam, cfg = task
    row = _row_template(lam, cfg.times)
    opts = SolveOptions(rtol=cfg.rtol, T_cap=cfg.t_cap)
    quad = QuadSpec(start_order=16, max_order=256, tol=cfg.quad_tol)
    try:
        if kind == "1d":
            ef = solve_1d(spec, lam, opts)
            row["gen_residual"] = residual_generator_1d(spec, ef)
            for k, t in enumerate(cfg.times):
                row[f"semi_residual_t{k}"] = residual_semigroup_1d(spec, ef, t, quad)
            row["l1_norm"] = l1_norm(ef)
            sd = math.sqrt(spec.variance)
            n4, n8 = lp_truncated_norms(spec, ef, 2, [4 * sd, 8 * sd])
        elif kind == "2d_iso":
            ef = solve_2d_isotropic(spec, lam, opts=opts)
            row["gen_residual"] = residual_generator_2d(spec, ef)
            for k, t in enumerate(cfg.times):
                row[f"semi_residual_t{k}"] = residual_semigroup_2d(spec, ef, t)
            row["l1_norm"] = l1_norm_2d(ef)
            sd = math.sqrt(spec.r / (2 * abs(spec.a)))
            n4, n8 = lp_truncated_norms_2d(ef, 2, [4 * sd, 8 * sd])
        else:
            rep = weyl_residual_minimize(spec, lam)
            row["gen_residual"] = rep.residual
            row["error"] = "general R: generator residual only (family minimum)"
            return row
        row["l2_trunc_ratio"] = n8 / n4
        row["pass"] = bool(row["gen_residual"] <= cfg.gen_tol and all(
            row[f"semi_residual_t{k}"] <= cfg.semi_tol for k in range(len(cfg.times))))
    except (OULabError, ArithmeticError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


@dataclass
class SurveyReport:
    config: SurveyConfig
    kind: str
    rows: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def pass_rate(self):
        if not self.rows:
            return None
        return sum(r["pass"] for r in self.rows) / len(self.rows)

    @property
    def max_residual(self):
        vals = [v for r in self.rows for k, v in r.items()
                if (k == "gen_residual" or k.startswith("semi_residual_")) and math.isfinite(v)]
        return max(vals) if vals else None

    def summary(self):
        return {"pass_rate": self.pass_rate, "max_residual": self.max_residual,
                "rows": len(self.rows), "reduction": self.kind}


def _check_times(kind, spec, times):
    if kind == "1d":
        limit = _time_limit_1d(spec.gamma)
    elif kind == "2d_iso":
        limit = _time_limit_2d(spec.a)
    else:
        return
    bad = [t for t in times if t > limit * (1 + 1e-12)]
    if bad:
        raise ConfigError(f"semigroup times {bad} exceed the certified limit {limit:.6g}")


def run_survey(cfg, reduced=None):
    """Evaluate every grid point; rows come back in grid order whatever ``cfg.jobs`` is."""
    red = reduced or resolve_model(cfg.model, cfg.model_file, cfg.reduction)
    _check_times(red.kind, red.spec, cfg.times)
    tasks = [(red.kind, red.spec, lam, cfg) for lam in lambda_grid(cfg)]
    t0 = time.perf_counter()
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as pool:
            rows = list(pool.map(survey_row, tasks, chunksize=1))
    else:
        rows = [survey_row(t) for t in tasks]
    return SurveyReport(cfg, red.kind, rows, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# emitters


def fmt_number(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return f"{float(v):.{SIG}g}"


def csv_header(n_times):
    return (["lambda_re", "lambda_im", "gen_residual"]
            + [f"semi_residual_t{k}" for k in range(n_times)]
            + ["l1_norm", "l2_trunc_ratio", "pass"])


def emit_csv(report, path):
    header = csv_header(len(report.config.times))
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in report.rows:
                w.writerow([fmt_number(row[k]) for k in header])
    except OSError as exc:
        raise ConfigError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def read_csv(path):
    """Parse a survey CSV back into rows of floats (``pass`` as bool)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (v == "true") if k == "pass" else float(v) for k, v in r.items()} for r in rows]


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(f"{v:.{SIG}g}") if math.isfinite(v) else None
    return v


def dumps_json(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def report_json(report):
    """Keys: ``config`` (echo of every SurveyConfig field), ``rows`` (one object
    per lambda, NaN as null, plus an ``error`` string), ``summary``
    (pass_rate, max_residual, rows, reduction).  Wall time is left out so the
    file is reproducible; the CLI prints it instead.  ``jobs`` and the output
    paths are not echoed since they do not affect any value."""
    return {"config": report.config.as_dict(echo=True), "rows": report.rows,
            "summary": report.summary()}


def write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return path


def emit_json(report, path):
    return write_text(path, dumps_json(report_json(report)))


# ---------------------------------------------------------------------------
# check and simulate


def _probe_profiles(k, rng):
    if k == 1:
        return {"linear": linear_profile([0.7]),
                "quadratic": quadratic_profile([[1.3]], [0.2], -0.4),
                "plane_wave": plane_wave_profile([0.9]),
                "gaussian_bump": gaussian_bump_profile([0.3], 0.8)}
    M = rng.standard_normal((2, 2))
    return {"linear": linear_profile([0.7, -0.4]),
            "quadratic": quadratic_profile(M + M.T, [0.2, 0.1], -0.4),
            "plane_wave": plane_wave_profile([0.9, -0.5]),
            "gaussian_bump": gaussian_bump_profile([0.3, -0.2], 0.8)}


def _bounded_profiles(k, scale):
    c = np.full(k, 0.3 * scale)
    return {"plane_wave": plane_wave_profile(np.full(k, 1.1 / scale)),
            "gaussian_bump": gaussian_bump_profile(c, scale),
            "bump": bump_profile(-c, 1.5 * scale)}


def _functionals(spec):
    if isinstance(spec, Spec1D):
        return spec.x0star[None, :]
    return np.stack([spec.h1star, spec.h2star])


def simulate_checks(red, seed, paths=100_000, times=(0.5, 1.0)):
    from .lift_mc import SimConfig, invariance_test, pushforward_equivalence_check, lift
    from .ou_model import pushforward_law

    F = _functionals(red.spec)
    scale = float(np.sqrt(np.max(np.diag(pushforward_law(red.model, F).cov))))
    cfg = SimConfig(n_paths=paths, seed=seed)
    out = []
    for name, prof in _bounded_profiles(F.shape[0], scale).items():
        f = lift(prof, F)
        for t in times:
            inv = invariance_test(red.model, f, t, cfg)
            out.append({"check": f"invariance/{name}/t={t:g}", "passed": inv.passed,
                        "difference": abs(inv.difference), "stderr": inv.stderr})
        neg = invariance_test(red.model, f, times[0], cfg, cov_scale=1.5)
        out.append({"check": f"negative_control/{name}", "passed": not neg.passed,
                    "difference": abs(neg.difference), "stderr": neg.stderr})
        pf = pushforward_equivalence_check(red.model, F, prof, cfg)
        out.append({"check": f"pushforward/{name}", "passed": pf.passed,
                    "reduced": pf.reduced, "lifted": pf.lifted.value,
                    "stderr": pf.lifted.stderr})
    return out


def run_check(builtin, seed, jobs=1):
    """Acceptance checks on one builtin; a JSON-ready dict with per-check verdicts."""
    from .lift_mc import contraction_check, lift, lifting_identity_check
    from .ou_model import pushforward_law

    red = resolve_model(builtin)
    rng = np.random.default_rng(seed)
    checks = []

    if red.kind == "1d":
        reps = [variance_identity_check(red.spec, red.model)]
    else:
        reps = list(rinf_identity_check(red.spec, red.model))
    for r in reps:
        checks.append({"check": f"identity/{r.name}", "passed": r.passed,
                       "deviation": r.deviation, "tol": r.tol})

    X = rng.standard_normal((100, red.model.n))
    k = 1 if red.kind == "1d" else 2
    for name, prof in _probe_profiles(k, rng).items():
        rep = lifting_identity_check(red.model, red.spec, prof, X)
        checks.append({"check": f"lifting/{name}", "passed": rep.passed,
                       "max_relative": rep.max_relative})

    if red.kind == "2d_general":
        spec = red.spec
        mu = complex(spec.a, spec.b)
        for lam in (mu, 2 * mu + mu.conjugate()):
            assert lattice_indices(spec, lam) is not None
            rep = weyl_residual_minimize(spec, lam)
            checks.append({"check": f"weyl/lattice/{lam.real:g}{lam.imag:+g}i",
                           "passed": rep.residual <= 1e-6, "residual": rep.residual})
        rep = weyl_residual_minimize(spec, complex(-1.0, 1.0))
        checks.append({"check": "weyl/-1+1i", "passed": rep.residual <= 0.1,
                       "residual": rep.residual})
    else:
        cfg = SurveyConfig(model=builtin, gen_tol=1e-8 if red.kind == "1d" else 1e-6,
                           seed=seed, jobs=jobs)
        survey = run_survey(cfg, red)
        checks.append({"check": "survey", "passed": survey.pass_rate == 1.0,
                       "pass_rate": survey.pass_rate, "max_residual": survey.max_residual,
                       "points": len(survey.rows)})

    checks.extend(simulate_checks(red, seed))

    F = _functionals(red.spec)
    scale = float(np.sqrt(np.max(np.diag(pushforward_law(red.model, F).cov))))
    for name, prof in _bounded_profiles(F.shape[0], scale).items():
        for t in (0.5, 1.0):
            c = contraction_check(red.model, lift(prof, F), t)
            checks.append({"check": f"contraction/{name}/t={t:g}", "passed": c.passed,
                           "norm_f": c.norm_f, "norm_pf": c.norm_pf})

    passed = sum(c["passed"] for c in checks)
    return {"builtin": builtin, "seed": seed, "version": __version__, "checks": checks,
            "summary": {"passed": passed, "total": len(checks),
                        "all_passed": passed == len(checks)}}


# ---------------------------------------------------------------------------
# argument parsing


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def parse_lambda(text):
    s = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise ConfigError(f"cannot parse lambda {text!r}; use e.g. -0.5+0.3i") from None


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out-csv", metavar="PATH")
    common.add_argument("--out-json", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--builtin", metavar="NAME")

    p = _Parser(prog="oulab", description="OU spectra on cylinder functions.")
    p.add_argument("--version", action="version", version=f"oulab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("reduce", parents=[common], help="reduce a model and check identities")
    r.add_argument("--model-file", metavar="PATH")
    r.add_argument("--reduction", choices=("auto", "1d", "2d"), default="auto")

    e = sub.add_parser("eigen", parents=[common], help="solve one eigenvalue")
    e.add_argument("--lambda", dest="lam", required=True, metavar="Z")
    e.add_argument("--gamma", type=float)
    e.add_argument("--q", type=float)
    e.add_argument("--a", type=float)
    e.add_argument("--b", type=float)
    e.add_argument("--r", type=float, help="isotropic diffusion R = r I")
    e.add_argument("--times", default="0.1,0.2")
    e.add_argument("--gen-tol", type=float, default=None)

    s = sub.add_parser("survey", parents=[common], help="residual survey over a lambda grid")
    for name in ("re-min", "re-max", "im-min", "im-max", "step", "gen-tol", "semi-tol"):
        s.add_argument(f"--{name}", type=float)
    s.add_argument("--times")
    s.add_argument("--model-file", metavar="PATH")
    s.add_argument("--reduction", choices=("auto", "1d", "2d"))
    s.add_argument("--strict", action="store_true", help="exit 3 unless every row passes")

    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo invariance/pushforward")
    m.add_argument("--paths", type=int, default=100_000)
    m.add_argument("--times", default="0.5,1")

    sub.add_parser("check", parents=[common], help="acceptance checks on a builtin")
    return p


def _survey_config(args):
    cfg = load_config(args.config) if args.config else SurveyConfig()
    over = {}
    for key in ("re_min", "re_max", "im_min", "im_max", "step", "gen_tol", "semi_tol",
                "seed", "jobs", "out_csv", "out_json", "model_file", "reduction", "times"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if args.builtin:
        over["model"] = args.builtin
    return config_from_mapping(over, cfg)


def _cmd_reduce(args, out):
    red = resolve_model(args.builtin or "demo1d", args.model_file or "", args.reduction)
    out.write(f"model: n={red.model.n} m={red.model.m} kind={red.kind}\n")
    spec = red.spec
    if red.kind == "1d":
        out.write(f"Spec1D gamma={fmt_number(spec.gamma)} q={fmt_number(spec.q)}\n")
        reps = [variance_identity_check(spec, red.model)]
    else:
        R = spec.R
        out.write(f"Spec2D a={fmt_number(spec.a)} b={fmt_number(spec.b)} "
                  f"R=[[{fmt_number(R[0, 0])}, {fmt_number(R[0, 1])}], "
                  f"[{fmt_number(R[1, 0])}, {fmt_number(R[1, 1])}]]\n")
        reps = list(rinf_identity_check(spec, red.model))
    for r in reps:
        out.write(f"{r.name}: deviation={fmt_number(r.deviation)} tol={r.tol:g} "
                  f"{'PASS' if r.passed else 'FAIL'}\n")
    if args.out_json:
        write_text(args.out_json, dumps_json({"kind": red.kind,
                                              "identities": [r.as_dict() for r in reps]}))
    return EXIT_OK if all(r.passed for r in reps) else EXIT_ACCEPTANCE


def _eigen_spec(args):
    if args.gamma is not None:
        if args.q is None:
            raise ConfigError("--gamma needs --q")
        return Spec1D(gamma=args.gamma, q=args.q)
    if args.a is not None:
        if args.b is None:
            raise ConfigError("--a needs --b")
        r = 1.0 if args.r is None else args.r
        return Spec2D(a=args.a, b=args.b, R=r * np.eye(2))
    return resolve_model(args.builtin or "demo1d").spec


def _cmd_eigen(args, out):
    spec = _eigen_spec(args)
    lam = parse_lambda(args.lam)
    if not lam.real < 0:
        raise ConfigError("lambda must lie in the open left half-plane")
    kind = _classify(spec)
    gen_tol = args.gen_tol if args.gen_tol is not None else (1e-8 if kind == "1d" else 1e-6)
    times = _coerce("times", args.times)
    cfg = SurveyConfig(gen_tol=gen_tol, times=times, re_max=lam.real)
    _check_times(kind, spec, times)
    row = survey_row((kind, spec, lam, cfg))
    if row["error"] and kind != "2d_general":
        raise _RowFailure(row["error"])
    sign = "" if lam.imag < 0 else "+"
    parts = [f"lambda={fmt_number(lam.real)}{sign}{fmt_number(lam.imag)}i",
             f"gen_residual={fmt_number(row['gen_residual'])}"]
    parts += [f"semi_residual_t{t:g}={fmt_number(row[f'semi_residual_t{k}'])}"
              for k, t in enumerate(times)]
    parts += [f"l1_norm={fmt_number(row['l1_norm'])}",
              f"l2_trunc_ratio={fmt_number(row['l2_trunc_ratio'])}",
              f"pass={fmt_number(row['pass'])}"]
    out.write(" ".join(parts) + "\n")
    if args.out_json:
        write_text(args.out_json, dumps_json({"kind": kind, "row": row}))
    return EXIT_OK if row["pass"] else EXIT_ACCEPTANCE


class _RowFailure(Exception):
    pass


def _cmd_survey(args, out):
    cfg = _survey_config(args)
    report = run_survey(cfg)
    if cfg.out_csv:
        emit_csv(report, cfg.out_csv)
    if cfg.out_json:
        emit_json(report, cfg.out_json)
    s = report.summary()
    rate = "n/a" if s["pass_rate"] is None else f"{s['pass_rate']:.4f}"
    worst = "n/a" if s["max_residual"] is None else fmt_number(s["max_residual"])
    out.write(f"survey: {s['rows']} points, reduction {s['reduction']}, pass_rate {rate}, "
              f"max_residual {worst}\n")
    print(f"runtime {report.runtime:.2f} s", file=sys.stderr)
    if args.strict and report.rows and s["pass_rate"] < 1.0:
        return EXIT_ACCEPTANCE
    return EXIT_OK


def _cmd_simulate(args, out):
    red = resolve_model(args.builtin or "demo1d")
    seed = 0 if args.seed is None else args.seed
    times = _coerce("times", args.times)
    rows = simulate_checks(red, seed, args.paths, times)
    for r in rows:
        out.write(f"{r['check']}: {'PASS' if r['passed'] else 'FAIL'}\n")
    if args.out_json:
        write_text(args.out_json, dumps_json({"builtin": args.builtin or "demo1d",
                                              "seed": seed, "checks": rows}))
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_ACCEPTANCE


def _cmd_check(args, out):
    builtin = args.builtin or "demo1d"
    if builtin not in BUILTINS:
        raise ConfigError(f"unknown builtin '{builtin}'; choose from {', '.join(BUILTINS)}")
    seed = 0 if args.seed is None else args.seed
    rep = run_check(builtin, seed, jobs=args.jobs or 1)
    for c in rep["checks"]:
        out.write(f"{'PASS' if c['passed'] else 'FAIL'}  {c['check']}\n")
    s = rep["summary"]
    out.write(f"{builtin}: {s['passed']}/{s['total']} checks passed\n")
    if args.out_json:
        write_text(args.out_json, dumps_json(rep))
    return EXIT_OK if s["all_passed"] else EXIT_ACCEPTANCE


COMMANDS = {"reduce": _cmd_reduce, "eigen": _cmd_eigen, "survey": _cmd_survey,
            "simulate": _cmd_simulate, "check": _cmd_check}


def cli_main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, StabilityError, DegeneracyError, _RowFailure) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OULabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():  # console entry point
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
