"""Command-line front end.

Subcommands::

    rdrop spectrum   --dim 3 --alpha 1 --gamma 1 --radius 1 --dmax 16 --out s.csv
    rdrop thresholds --dim 3 --gamma 1 --alpha-grid 0.25:1.75:0.25 --out t.csv
    rdrop landscape  --dim 3 --alpha 1 --gamma 1 --m-grid 0.5:10:0.5 --kmax 4 --out l.csv
    rdrop energy     --config two_balls.json --mc-check --seed 7 --pairs 1000000
    rdrop oracle     --dim 3 --alpha 0.5 --radius 1 --degree 2 --seed 7

Exit codes: 0 success, 2 invalid parameters or input, 3 numerical
non-convergence, 4 I/O failure.  Output format follows the extension of
``--out``: ``.json`` mirrors the CSV content, anything else is CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .ballmodel import (Ball, BallConfiguration, configuration_energy,
                        mc_nonlocal_oracle)
from .coefficients import (i_coefficient, mu_closed_form, mu_quadrature_oracle,
                           riesz_coefficients)
from .errors import ConvergenceError, DomainError
from .landscape import landscape_table, sweep_thresholds
from .numerics import SampleStream
from .params import ModelParams
from .stability import (HarmonicPerturbation, mode_eigenvalues,
                        quadratic_form_oracle, quadratic_form_spectral,
                        stability_verdict, zonal_harmonic)

__all__ = ["run", "main", "load_ball_config", "dump_ball_config", "parse_grid",
           "RunConfig", "ConfigError"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4

COMMANDS = ("spectrum", "thresholds", "landscape", "energy", "oracle")


class ConfigError(DomainError):
    """A ball-configuration document violates its schema."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


@dataclass
class RunConfig:
    """Validated command, model parameters and command-specific options."""

    command: str
    params: ModelParams | None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        skip = ("command", "dim", "alpha", "gamma")
        options = {k: v for k, v in vars(ns).items() if k not in skip}
        params = None
        if hasattr(ns, "alpha"):
            params = ModelParams(ns.dim, ns.alpha, ns.gamma)
        elif hasattr(ns, "dim"):
            for a in parse_grid(ns.alpha_grid):
                ModelParams(ns.dim, a, ns.gamma)
        return cls(ns.command, params, options)


def parse_grid(text: str) -> list[float]:
    """Parse ``start:stop:step`` (inclusive, endpoint slack 1e-12) or a single value."""
    parts = text.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise DomainError(f"malformed grid {text!r}; expected start:stop:step") from None
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise DomainError(f"malformed grid {text!r}; expected start:stop:step")
    start, stop, step = values
    if not step > 0 or stop < start:
        raise DomainError(f"grid {text!r} needs step > 0 and stop >= start")
    n = math.floor((stop - start) / step + 1e-12)
    slack = 1e-12 * max(1.0, abs(stop))
    if abs(start + (n + 1) * step - stop) <= slack:
        n += 1
    return [round(start + i * step, 12) for i in range(n + 1)]


def load_ball_config(path) -> BallConfiguration:
    """Read a ``{"dim", "alpha", "gamma", "balls": [{"center", "radius"}]}`` document.

    Raises :class:`ConfigError` naming the first violated constraint,
    :class:`rdrop.errors.OverlapError` for interpenetrating balls and
    :class:`OSError` if the file cannot be read.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    for key in ("dim", "alpha", "balls"):
        if key not in doc:
            raise ConfigError(f"{path}: missing required key {key!r}")
    params = ModelParams(doc["dim"], doc["alpha"], doc.get("gamma", 1.0))
    balls = doc["balls"]
    if not isinstance(balls, list) or not balls:
        raise ConfigError(f"{path}: 'balls' must be a non-empty list")
    parsed = []
    for i, b in enumerate(balls):
        if not isinstance(b, dict) or "center" not in b or "radius" not in b:
            raise ConfigError(f"{path}: ball {i} needs 'center' and 'radius'")
        center = b["center"]
        if not isinstance(center, list) or len(center) != params.N:
            raise ConfigError(f"{path}: ball {i} center must be a list of {params.N} numbers")
        radius = b["radius"]
        if isinstance(radius, bool) or not isinstance(radius, (int, float)) or not radius > 0:
            raise ConfigError(f"{path}: ball {i} radius must be positive, got {radius!r}")
        parsed.append(Ball(tuple(center), float(radius)))
    return BallConfiguration(params, tuple(parsed))


def dump_ball_config(config: BallConfiguration, path) -> None:
    doc = dict(config.params.as_dict())
    doc["balls"] = [{"center": list(b.center), "radius": b.radius} for b in config.balls]
    _atomic_write(path, json.dumps(doc, indent=2) + "\n")


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def _header(params_desc: dict, argv: Sequence[str]) -> dict:
    return {"tool": f"rdrop {__version__}", "params": params_desc, "argv": list(argv)}


def _write_table(path, header: dict, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = {"header": header, "columns": list(columns),
               "rows": [[_jsonable(v) for v in r] for r in rows]}
        _atomic_write(path, json.dumps(doc, indent=2, allow_nan=False) + "\n")
        return
    params = " ".join(f"{k}={_fmt(v)}" for k, v in header["params"].items())
    lines = [f"# {header['tool']}", f"# params: {params}",
             "# argv: " + " ".join(header["argv"]), ",".join(columns)]
    lines += [",".join(_fmt(v) for v in r) for r in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def _add_params(p, alpha=True):
    p.add_argument("--dim", type=int, required=True, help="space dimension N >= 2")
    if alpha:
        p.add_argument("--alpha", type=float, required=True, help="Riesz exponent in (0, N-1)")
    p.add_argument("--gamma", type=float, default=1.0, help="coupling constant (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rdrop", description="Stability and energy landscape of the "
                     "Riesz liquid-drop functional P(E) + gamma * int int |x-y|^-alpha.")
    parser.add_argument("--version", action="version", version=f"rdrop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="mode eigenvalues lambda_d(R) of the ball")
    _add_params(p)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--dmax", type=int, default=16, help="highest degree listed (default 16)")
    p.add_argument("--out", help="CSV (d,mu_d,lambda_d) or .json output")
    p.add_argument("--report", help="write the stability report as JSON")

    p = sub.add_parser("thresholds", help="d_A, d_I, R_bar, m_loc, m_glob bound over an alpha grid")
    _add_params(p, alpha=False)
    p.add_argument("--alpha-grid", required=True, help="start:stop:step")
    p.add_argument("--out")

    p = sub.add_parser("landscape", help="optimal ball splits f_k(m) on a mass grid")
    _add_params(p)
    p.add_argument("--m-grid", required=True, help="start:stop:step")
    p.add_argument("--kmax", type=int, default=4)
    p.add_argument("--out")

    p = sub.add_parser("energy", help="energy of a ball configuration from a JSON file")
    p.add_argument("--config", required=True)
    p.add_argument("--mc-check", action="store_true", help="compare with pair Monte Carlo")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=1_000_000)
    p.add_argument("--out", help="JSON output")

    p = sub.add_parser("oracle", help="cross-check coefficients and the quadratic form "
                       "against independent oracles")
    _add_params(p)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2, help="zonal perturbation degree (N=3)")
    p.add_argument("--dmax", type=int, default=10, help="highest mu_d checked by quadrature")
    p.add_argument("--grid", type=int, default=24, help="latitudes of the T1 grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=2_000_000)
    p.add_argument("--out")
    return parser


def _params(ns) -> ModelParams:
    return ModelParams(ns.dim, ns.alpha, ns.gamma)


def _cmd_spectrum(ns, argv, out):
    params = _params(ns)
    if ns.radius <= 0:
        raise DomainError("--radius must be positive")
    if ns.dmax < 2:
        raise DomainError("--dmax must be >= 2")
    coeffs = riesz_coefficients(params, d_max=max(64, ns.dmax), self_energy=False)
    lam = mode_eigenvalues(params, coeffs, ns.radius, 2, ns.dmax)
    mu = coeffs.mu_range(2, ns.dmax)
    rows = [(d, float(mu[d - 2]), float(lam[d - 2])) for d in range(2, ns.dmax + 1)]
    report = stability_verdict(params, coeffs, ns.radius)
    if ns.out:
        desc = dict(params.as_dict(), radius=ns.radius, dmax=ns.dmax)
        _write_table(ns.out, _header(desc, argv), ("d", "mu_d", "lambda_d"), rows)
    if ns.report:
        _atomic_write(ns.report, json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"R = {ns.radius!r}  R_bar = {report.R_bar:.10g}  m_loc = {report.m_loc:.10g}", file=out)
    print(f"d_A = {report.d_A}  d_I = {report.d_I}  truncation degree = "
          f"{report.truncation_degree}", file=out)
    print(f"min eigenvalue {report.min_eigenvalue:.6g} at d = {report.min_degree}; "
          f"verdict: {report.verdict.value}", file=out)


def _cmd_thresholds(ns, argv, out):
    template = ModelParams(ns.dim, 0.5 * (ns.dim - 1), ns.gamma)
    grid = parse_grid(ns.alpha_grid)
    rows = sweep_thresholds(template, grid, ns.gamma)
    cols = ("alpha", "d_A", "d_I", "R_bar", "m_loc", "m_glob_upper")
    table = [tuple(r[:6]) for r in rows]
    if ns.out:
        desc = {"dim": ns.dim, "gamma": ns.gamma, "alpha_grid": ns.alpha_grid}
        _write_table(ns.out, _header(desc, argv), cols, table)
    print("  ".join(f"{c:>12}" for c in cols), file=out)
    for r in rows:
        print("  ".join(f"{_fmt_short(v):>12}" for v in r[:6])
              + (f"  [{r.error}]" if r.error else ""), file=out)
    failed = [r for r in rows if r.error]
    if failed:
        raise ConvergenceError(f"{len(failed)} of {len(rows)} rows failed")


def _fmt_short(v):
    return f"{v:.8g}" if isinstance(v, float) else str(v)


def _cmd_landscape(ns, argv, out):
    params = _params(ns)
    grid = parse_grid(ns.m_grid)
    if ns.kmax < 1:
        raise DomainError("--kmax must be >= 1")
    coeffs = riesz_coefficients(params, d_max=8)
    table = landscape_table(params, coeffs, grid, ns.kmax)
    rows = [(r.m, r.best_k, r.value, r.masses) for r in table.grid]
    if ns.out:
        desc = dict(params.as_dict(), m_grid=ns.m_grid, kmax=ns.kmax,
                    two_ball_crossing=table.breakpoints[0] if table.breakpoints else None,
                    breakpoints=list(table.breakpoints), m_glob_upper=table.mglob_upper,
                    label=table.label)
        _write_table(ns.out, _header(desc, argv), ("m", "best_k", "f_value", "masses"), rows)
    print(f"{table.label}: {len(rows)} masses, k <= {ns.kmax}", file=out)
    bp = ", ".join(f"{b:.10g}" for b in table.breakpoints) or "none below the grid maximum"
    print(f"breakpoints: {bp}", file=out)
    print(f"m_glob upper bound: {table.mglob_upper:.10g}", file=out)


def _cmd_energy(ns, argv, out):
    config = load_ball_config(ns.config)
    params = config.params
    coeffs = riesz_coefficients(params, d_max=8)
    energy = configuration_energy(config, coeffs)
    doc = {"header": _header(params.as_dict(), argv), "balls": len(config.balls),
           "volume": config.volume, "quadrature": energy.as_dict()}
    print(f"{len(config.balls)} balls, volume {config.volume:.10g}", file=out)
    print(f"perimeter {energy.perimeter:.12g}  nonlocal {energy.nonlocal_:.12g}  "
          f"total {energy.total:.12g}", file=out)
    if ns.mc_check:
        if ns.pairs < 2:
            raise DomainError("--pairs must be >= 2")
        mc = mc_nonlocal_oracle(config, SampleStream(ns.seed), ns.pairs)
        total = energy.perimeter + params.gamma * mc.estimate
        agrees = abs(mc.estimate - energy.nonlocal_) <= 4.0 * mc.std_error
        doc["monte_carlo"] = {"nonlocal": mc.estimate, "std_error": mc.std_error,
                              "total": total, "seed": ns.seed, "pairs": ns.pairs,
                              "variance_warning": mc.variance_warning, "agrees_4sigma": agrees}
        print(f"monte carlo nonlocal {mc.estimate:.8g} +- {mc.std_error:.2g}  "
              f"total {total:.10g}  agreement: {'yes' if agrees else 'NO'}", file=out)
    if ns.out:
        _atomic_write(ns.out, json.dumps(doc, indent=2) + "\n")


def _cmd_oracle(ns, argv, out):
    params = _params(ns)
    coeffs = riesz_coefficients(params, d_max=max(64, ns.dmax), self_energy=False)
    rows = []

    def check(name, value, reference, tol, err=None):
        gap = abs(value - reference)
        bound = max(tol * abs(reference), err) if err is not None else tol * abs(reference)
        rows.append((name, float(value), float(reference), gap, bound, gap <= bound))

    for d in range(0, ns.dmax + 1):
        check(f"mu_{d}", mu_quadrature_oracle(params, d), mu_closed_form(params, d), 1e-6)
    check("alpha*I", params.alpha * i_coefficient(params), coeffs.mu_at(1), 1e-7)
    if params.N == 3:
        d = ns.degree
        if d < 1:
            raise DomainError("--degree must be >= 1")
        est = quadratic_form_oracle(params, coeffs, ns.radius, zonal_harmonic(3, d), ns.grid,
                                    SampleStream(ns.seed), ns.pairs)
        if d >= 2:
            ref = quadratic_form_spectral(params, coeffs, ns.radius,
                                          HarmonicPerturbation(3, {(d, 1): 1.0}))
        else:
            ref = 0.0
        scale = abs(ref) if d >= 2 else abs(est.t1) + abs(est.t2) + abs(est.t3)
        gap = abs(est.value - ref)
        bound = max(est.tolerance * scale, 4.0 * est.std_error)
        rows.append((f"Q[Y_{d}]", est.value, ref, gap, bound, gap <= bound))
    if ns.out:
        desc = dict(params.as_dict(), radius=ns.radius, degree=ns.degree, grid=ns.grid,
                    seed=ns.seed, pairs=ns.pairs)
        _write_table(ns.out, _header(desc, argv),
                     ("check", "value", "reference", "gap", "bound", "agrees"), rows)
    for name, value, ref, gap, bound, ok in rows:
        print(f"{name:>10}  {value:.12g}  ref {ref:.12g}  gap {gap:.2e} <= {bound:.2e}: "
              f"{'ok' if ok else 'FAIL'}", file=out)
    if not all(r[-1] for r in rows):
        raise ConvergenceError("an oracle disagrees with the primary computation")


_HANDLERS = {"spectrum": _cmd_spectrum, "thresholds": _cmd_thresholds,
             "landscape": _cmd_landscape, "energy": _cmd_energy, "oracle": _cmd_oracle}


def run(argv: Sequence[str] | None = None, out=None) -> int:
    """Execute one command and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    try:
        ns = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"rdrop: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        RunConfig.from_namespace(ns)
        _HANDLERS[ns.command](ns, argv, out)
    except DomainError as exc:
        print(f"rdrop: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"rdrop: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"rdrop: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
