"""Command-line front end.

    exterior-expansion radial   --config cfg.json [--out table.csv] [--format csv|json]
    exterior-expansion expand   --config cfg.json
    exterior-expansion verify   --config cfg.json [--tolerance-scale 2]
    exterior-expansion theorem2 --config cfg.json

A config holds one parameter point, or a ``"sweep"`` list of overrides that
are run in a worker pool (``--jobs``) and written to ``<out stem>.<i><ext>``.

Exit codes: 0 pass, 1 verification failed, 2 invalid input, 3 numerical failure.
Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import (
    ContractError,
    ConvexityError,
    CriticalPointError,
    DomainError,
    ExpansionError,
    NoSolutionError,
    NotDecayingError,
    NumericalError,
    SingularityError,
)
from .operator_family import make_operator
from .radial_solver import branch_catalog, build_first_integral, build_solution, default_branch

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("radial", "expand", "verify", "theorem2")

_INPUT_ERRORS = (DomainError, ContractError, NoSolutionError, ConvexityError, NotDecayingError,
                 CriticalPointError)
_NUMERIC_ERRORS = (NumericalError, SingularityError)


class ConfigError(ExpansionError):
    code = "invalid_config"


@dataclass
class JobConfig:
    command: str
    tau: float
    n: int
    C0: float
    c: float = 0.0
    c0: float = 0.0
    branch: int | None = None
    J: int = 3
    r_range: tuple = (2.0, 1e4)
    num: int = 50
    r_min: float = 1.25
    output_path: str | None = None
    format: str = "csv"
    perturb: dict | None = None
    sweep: list = field(default_factory=list)


_PI_EXPR = re.compile(r"^\s*(?P<num>[-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?\s*$")


def parse_real(value, name: str) -> float:
    """A real number, or a string like ``"pi/6"`` or ``"3*pi/8"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        m = _PI_EXPR.match(value)
        if m:
            num = m.group("num")
            k = 1.0 if num in ("", "+") else -1.0 if num == "-" else float(num)
            x = k * math.pi / float(m.group("den") or 1.0)
        else:
            try:
                x = float(value)
            except ValueError:
                raise ConfigError(f"{name}: cannot parse {value!r} as a real number") from None
    else:
        raise ConfigError(f"{name}: expected a number, got {type(value).__name__}")
    if not math.isfinite(x):
        raise ConfigError(f"{name}: must be finite")
    return x


def parse_config(raw: dict, command: str | None = None) -> JobConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(JobConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cmd = command or raw.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {cmd!r}")
    if raw.get("command") not in (None, cmd):
        raise ConfigError(f"config is for {raw['command']!r}, not {cmd!r}")
    for key in ("tau", "n", "C0"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    n = raw["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 3:
        raise ConfigError("n must be an integer >= 3")
    rr = raw.get("r_range", (2.0, 1e4))
    if not (isinstance(rr, (list, tuple)) and len(rr) == 2):
        raise ConfigError("r_range must be a pair")
    r_range = (parse_real(rr[0], "r_range[0]"), parse_real(rr[1], "r_range[1]"))
    fmt = raw.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    J = raw.get("J", 3)
    if isinstance(J, bool) or not isinstance(J, int) or J < 1:
        raise ConfigError("J must be a positive integer")
    num = raw.get("num", 50)
    if isinstance(num, bool) or not isinstance(num, int) or num < 2:
        raise ConfigError("num must be an integer >= 2")
    branch = raw.get("branch")
    if branch is not None and (isinstance(branch, bool) or not isinstance(branch, int)):
        raise ConfigError("branch must be an integer")
    sweep = raw.get("sweep", [])
    if not isinstance(sweep, list) or not all(isinstance(s, dict) for s in sweep):
        raise ConfigError("sweep must be a list of objects")
    cfg = JobConfig(
        command=cmd,
        tau=parse_real(raw["tau"], "tau"),
        n=n,
        C0=parse_real(raw["C0"], "C0"),
        c=parse_real(raw.get("c", 0.0), "c"),
        c0=parse_real(raw.get("c0", 0.0), "c0"),
        branch=branch,
        J=J,
        r_range=r_range,
        num=num,
        r_min=parse_real(raw.get("r_min", 1.25), "r_min"),
        output_path=raw.get("output_path"),
        format=fmt,
        perturb=raw.get("perturb"),
        sweep=sweep,
    )
    lo, hi = cfg.r_range
    if not (cfg.r_min <= lo < hi):
        raise ConfigError(f"r_range must satisfy r_min <= r_lo < r_hi, got {list(cfg.r_range)}")
    return cfg


def _solution(cfg: JobConfig):
    op = make_operator(cfg.tau, cfg.n, cfg.C0)
    fi = build_first_integral(op)
    if cfg.branch is None:
        br = default_branch(fi)
    else:
        found = [b for b in branch_catalog(fi) if b.p == cfg.branch]
        if not found:
            raise DomainError(f"branch p={cfg.branch} does not exist for this operator")
        br = found[0]
    return op, build_solution(br, op, cfg.c, cfg.c0, r_min=cfg.r_min)


def _meta(cfg: JobConfig, op) -> dict:
    return {"command": cfg.command, "tau": cfg.tau, "n": cfg.n, "C0": cfg.C0, "c": cfg.c,
            "c0": cfg.c0, "case": op.case.value}


# ---------------------------------------------------------------------------------------
# commands: each returns (payload dict, table columns, table rows, passed)


def cmd_radial(cfg: JobConfig, tolerance_scale: float = 1.0):
    op, sol = _solution(cfg)
    r = np.geomspace(cfg.r_range[0], cfg.r_range[1], cfg.num)
    cols = ["r", "u", "u_prime", "u_second", "W", "first_integral_check"]
    data = [r, sol.u(r), sol.du(r), sol.d2u(r), sol.W(r), sol.first_integral_check(r)]
    rows = [list(map(float, row)) for row in zip(*data)]
    worst = float(np.max(data[-1])) if len(r) else 0.0
    payload = {"meta": _meta(cfg, op), "branch": sol.branch.p, "c2": sol.c2,
               "first_integral_max": worst}
    return payload, cols, rows, worst <= 1e-9 * tolerance_scale


def cmd_expand(cfg: JobConfig, tolerance_scale: float = 1.0):
    from .verification import remainder_slopes

    op, sol = _solution(cfg)
    ex = sol.expansion(cfg.J)
    cols = ["quantity", "j", "value", "expected"]
    rows = [["c2", 2, float(ex.c2), ""], ["c0", 0, float(ex.c0), ""]]
    for j, cj in enumerate(ex.tail_coeffs, start=1):
        rows.append(["c_minus", j, float(cj), ""])
    slopes = []
    ok = True
    if cfg.c != 0.0:
        slopes = remainder_slopes(sol, tuple(range(1, cfg.J + 1)), r_lo=max(1e2, cfg.r_range[0]),
                                  r_hi=max(1e4, cfg.r_range[1]), perturb=cfg.perturb)
        for row in slopes:
            rows.append(["remainder_slope", row["J"], row["slope"], row["expected"]])
            ok &= abs(row["slope"] - row["expected"]) <= 0.1 * tolerance_scale
    payload = {"meta": _meta(cfg, op), "c2": ex.c2, "c0": ex.c0,
               "tail_coefficients": [float(x) for x in ex.tail_coeffs], "remainder_slopes": slopes,
               "pass": bool(ok)}
    return payload, cols, rows, bool(ok)


def cmd_verify(cfg: JobConfig, tolerance_scale: float = 1.0):
    from .verification import run_suite

    op, sol = _solution(cfg)
    res = run_suite(sol, tolerance_scale=tolerance_scale, perturb=cfg.perturb)
    payload = {"meta": _meta(cfg, op), **res.as_dict()}
    cols = ["check", "value", "tolerance", "pass"]
    rows = [[c.name, float(c.value), float(c.tolerance), int(c.passed)] for c in res.checks]
    return payload, cols, rows, res.passed


def cmd_theorem2(cfg: JobConfig, tolerance_scale: float = 1.0):
    from .verification import asymptotic_decomposition

    op, sol = _solution(cfg)
    rep = asymptotic_decomposition(sol, amp_tol=1e-5 * tolerance_scale)
    payload = {"meta": _meta(cfg, op), **rep.as_dict()}
    cols = ["quantity", "k", "m", "value"]
    rows = [["c0", "", "", float(rep.c0)]]
    for (k, m), v in sorted(rep.coefficients.items()):
        rows.append(["coefficient", k, m, float(v)])
    rows += [["expected_amplitude", 0, 0, float(rep.expected_amplitude)],
             ["amplitude_error", "", "", float(rep.amplitude_error)],
             ["remainder_slope", "", "", float(rep.remainder_slope)]]
    return payload, cols, rows, rep.passed


HANDLERS = {"radial": cmd_radial, "expand": cmd_expand, "verify": cmd_verify, "theorem2": cmd_theorem2}


# ---------------------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def render_csv(cols, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return obj


def render_json(payload) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def error_object(exc: BaseException, exit_code: int) -> dict:
    code = getattr(exc, "code", None) or type(exc).__name__
    obj = {"error": {"type": type(exc).__name__, "code": code, "message": str(exc)},
           "exit_code": exit_code}
    for attr in ("bound", "radius"):
        val = getattr(exc, attr, None)
        if val is not None:
            obj["error"][attr] = val
    return obj


def classify_exception(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError,) + _INPUT_ERRORS):
        return EXIT_INPUT
    if isinstance(exc, _NUMERIC_ERRORS):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, TypeError, KeyError)):
        return EXIT_INPUT
    return EXIT_NUMERIC


def run_job(cfg: JobConfig, fmt: str, tolerance_scale: float):
    """Run one job; returns (text, passed, error object or None, exit code)."""
    try:
        with np.errstate(all="ignore"):
            payload, cols, rows, passed = HANDLERS[cfg.command](cfg, tolerance_scale)
    except Exception as exc:  # surfaced as a machine-readable error
        code = classify_exception(exc)
        return None, False, error_object(exc, code), code
    text = render_csv(cols, rows) if fmt == "csv" else render_json({**payload, "pass": bool(passed)})
    return text, passed, None, EXIT_OK if passed else EXIT_FAILED


def _job_entry(args):
    raw, command, fmt, scale = args
    try:
        cfg = parse_config(raw, command)
    except Exception as exc:
        return None, False, error_object(exc, EXIT_INPUT), EXIT_INPUT
    return run_job(cfg, fmt, scale)


def _sweep_path(out: str | None, i: int, fmt: str) -> str | None:
    if out is None:
        return None
    stem, ext = os.path.splitext(out)
    return f"{stem}.{i}{ext or '.' + fmt}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exterior-expansion",
                                description="Radial solutions and expansions at infinity for the F_tau family.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default from config, else csv)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every tolerance")
    return p


def _fail(obj: dict, code: int) -> int:
    sys.stderr.write(json.dumps(_clean(obj), sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail({"error": {"type": "UsageError", "code": "usage", "message": "invalid arguments"},
                      "exit_code": EXIT_INPUT}, EXIT_INPUT)
    if not (args.tolerance_scale > 0 and math.isfinite(args.tolerance_scale)):
        return _fail(error_object(ConfigError("--tolerance-scale must be positive"), EXIT_INPUT), EXIT_INPUT)
    if args.jobs < 1:
        return _fail(error_object(ConfigError("--jobs must be >= 1"), EXIT_INPUT), EXIT_INPUT)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        base = parse_config(raw, args.command)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(error_object(ConfigError(f"cannot read config: {exc}"), EXIT_INPUT), EXIT_INPUT)
    except Exception as exc:
        code = classify_exception(exc)
        return _fail(error_object(exc, code), code)

    fmt = args.format or base.format
    out = args.out or base.output_path
    if not base.sweep:
        text, passed, err, code = run_job(base, fmt, args.tolerance_scale)
        if err is not None:
            return _fail(err, code)
        if out:
            write_atomic(out, text)
        else:
            sys.stdout.write(text)
        return code

    items = []
    for override in base.sweep:
        merged = {k: v for k, v in raw.items() if k != "sweep"}
        merged.update(override)
        items.append((merged, args.command, fmt, args.tolerance_scale))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_job_entry, items))
    else:
        results = [_job_entry(it) for it in items]
    summary = []
    worst = EXIT_OK
    for i, (text, passed, err, code) in enumerate(results):
        path = _sweep_path(out, i, fmt)
        if err is None and path:
            write_atomic(path, text)
        elif err is None:
            sys.stdout.write(text)
        summary.append({"job": i, "exit_code": code, "output": path, "error": err["error"] if err else None})
        worst = max(worst, code)
    sys.stderr.write(json.dumps(_clean({"sweep": summary}), sort_keys=True) + "\n")
    return worst


if __name__ == "__main__":
    sys.exit(main())
