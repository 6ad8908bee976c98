"""Batch experiment runner.

    gradedwave COMMAND --config FILE [--out DIR] [--threads N] [--seed U64]
               [--tolerance-scale F]

Commands: coeff, solve, mollify-verify, sweep, fit, spectral, suite.  The
config is a flat ``key = value`` file, see README for the grammar.  Results
are written once, atomically, into the output directory; checks print one
``PASS|FAIL name measured bound`` line each.  Exit status: 0 when every
check passes, 1 when one fails, 2 for a malformed config, 3 for a numerical
fault.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import re
import sys
import tempfile
import traceback
from pathlib import Path

import numpy as np

from . import checks
from . import coefficients as co
from . import growth_fit as gf
from . import mollify as mo
from . import ode_energy as oe
from . import spectral as sp
from .errors import ConfigError, DegenerateTransform, DomainError, InsufficientData, InvalidParameter

COMMANDS = ("coeff", "solve", "mollify-verify", "sweep", "fit", "spectral", "suite")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2, 3

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_PI = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi(?:\s*/\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))?$")


def _float(text):
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI.match(text.strip())
    if not m:
        raise ValueError(f"not a number: {text!r}")
    value = math.pi * (float(m.group(1)) if m.group(1) else 1.0)
    return value / float(m.group(2)) if m.group(2) else value


def _int(text):
    return int(text, 0)


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _complex(text):
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        return complex(_float(text))


def _auto_or_float(text):
    return "auto" if text == "auto" else _float(text)


def _list(kind):
    def parse(text):
        items = [x.strip() for x in text.split(",")]
        if any(not x for x in items):
            raise ValueError("empty list item")
        return [kind(x) for x in items]
    return parse


def _word(choices):
    def parse(text):
        if text not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}, got {text!r}")
        return text
    return parse


SCHEMA = {
    "command": _word(COMMANDS),
    # profile
    "profile": _word(tuple(co.PROFILE_MAKERS)),
    "T": _float, "c": _float, "a0": _float, "amplitude": _float, "freq": _float,
    "alpha": _float, "amp": _float, "base": _int, "omega": _float, "l": _int,
    # coeff
    "samples": _int, "grid_size": _int,
    # solve
    "beta": _float, "v0": _complex, "v1": _complex, "steps_per_period": _int,
    "eps": _float, "s": _float, "K": _auto_or_float, "variant": _word(("plain", "shifted")),
    # mollify-verify
    "eps_grid": _list(_float), "t_grid_size": _int,
    # sweep / fit
    "betas": _list(_float), "beta_exp_range": _list(_int), "k_min_s": _float,
    "case_tag": _word(co.CASE_TAGS), "tolerance": _float, "input": str,
    # spectral
    "n": _int, "cells": _int, "m_max": _int, "lambda_lo": _float, "lambda_ratio": _float,
    "nu": _float, "refine": _int, "refine_check": _bool, "data": _word(("sobolev", "gevrey")),
    "delta": _float, "A": _float, "data_A": _float, "k_max": _int,
    # run control
    "seed": _int, "threads": _int, "tolerance_scale": _float, "out": str,
    "criteria": _list(str),
}


def parse_config(text: str) -> dict:
    """Parse the flat config dialect; errors carry the 1-based line number."""
    config = {}
    lines = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"bad key {key!r}", number)
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", number)
        if key in config:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", number)
        if not value:
            raise ConfigError(f"missing value for {key!r}", number)
        try:
            config[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", number) from None
        lines[key] = number
    config["_lines"] = lines
    return config


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _need(config, key):
    if key not in config:
        raise ConfigError(f"missing key {key!r} for command {config.get('command')!r}")
    return config[key]


def _profile(config) -> co.CoefficientProfile:
    record = {k: v for k, v in config.items() if k in ("profile", "T", "c", "a0", "amplitude", "freq",
                                                        "alpha", "amp", "base", "omega", "l")}
    _need(config, "profile")
    try:
        return co.profile_from_record(record)
    except InvalidParameter as exc:
        raise ConfigError(str(exc), config["_lines"].get("profile")) from None


def _betas(config):
    if "betas" in config:
        return config["betas"]
    lo, hi = config.get("beta_exp_range", [4, 14])
    return gf.geometric_betas(lo, hi)


# --- text outputs ----------------------------------------------------------

def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def record_text(record: dict) -> str:
    """A flat report in the same key = value dialect as the config; blank fields are left out."""
    out = []
    for key, value in record.items():
        if value is None or value == "":
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"


def columns_text(*cols) -> str:
    """Whitespace-separated numeric columns for plotting tools."""
    return "".join(" ".join(repr(float(c[i])) for c in cols) + "\n" for i in range(len(cols[0])))


def write_outputs(out_dir, files: dict):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, out_dir / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


# --- commands --------------------------------------------------------------

def _check(name, measured, bound, passed):
    return checks.CheckResult(name, float(measured), bound, bool(passed))


def cmd_coeff(config, opts):
    p = _profile(config)
    n = config.get("samples", 1000)
    t = np.linspace(0.0, p.T, n + 1)
    a = p.eval(t)
    files = {"coeff.csv": csv_text(["t", "a"], [[repr(float(x)), repr(float(y))] for x, y in zip(t, a)]),
             "coeff.dat": columns_text(t, a)}
    results = []
    record = {"case_tag": p.case_tag, **p.to_record(), "stored_seminorm": p.seminorm, "a_min_sampled": float(a.min())}
    order = p.alpha if p.alpha is not None else 1.0
    if "grid_size" in config:
        est = co.estimate_hoelder_seminorm(p, order, config["grid_size"])
        record["estimated_seminorm"] = est
        results.append(checks._le("coeff.seminorm_estimate", est, p.seminorm * (1.0 + 1e-6)))
    results.append(checks._ge("coeff.a_min_minus_a0", float(a.min()) - p.a0, 0.0))
    files["coeff_report.txt"] = record_text(record)
    return files, results


def cmd_solve(config, opts):
    p = _profile(config)
    beta = _need(config, "beta")
    spp = config.get("steps_per_period", 64)
    traj = oe.solve(p, beta, config.get("v0", 1.0), config.get("v1", 0.0), spp)
    extra = {"E_sym": oe.symmetrizer_energy(traj, p)}
    record = {"beta": beta, "steps": traj.steps, "steps_per_period": spp}
    if "eps" in config:
        extra["E_quasi"] = oe.quasi_energy(traj, p, config["eps"])
    if "s" in config:
        eps = config.get("eps", min(1.0, 1.0 / beta))
        pair = mo.regularized_pair(p, eps, config.get("variant", "plain"), config.get("alpha"))
        K = config.get("K", "auto")
        K = oe.minimal_decay_rate(p, pair, beta, config["s"]) + 1e-6 if K == "auto" else K
        extra["W2"] = oe.transformed_energy(traj, pair, config["s"], K)
        record.update({"s": config["s"], "K": K, "pair_eps": eps})
    cols = oe.trajectory_table(traj, extra)
    header = list(cols)
    rows = [[repr(float(cols[h][i])) for h in header] for i in range(len(traj))]
    energy = cols["E_base"]
    record.update({"v_T": repr(complex(traj.v[-1])), "dv_T": repr(complex(traj.dv[-1])),
                   "e_ratio": float(energy.max() / energy[0])})
    files = {"trajectory.csv": csv_text(header, rows), "energy.dat": columns_text(traj.t, energy),
             "solve_report.txt": record_text(record)}
    return files, []


def cmd_mollify_verify(config, opts):
    p = _profile(config)
    eps = config.get("eps_grid", [2.0 ** -k for k in range(3, 10)])
    rep = mo.verify_mollification_bounds(p, eps, config.get("t_grid_size", 4096), config.get("alpha"),
                                         0.15 * opts.tolerance_scale)
    files = {"bounds.txt": record_text(rep.to_record()),
             "bounds.csv": csv_text(["eps", "err1", "err2", "deriv"],
                                    [[repr(e), repr(a), repr(b), repr(c)]
                                     for e, a, b, c in zip(rep.eps, rep.err1, rep.err2, rep.deriv)]),
             "bounds.dat": columns_text(rep.eps, rep.err2, rep.deriv)}
    results = [_check("mollify.exponents", 0.0 if rep.exact else max(
        abs(rep.exponent1 - rep.alpha), abs(rep.exponent2 - rep.alpha),
        abs(rep.exponent_deriv - rep.alpha + 1.0)), f"<={rep.tolerance:g}", rep.exponents_pass)]
    if rep.det_ratio_min is not None:
        results.append(checks._ge("mollify.shifted_det_over_eps_alpha", rep.det_ratio_min, 1.0))
    return files, results



def cmd_sweep(config, opts):
    p = _profile(config)
    v0, v1 = config.get("v0"), config.get("v1")
    if (v0 is None) != (v1 is None):
        raise ConfigError("give both v0 and v1, or neither (worst case over all data)")
    records = gf.beta_sweep(p, _betas(config), v0, v1, config.get("steps_per_period", 64),
                            opts.threads, config.get("k_min_s"))
    header, rows = checks._sweep_rows(records)
    files = {"sweep.csv": csv_text(header, rows),
             "sweep.dat": columns_text([r.beta for r in records], [r.e_ratio for r in records])}
    return files, []


def read_sweep_csv(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"beta", "e_ratio"} <= set(reader.fieldnames):
                raise ConfigError(f"{path}: sweep CSV needs columns beta and e_ratio")
            out = []
            for row_no, row in enumerate(reader, start=2):
                try:
                    k = row.get("k_min") or None
                    out.append(gf.SweepRecord(float(row["beta"]), float(row["e_ratio"]),
                                              None if k is None else float(k),
                                              float(row.get("wall_time") or 0.0)))
                except ValueError as exc:
                    raise ConfigError(f"{path}: {exc}", row_no) from None
            return out
    except OSError as exc:
        raise ConfigError(f"cannot read sweep CSV {path}: {exc.strerror}") from None


def cmd_fit(config, opts):
    if "input" in config:
        path = Path(config["input"])
        if not path.is_absolute() and opts.config_dir is not None:
            path = opts.config_dir / path
        records = read_sweep_csv(path)
    else:
        records = gf.beta_sweep(_profile(config), _betas(config), threads=opts.threads)
    tag = _need(config, "case_tag")
    v = gf.verdict(records, tag, config.get("alpha"), config.get("l"),
                   config.get("tolerance", 0.1) * opts.tolerance_scale)
    files = {"verdict.txt": record_text(v.to_record())}
    return files, [checks._le(f"fit.{tag}", v.fitted_exponent, v.theoretical_bound + v.tolerance)]


def _spectral_field(config, refine_extra=0):
    return sp.heisenberg_preset(cells=config.get("cells", 32), m_max=config.get("m_max", 32),
                                lo=config.get("lambda_lo", 2.0 ** -4),
                                ratio=config.get("lambda_ratio", sp.LADDER_RATIO),
                                n=config.get("n", 1), nu=config.get("nu", 2.0), T=config.get("T", 1.0),
                                refine=config.get("refine", 0) + refine_extra)


def cmd_spectral(config, opts):
    p = _profile(config)
    s = _need(config, "s")
    tag = config.get("case_tag", p.case_tag)
    kind = config.get("data", "sobolev" if tag == "Lip+" else "gevrey")
    if kind == "sobolev":
        data = sp.Sobolev(s, config.get("delta", 3.0))
    else:
        data_A = config.get("data_A", 2.0 * config["A"] if "A" in config else None)
        if data_A is None:
            raise ConfigError("gevrey data needs A or data_A")
        data = sp.Gevrey(s, data_A)
    params = {"threads": opts.threads, "steps_per_period": config.get("steps_per_period", 64)}
    for key in ("A", "l"):
        if key in config:
            params[key] = config[key]
    reports = []
    files = {}
    for extra in ((0, 1) if config.get("refine_check", False) else (0,)):
        fld = sp.synthesize_data(_spectral_field(config, extra), data, opts.seed)
        if extra == 0:
            header, rows = sp.field_table(fld)
            files["field_initial.csv"] = csv_text(header, rows)
            if "k_max" in config:
                files["gevrey_char.txt"] = record_text(sp.gevrey_char_check(fld, s, config["k_max"]).to_record())
        reports.append(sp.wellposedness_report(fld, p, s, tag, params))
        files[f"report_refine{extra}.txt"] = record_text(reports[-1].to_record())
    results = []
    rep = reports[0]
    if tag == "Lip+":
        results.append(checks._le("spectral.c_meas", rep.c_meas,
                                  p.a_max / p.a0 * (1.0 + 0.1 * opts.tolerance_scale)))
    else:
        results.append(_check("spectral.B", rep.B, ">0", rep.B > 0 and rep.finite))
    if len(reports) == 2:
        cmp = sp.compare_refinement(*reports, tolerance=(0.1 if tag == "Lip+" else 0.2) * opts.tolerance_scale)
        files["refinement.txt"] = record_text(cmp.to_record())
        results.append(_check("spectral.refinement", cmp.measured, f"<={cmp.tolerance:g}", cmp.stable))
    return files, results


def cmd_suite(config, opts):
    keys = config.get("criteria", list(checks.CRITERIA))
    unknown = [k for k in keys if k not in checks.CRITERIA]
    if unknown:
        raise ConfigError(f"unknown criteria {unknown}", config["_lines"].get("criteria"))
    checks.warm_up()
    sink = {}
    results = []
    for key in keys:
        for res in checks.run_criterion(key, opts.seed, opts.threads, opts.tolerance_scale, sink):
            print(res.line(), flush=True)
            results.append(res)
    files = {}
    for name, payload in sink.items():
        if isinstance(payload, dict):
            files[name] = record_text(payload)
        else:
            header, rows = payload
            files[name] = csv_text(header, rows)
            if name.startswith(("c2_", "c3_", "c4_", "c5_")):
                files[name[:-4] + ".dat"] = columns_text([float(r[0]) for r in rows], [float(r[1]) for r in rows])
    return files, results


HANDLERS = {
    "coeff": cmd_coeff, "solve": cmd_solve, "mollify-verify": cmd_mollify_verify,
    "sweep": cmd_sweep, "fit": cmd_fit, "spectral": cmd_spectral, "suite": cmd_suite,
}

_FAULTS = (InvalidParameter, DomainError, InsufficientData, DegenerateTransform, ArithmeticError,
           FloatingPointError)


def _fault_module(exc):
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        path = Path(frame.filename)
        if path.parent.name == "gradedwave":
            return path.stem
    return "cli"


def build_parser():
    parser = argparse.ArgumentParser(prog="gradedwave", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("--config", type=Path)
    parser.add_argument("--out", type=Path)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--tolerance-scale", type=float)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else {"_lines": {}}
        command = args.command or config.get("command")
        if command is None:
            raise ConfigError("no command given on the command line or in the config")
        if args.command and config.get("command", command) != command:
            raise ConfigError(f"config is for {config['command']!r}, not {command!r}",
                              config["_lines"].get("command"))
        config["command"] = command
        opts = argparse.Namespace(
            seed=args.seed if args.seed is not None else config.get("seed", 0),
            threads=args.threads if args.threads is not None else config.get("threads", 1),
            tolerance_scale=(args.tolerance_scale if args.tolerance_scale is not None
                             else config.get("tolerance_scale", 1.0)),
            config_dir=args.config.parent if args.config else None,
        )
        if not 0 <= opts.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if opts.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not opts.tolerance_scale > 0:
            raise ConfigError("tolerance scale must be positive")
        out_dir = args.out or Path(config.get("out", "results"))
        files, results = HANDLERS[command](config, opts)
    except ConfigError as exc:
        where = f"{args.config}: " if args.config else ""
        print(f"gradedwave: config error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _FAULTS as exc:
        params = {k: v for k, v in config.items() if k != "_lines"}
        print(f"gradedwave: numerical fault in {_fault_module(exc)}: {exc} (parameters: {params})",
              file=sys.stderr)
        return EXIT_FAULT
    if results:
        summary = "".join(r.line() + "\n" for r in results)
        files["summary.txt"] = summary
        if command != "suite":
            sys.stdout.write(summary)
    write_outputs(out_dir, files)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
