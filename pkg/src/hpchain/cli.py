"""Command-line driver: phase scans, loop scans, audits, oracle comparisons.

Scans write deterministic CSV (schema tag hpchain/1) or JSON; identical
config and seed reproduce files byte for byte (timing column is zeroed
unless --timing is given, which is documented to break byte-equality).
Interrupted scans can be resumed; completed rows are keyed by their
parameters and reused verbatim.

Exit codes: 0 success, 1 usage, 2 numerical failure, 3 identity failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import average, chain, gww, identities, toeplitz

SCHEMA = "hpchain/1"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IDENTITY = 0, 1, 2, 3

_COLUMNS = {
    "fig1": ["N", "L", "a", "T", "value", "error_estimate", "wall_time_ms"],
    "fig2": ["N", "L", "a", "T", "value", "error_estimate", "wall_time_ms"],
    "polyakov": ["N", "L", "a", "T", "P", "P_raw", "planar_ref",
                 "error_estimate", "wall_time_ms"],
    "gww": ["a", "T", "sigma_star", "free_energy", "entropy_density",
            "phase", "wall_time_ms"],
    "nested": ["N", "L", "a", "b", "value", "error_estimate", "wall_time_ms"],
    "complex-temp": ["N", "L", "a", "phi", "value", "error_estimate",
                     "wall_time_ms"],
    "oracle-compare": ["L", "N", "K", "J", "amplitude", "ed", "rel_error",
                       "wall_time_ms"],
}

_KEYS = {
    "fig1": ["N", "a"],
    "fig2": ["N", "a"],
    "polyakov": ["N", "a"],
    "gww": ["a"],
    "nested": ["N", "a", "b"],
    "complex-temp": ["N", "phi"],
    "oracle-compare": ["L", "N", "K", "J"],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; the contract here is 1
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip() != ""]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip() != ""]


# ----------------------------------------------------------------------
# row computations (module level so --jobs can fork them)
# ----------------------------------------------------------------------

def _a_T_pair(task):
    if "a" in task:
        a = float(task["a"])
        return a, gww.T_of_a(a)
    T = float(task["T"])
    return gww.a_of_T(T), T


def _row_seed(base_seed, key_parts):
    tag = "|".join(str(k) for k in key_parts)
    return (int(base_seed) ^ zlib.crc32(tag.encode())) & 0xFFFFFFFF


def _echo_row(command, task, opts):
    a, T = _a_T_pair(task)
    N = int(task["N"])
    L = chain.INFINITE if opts["L"] == "inf" else int(opts["L"])
    profile = opts.get("profile")
    params = average.AverageParams(a, quad_rel_tol=opts["tol"])
    if opts["mc"]:
        f = average.EchoFunction(
            average.sqrt_echo_log_fn(N, L, profile),
            peak=average._echo_peak(N, a))
        seed = _row_seed(opts["seed"], (command, N, a))
        lv, stderr = average.mc_gaussian_average(f, a, opts["mc_samples"], seed)
        value, err = lv.ln_magnitude, stderr
        nodes = opts["mc_samples"]
    else:
        res = average.averaged_echo_full(N, params, L, profile)
        value, err, nodes = res.log_value.ln_magnitude, res.error_estimate, res.nodes
    return {"N": N, "L": opts["L"], "a": a, "T": T,
            "value": value, "error_estimate": err}


def _polyakov_row(command, task, opts):
    a, T = _a_T_pair(task)
    N = int(task["N"])
    p_shift = int(opts["p"])
    spec_L = chain.INFINITE
    params = average.AverageParams(a, quad_rel_tol=opts["tol"])
    den = average.averaged_echo_full(N, params, spec_L)

    inn = chain.psi_impurity(N, spec_L, p_shift)
    out = chain.psi0(N, spec_L)
    spec_of = lambda J: chain.ChainSpec(spec_L, (J,))

    def log_num(J):
        amp = chain.amplitude(spec_of(J), inn, out)
        if amp.sign <= 0:
            return -math.inf
        g1 = chain.amplitude(spec_of(J), chain.psi0(1, spec_L),
                             chain.psi0(1, spec_L))
        return amp.ln_magnitude - g1.ln_magnitude

    f = average.EchoFunction(log_num, peak=average._echo_peak(N, a))
    num = average.gaussian_average_full(f, params)
    ratio = math.exp(num.log_value.ln_magnitude - den.log_value.ln_magnitude)
    return {"N": N, "L": "inf", "a": a, "T": T,
            "P": ratio / N, "P_raw": ratio,
            "planar_ref": gww.planar_polyakov(a),
            "error_estimate": max(num.error_estimate, den.error_estimate)}


def _gww_row(command, task, opts):
    a, T = _a_T_pair(task)
    r = gww.saddle_entropy(a)
    return {"a": a, "T": T, "sigma_star": r.sigma_star,
            "free_energy": r.free_energy,
            "entropy_density": r.entropy_density, "phase": r.phase.value}


def _nested_row(command, task, opts):
    N = int(task["N"])
    a = float(task["a"])
    b = float(task["b"])
    lv = average.nested_average(N, average.NestedParams(a, b, N),
                                quad_rel_tol=opts["tol"])
    return {"N": N, "L": "inf", "a": a, "b": b,
            "value": lv.ln_magnitude, "error_estimate": opts["tol"]}


def _complex_row(command, task, opts):
    N = int(task["N"])
    phi = float(task["phi"])
    a = float(opts["a_modulus"])
    lv = average.complex_temperature_average(
        N, average.AverageParams(a, a_phase=phi, quad_rel_tol=opts["tol"]))
    return {"N": N, "L": "inf", "a": a, "phi": phi,
            "value": lv.ln_magnitude, "error_estimate": opts["tol"]}


def _oracle_row(command, task, opts):
    L, N, K, J = int(task["L"]), int(task["N"]), int(task["K"]), float(task["J"])
    # K >= 2 uses the single-range (decoupling) profile, the free-solvable case
    couplings = (0.0,) * (K - 1) + (J,)
    spec = chain.ChainSpec(L, couplings)
    state = chain.psi0(N, L)
    amp = chain.amplitude(spec, state, state).value()
    ed = chain.ed_oracle_echo(spec, state, state)
    rel = abs(amp - ed) / abs(ed) if ed != 0 else abs(amp - ed)
    return {"L": L, "N": N, "K": K, "J": J,
            "amplitude": amp, "ed": ed, "rel_error": rel}


_ROW_FN = {
    "fig1": _echo_row,
    "fig2": _echo_row,
    "polyakov": _polyakov_row,
    "gww": _gww_row,
    "nested": _nested_row,
    "complex-temp": _complex_row,
    "oracle-compare": _oracle_row,
}


def _row_worker(payload):
    command, task, opts = payload
    t0 = time.perf_counter()
    try:
        row = _ROW_FN[command](command, task, opts)
        failed = False
    except (average.QuadratureError, ArithmeticError) as exc:
        row = dict(task)
        row.update({"value": math.nan,
                    "error_estimate": getattr(exc, "error_estimate", math.nan)
                    or math.nan})
        if command in ("fig1", "fig2", "nested", "complex-temp"):
            a, T = (None, None)
            try:
                a, T = _a_T_pair(task)
                row.setdefault("a", a)
                row.setdefault("T", T)
            except Exception:
                pass
        row.setdefault("L", opts.get("L", "inf"))
        failed = True
    ms = int(round(1000.0 * (time.perf_counter() - t0)))
    row["wall_time_ms"] = ms if opts.get("timing") else 0
    return row, failed


# ----------------------------------------------------------------------
# output handling
# ----------------------------------------------------------------------

def _render_csv(mode, columns, rows):
    lines = [f"#schema={SCHEMA}", f"#mode={mode}",
             f"#columns={','.join(columns)}", ",".join(columns)]
    for r in rows:
        lines.append(",".join(_fmt(r.get(c, "")) for c in columns))
    return "\n".join(lines) + "\n"


def _render_json(mode, columns, rows):
    payload = {"schema": SCHEMA, "mode": mode, "columns": columns,
               "rows": [{c: _fmt(r.get(c, "")) for c in columns} for r in rows]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _read_existing(path, mode, columns):
    """Completed rows of a previous run, keyed for resumption."""
    rows = {}
    try:
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError:
        return rows
    header = None
    for ln in lines:
        if ln.startswith("#") or not ln.strip():
            continue
        if header is None:
            header = ln.split(",")
            continue
        vals = ln.split(",")
        if len(vals) != len(header):
            continue
        row = dict(zip(header, vals))
        if row.get("value", "") == "nan":
            continue
        key = tuple(row.get(k, "") for k in _KEYS[mode])
        rows[key] = row
    return rows


def _run_scan(command, tasks, opts, args):
    columns = _COLUMNS[command]
    keys = _KEYS[command]
    existing = {}
    if args.resume and args.out and os.path.exists(args.out):
        existing = _read_existing(args.out, command, columns)

    results = []
    any_failed = False
    pending = []
    for task in tasks:
        key = tuple(_fmt(_precompute_key_value(command, task, k))
                    for k in keys)
        if key in existing:
            results.append(existing[key])
            continue
        pending.append((command, task, opts))

    if pending:
        if args.jobs and args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                out = list(ex.map(_row_worker, pending))
        else:
            out = [_row_worker(p) for p in pending]
        for row, failed in out:
            any_failed = any_failed or failed
            results.append({c: _fmt(row.get(c, "")) for c in columns})

    results.sort(key=lambda r: tuple(r.get(k, "") for k in keys))
    render = _render_csv if args.format == "csv" else _render_json
    _write(args.out, render(command, columns, results))
    toeplitz.flush_cache()
    return EXIT_NUMERICAL if any_failed else EXIT_OK


def _precompute_key_value(command, task, key):
    if key in task:
        if key in ("N", "L", "K"):
            return int(task[key])
        return float(task[key]) if key != "L" else task[key]
    if key == "a" and "T" in task:
        return gww.a_of_T(float(task["T"]))
    raise KeyError(key)


# ----------------------------------------------------------------------
# argument plumbing
# ----------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", help="INI config file; flags override it")
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--format", choices=["csv", "json"], default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--tol", type=float, default=None,
                    help="quadrature relative tolerance")
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--timing", action="store_true",
                    help="record wall times (breaks byte-identical output)")
    sp.add_argument("--resume", action="store_true",
                    help="reuse completed rows from an existing output file")
    sp.add_argument("--mc", action="store_true",
                    help="Monte-Carlo sampling mode instead of quadrature")
    sp.add_argument("--mc-samples", type=int, default=None)


def build_parser():
    p = _Parser(prog="hpchain", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f1 = sub.add_parser("fig1", help="ln<sqrt echo> vs N at infinite L")
    _add_common(f1)
    f1.add_argument("--N-list", dest="N_list")
    f1.add_argument("--a-list", dest="a_list")
    f1.add_argument("--T-list", dest="T_list")
    f1.add_argument("--profile", help="relative couplings gamma_1,gamma_2,...")

    f2 = sub.add_parser("fig2", help="ln<sqrt echo> vs a at finite L")
    _add_common(f2)
    f2.add_argument("--N-list", dest="N_list")
    f2.add_argument("--a-list", dest="a_list")
    f2.add_argument("--T-list", dest="T_list")
    f2.add_argument("--L", dest="L")
    f2.add_argument("--profile")

    pk = sub.add_parser("polyakov", help="impurity-ratio order parameter scan")
    _add_common(pk)
    pk.add_argument("--N", dest="N")
    pk.add_argument("--p", dest="p", help="impurity shift, >= 1")
    pk.add_argument("--a-list", dest="a_list")
    pk.add_argument("--T-list", dest="T_list")

    gw = sub.add_parser("gww", help="planar saddle scan")
    _add_common(gw)
    gw.add_argument("--a-list", dest="a_list")
    gw.add_argument("--T-list", dest="T_list")

    ic = sub.add_parser("identity-check", help="determinant identity audit")
    _add_common(ic)
    ic.add_argument("--manifest", help="JSON manifest overriding the frozen grids")
    ic.add_argument("--perturb", type=float, default=0.0,
                    help="sensitivity hook: rescale one kernel entry by 1+eps")

    oc = sub.add_parser("oracle-compare",
                        help="determinant vs dense diagonalization")
    _add_common(oc)
    oc.add_argument("--L-list", dest="L_list")
    oc.add_argument("--N-list", dest="N_list")
    oc.add_argument("--K-list", dest="K_list")
    oc.add_argument("--J-list", dest="J_list")

    ns = sub.add_parser("nested", help="width-averaged echo averages")
    _add_common(ns)
    ns.add_argument("--N", dest="N")
    ns.add_argument("--a-list", dest="a_list")
    ns.add_argument("--b-list", dest="b_list")

    ct = sub.add_parser("complex-temp", help="complex-temperature echo averages")
    _add_common(ct)
    ct.add_argument("--N-list", dest="N_list")
    ct.add_argument("--a-modulus", dest="a_modulus")
    ct.add_argument("--phi-list", dest="phi_list")
    return p


def _config_value(cfg, key):
    if cfg is None:
        return None
    for section in ("scan", "DEFAULT"):
        if cfg.has_option(section, key):
            return cfg.get(section, key)
    return None


def _resolve(args, key, default, cast=None):
    v = getattr(args, key, None)
    if v is None:
        v = _config_value(args._cfg, key)
    if v is None:
        v = default
    if v is not None and cast is not None and isinstance(v, str):
        v = cast(v)
    return v


def _load_config(args):
    cfg = None
    if args.config:
        if not os.path.exists(args.config):
            raise UsageError(f"config file not found: {args.config}")
        cfg = configparser.ConfigParser()
        cfg.read(args.config)
    args._cfg = cfg


def _ab_lists(args):
    a_text = _resolve(args, "a_list", None)
    t_text = _resolve(args, "T_list", None)
    if a_text is not None and t_text is not None:
        raise UsageError("give exactly one of --a-list / --T-list")
    if a_text is not None:
        vals = _floats(a_text)
        if not vals:
            raise UsageError("empty a-list")
        return [("a", v) for v in vals]
    if t_text is not None:
        vals = _floats(t_text)
        if not vals:
            raise UsageError("empty T-list")
        return [("T", v) for v in vals]
    return None


def _common_opts(args):
    return {
        "tol": _resolve(args, "tol", 1e-9, float),
        "seed": _resolve(args, "seed", 0, int),
        "mc": bool(getattr(args, "mc", False)),
        "mc_samples": _resolve(args, "mc_samples", 4096, int),
        "timing": bool(getattr(args, "timing", False)),
    }


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        _load_config(args)
        args.format = _resolve(args, "format", "csv")
        args.out = _resolve(args, "out", None)
        args.jobs = _resolve(args, "jobs", 1, int)
        command = args.command

        if command == "identity-check":
            manifest = None
            mpath = _resolve(args, "manifest", None)
            if mpath:
                with open(mpath) as fh:
                    manifest = json.load(fh)
                if not any(manifest.get(k, {}).get(g)
                           for k, g in (("prop_bessel", "K_values"),
                                        ("det_identity", "cases"),
                                        ("fermion", "cases"),
                                        ("heine_szego", "J_grid"))):
                    raise UsageError("identity manifest has an empty grid")
            reports = identities.run_all(manifest, perturb=args.perturb)
            text = identities.reports_to_json(reports)
            if args.out:
                _write(args.out, text)
            print(identities.format_table(reports))
            return EXIT_OK if all(r.passed for r in reports) else EXIT_IDENTITY

        opts = _common_opts(args)

        if command in ("fig1", "fig2"):
            default_N = "1,2,4,8,16,32" if command == "fig1" else "2,3,4,5,6,7,8"
            N_list = _ints(_resolve(args, "N_list", default_N))
            ab = _ab_lists(args)
            if ab is None:
                if command == "fig1":
                    ab = [("a", gww.a_of_T(0.30)), ("a", gww.a_of_T(0.45))]
                else:
                    ab = [("a", v) for v in
                          (0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5,
                           1.75, 2.0, 2.25, 2.5, 2.75, 3.0)]
            opts["L"] = "inf" if command == "fig1" else str(
                _resolve(args, "L", 18, int))
            prof = _resolve(args, "profile", None)
            opts["profile"] = tuple(_floats(prof)) if prof else None
            if command == "fig2" and opts["L"] == "inf":
                raise UsageError("fig2 needs finite L")
            tasks = [{"N": N, kind: v} for N in N_list for kind, v in ab]
            return _run_scan(command, tasks, opts, args)

        if command == "polyakov":
            N = int(_resolve(args, "N", 16, int))
            if N < 2:
                raise UsageError("polyakov scan needs N >= 2")
            opts["p"] = int(_resolve(args, "p", 1, int))
            if opts["p"] < 1:
                raise UsageError("impurity shift p must be >= 1")
            ab = _ab_lists(args) or [("a", v) for v in
                                     (0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)]
            opts["L"] = "inf"
            tasks = [{"N": N, kind: v} for kind, v in ab]
            return _run_scan(command, tasks, opts, args)

        if command == "gww":
            ab = _ab_lists(args) or [("a", v) for v in
                                     (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0)]
            opts["L"] = "inf"
            tasks = [{kind: v} for kind, v in ab]
            return _run_scan(command, tasks, opts, args)

        if command == "oracle-compare":
            L_list = _ints(_resolve(args, "L_list", "8,10,12"))
            if any(L > 14 for L in L_list):
                raise UsageError("oracle restricted to L <= 14 (cost guard)")
            N_list = _ints(_resolve(args, "N_list", "1,2,3,4"))
            K_list = _ints(_resolve(args, "K_list", "1,2"))
            J_list = _floats(_resolve(args, "J_list", "0.5,1.0,2.0"))
            opts["L"] = "finite"
            tasks = [{"L": L, "N": N, "K": K, "J": J}
                     for L in L_list for N in N_list
                     for K in K_list for J in J_list]
            return _run_scan(command, tasks, opts, args)

        if command == "nested":
            N = int(_resolve(args, "N", 8, int))
            a_vals = _floats(_resolve(args, "a_list", "0.5,2.0"))
            b_vals = _floats(_resolve(args, "b_list", "1e-6,0.5"))
            opts["L"] = "inf"
            tasks = [{"N": N, "a": a, "b": b} for a in a_vals for b in b_vals]
            return _run_scan(command, tasks, opts, args)

        if command == "complex-temp":
            N_list = _ints(_resolve(args, "N_list", "1,2,4"))
            opts["a_modulus"] = float(_resolve(args, "a_modulus", 2.0, float))
            phi_list = _floats(_resolve(args, "phi_list", "0.0,0.7853981633974483"))
            opts["L"] = "inf"
            tasks = [{"N": N, "phi": phi} for N in N_list for phi in phi_list]
            return _run_scan(command, tasks, opts, args)

        raise UsageError(f"unknown command {command}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (average.QuadratureError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
