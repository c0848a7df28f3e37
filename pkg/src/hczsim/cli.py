"""Command-line front end: ``hczsim <command> [options]``.

Every command writes a JSON document carrying ``schema_version``, the
effective configuration, its SHA-256 hash and the seed. Options may also come
from a flat YAML file given with ``--config``; explicit flags win.

Exit codes: 0 success, 2 usage or contract error, 3 data error, 4 fit error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import warnings
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import characterize as ch
from . import tolerance as tol
from . import visibility as vis
from .circuit import CircuitParams, build_circuit, hcz_target, ideal_params
from .errors import ContractViolation, DataError, FitError
from .metrics import (
    BASES,
    basis_success_probability,
    herald_probability,
    jamiolkowski_state,
    mode_fidelity,
    process_fidelity,
    rate_estimate,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT = 0, 2, 3, 4
THREADS_ENV = "HCZSIM_THREADS"


class UsageError(Exception):
    pass


def _floats(text: str, n: Optional[int] = None) -> List[float]:
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {len(vals)}")
    return vals


def _four(text):
    return _floats(text, 4)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Parser


def _add_circuit_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("circuit (angles and phases in radians)")
    g.add_argument("--ideal", action="store_true", help="use the design point (all deviations zero)")
    g.add_argument("--dtheta", type=_four, default=None, metavar="D1,D2,D3,D4",
                   help="splitting-angle deviations from the design, radians")
    g.add_argument("--theta", type=_four, default=None, metavar="T1,T2,T3,T4",
                   help="absolute splitting angles, radians (overrides --dtheta)")
    g.add_argument("--dphi", type=float, default=0.0, help="net internal phase phi_N, radians (default 0)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="flat YAML file of option values; flags override it")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", default=None, help="JSON output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hczsim",
        description="Heralded controlled-Z linear-optics toolkit. Angles and phases in radians, "
                    "loss in dB, rates in Hz, delays in arbitrary units.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fidelity", help="mode and process fidelity of one circuit")
    _add_common(p)
    _add_circuit_args(p)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("sweep", help="fidelity versus a single deviation (radians)")
    _add_common(p)
    p.add_argument("--param", choices=(*tol.PARAMETERS, "all"), default="all", help="deviated parameter")
    p.add_argument("--n-per-sign", type=int, default=50, help="grid points per sign (default 50)")
    p.add_argument("--min", dest="dmin", type=float, default=1e-3, help="smallest |deviation|, radians")
    p.add_argument("--max", dest="dmax", type=float, default=0.5, help="largest |deviation|, radians")
    p.add_argument("--csv", default=None, help="CSV output: param,delta,fm,fp")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("montecarlo", help="fidelity statistics under Gaussian deviations")
    _add_common(p)
    p.add_argument("--sigma", type=float, default=0.05, help="deviation standard deviation, radians")
    p.add_argument("--n", type=int, default=2000, help="number of simulated devices")
    p.add_argument("--which", default=",".join(tol.PARAMETERS),
                   help="comma-separated deviated parameters (default all five)")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default from {THREADS_ENV}, else 1)")
    p.add_argument("--csv", default=None, help="CSV output: sample,dtheta1..4,dphi,fm,fp")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("characterize", help="simulate, reconstruct and fit coherent characterisation data")
    csub = p.add_subparsers(dest="action", required=True)
    q = csub.add_parser("simulate", help="synthetic measurement record from a circuit")
    _add_common(q)
    _add_circuit_args(q)
    q.add_argument("--noise", choices=("default", "none"), default="default", help="noise preset")
    q.add_argument("--intensity-sigma", type=float, default=None, help="relative intensity noise (fraction)")
    q.add_argument("--velocity-jitter", type=float, default=None, help="relative phase-sweep velocity drift")
    q.add_argument("--channel-phase-sigma", type=float, default=None, help="per-output fringe phase noise, radians")
    q.add_argument("--trials", type=int, default=None, help="repeated measurement trials")
    q.add_argument("--record", required=True, help="path for the JSON measurement record")
    q.set_defaults(func=cmd_characterize_simulate)
    q = csub.add_parser("reconstruct", help="U_meas and unitarity diagnostic from a record")
    _add_common(q)
    q.add_argument("--record", required=True, help="JSON measurement record")
    q.add_argument("--csv", default=None, help="CSV of U_meas, Re/Im interleaved per row")
    q.add_argument("--compare-ideal", action="store_true", help="also report F_m against the design circuit")
    _add_circuit_args(q)
    q.set_defaults(func=cmd_characterize_reconstruct)
    q = csub.add_parser("fit", help="circuit parameters and fidelities from a record")
    _add_common(q)
    q.add_argument("--record", required=True, help="JSON measurement record")
    q.add_argument("--n-starts", type=int, default=16, help="multistarts of the angle fit")
    q.add_argument("--n-mc", type=int, default=200, help="Monte Carlo samples for uncertainties (0 to skip)")
    q.set_defaults(func=cmd_characterize_fit)

    p = sub.add_parser("visibility", help="two-photon interference visibilities")
    vsub = p.add_subparsers(dest="action", required=True)
    q = vsub.add_parser("predict", help="36-entry visibility table of a circuit")
    _add_common(q)
    _add_circuit_args(q)
    q.add_argument("--csv", default=None, help="CSV output: j,k,p,q,Q,D,V")
    q.set_defaults(func=cmd_visibility_predict)
    q = vsub.add_parser("fitdip", help="fit a coincidence-versus-delay curve")
    _add_common(q)
    q.add_argument("--curve", required=True, help="CSV with columns delay,counts (delay in arbitrary units)")
    q.add_argument("--n-starts", type=int, default=8, help="multistarts")
    q.set_defaults(func=cmd_visibility_fitdip)
    q = vsub.add_parser("fitunitary", help="unitary best reproducing a visibility table")
    _add_common(q)
    q.add_argument("--table", required=True, help="CSV visibility table (column V used)")
    q.add_argument("--reference", default=None,
                   help="CSV unitary (Re/Im interleaved) used to pick among equivalent solutions")
    q.add_argument("--n-starts", type=int, default=32, help="multistarts")
    q.add_argument("--csv", default=None, help="CSV of the fitted unitary, Re/Im interleaved")
    q.set_defaults(func=cmd_visibility_fitunitary)

    p = sub.add_parser("rate", help="expected heralded success rate")
    _add_common(p)
    p.add_argument("--loss-db", type=float, default=0.0, help="loss per waveguide, dB")
    p.add_argument("--source-hz", type=float, default=1.0, help="six-photon event rate, Hz")
    p.set_defaults(func=cmd_rate)
    return parser


# ---------------------------------------------------------------------------
# Configuration handling


def _subparser_for(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.ArgumentParser:
    node = parser
    for token in argv:
        actions = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
        if not actions or token not in actions[0].choices:
            if token.startswith("-"):
                continue
            break
        node = actions[0].choices[token]
    return node


def load_config(path: str) -> Dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise UsageError(f"config {path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: expected key: value pairs at the top level")
    flat = {}
    for key, value in data.items():
        if isinstance(value, (dict, list)) and not (isinstance(value, list) and all(
                isinstance(v, (int, float)) for v in value)):
            raise UsageError(f"config {path}: field '{key}' must be a scalar or a list of numbers")
        flat[str(key).replace("-", "_")] = value
    return flat


def _apply_config(node: argparse.ArgumentParser, config: Dict, path: str) -> None:
    dests = {a.dest: a for a in node._actions}
    defaults = {}
    for key, value in config.items():
        if key not in dests or key in ("config", "func", "help"):
            raise UsageError(f"config {path}: unknown field '{key}'")
        action = dests[key]
        if isinstance(value, list):
            value = ",".join(repr(float(v)) for v in value)
        if action.type is not None and isinstance(value, str):
            try:
                value = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config {path}: field '{key}': {exc}") from exc
        elif action.type is not None and value is not None and not isinstance(value, bool):
            value = action.type(value) if action.type in (int, float) else action.type(str(value))
        defaults[key] = value
    node.set_defaults(**defaults)


def effective_config(args: argparse.Namespace) -> Dict:
    skip = {"func", "config", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def config_hash(config: Dict) -> str:
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _emit(args, payload: Dict) -> None:
    config = effective_config(args)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": " ".join(x for x in (args.command, getattr(args, "action", None)) if x),
        "seed": args.seed,
        "config": config,
        "config_hash": config_hash(config),
        **payload,
    }
    text = json.dumps(doc, indent=2, default=_json_default, allow_nan=False) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _params(args) -> CircuitParams:
    if args.theta is not None:
        return CircuitParams(tuple(args.theta), args.dphi)
    if args.ideal or args.dtheta is None:
        if args.ideal and (args.dtheta is not None or args.dphi):
            raise UsageError("--ideal cannot be combined with --dtheta or --dphi")
        return ideal_params() if args.ideal else CircuitParams.from_deviations((0, 0, 0, 0), args.dphi)
    return CircuitParams.from_deviations(args.dtheta, args.dphi)


def _params_dict(p: CircuitParams) -> Dict:
    return {"theta": list(p.theta), "dtheta": list(p.dtheta), "phi_n": p.phi_n}


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, (str, int)) else f"{x:.17g}" for x in row])


def _complex_json(u) -> Dict:
    u = np.asarray(u, dtype=complex)
    return {"real": u.real.tolist(), "imag": u.imag.tolist()}


# ---------------------------------------------------------------------------
# Commands


def cmd_fidelity(args) -> None:
    p = _params(args)
    u = build_circuit(p)
    target = hcz_target()
    state = jamiolkowski_state(u)
    _emit(args, {
        "params": _params_dict(p),
        "fm": mode_fidelity(u, target),
        "fm_no_gauge": mode_fidelity(u, target, optimize_gauge=False),
        "fp": process_fidelity(state),
        "fp_no_gauge": process_fidelity(state, optimize_gauge=False),
        "herald_probability": state.herald_prob,
        "basis_success": {b: basis_success_probability(u, b) for b in BASES},
        "basis_herald": {b: herald_probability(u, b) for b in BASES},
    })


def cmd_sweep(args) -> None:
    if args.n_per_sign < 1 or not 0 < args.dmin < args.dmax:
        raise UsageError("need n-per-sign >= 1 and 0 < min < max")
    grid = tol.default_grid(args.n_per_sign, args.dmin, args.dmax)
    names = tol.PARAMETERS if args.param == "all" else (args.param,)
    curves = {name: tol.sweep_parameter(name, grid) for name in names}
    if args.csv:
        _write_csv(args.csv, ["param", "delta", "fm", "fp"],
                   [(name, *row) for name, c in curves.items() for row in c])
    _emit(args, {"curves": {name: {"delta": c[:, 0], "fm": c[:, 1], "fp": c[:, 2]} for name, c in curves.items()}})


def cmd_montecarlo(args) -> None:
    which = tuple(w.strip() for w in args.which.split(",") if w.strip())
    spec = tol.DeviationSpec(args.sigma, args.n, args.seed, which)
    workers = args.workers if args.workers is not None else default_threads()
    report = tol.monte_carlo(spec, workers=workers)
    if args.csv:
        report.write_csv(args.csv)
    summary = report.summary()
    summary.pop("schema_version")
    _emit(args, {"summary": summary})


def _noise(args) -> ch.NoiseSpec:
    base = ch.NoiseSpec.none() if args.noise == "none" else ch.NoiseSpec()
    overrides = {
        "intensity_sigma": args.intensity_sigma,
        "velocity_jitter": args.velocity_jitter,
        "channel_phase_sigma": args.channel_phase_sigma,
        "n_trials": args.trials,
    }
    kw = {**vars(base), **{k: v for k, v in overrides.items() if v is not None}}
    return ch.NoiseSpec(**kw)


def cmd_characterize_simulate(args) -> None:
    p = _params(args)
    noise = _noise(args)
    record = ch.simulate_measurement(build_circuit(p), noise, seed=args.seed)
    record.save(args.record)
    _emit(args, {"params": _params_dict(p), "noise": vars(noise), "record": args.record})


def _load_record(path) -> ch.MeasurementRecord:
    try:
        return ch.MeasurementRecord.load(path)
    except FileNotFoundError as exc:
        raise DataError(f"record not found: {path}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"record {path} is malformed: {exc}") from exc


def cmd_characterize_reconstruct(args) -> None:
    rec = ch.reconstruct_unitary(_load_record(args.record))
    if args.csv:
        _write_csv(args.csv, [f"{part}{j}" for j in range(4) for part in ("re", "im")],
                   ch.unitary_to_csv_rows(rec.unitary))
    payload = {
        "unitary": _complex_json(rec.unitary),
        "moduli_err": rec.moduli_err,
        "phase_err": rec.phase_err,
        "d_max": rec.diagnostic.max,
        "d_mean": rec.diagnostic.mean,
        "d": rec.diagnostic.d,
    }
    if args.compare_ideal or args.ideal or args.dtheta is not None or args.theta is not None:
        payload["fm_vs_circuit"] = mode_fidelity(rec.unitary, build_circuit(_params(args)))
    _emit(args, payload)


def cmd_characterize_fit(args) -> None:
    record = _load_record(args.record)
    rec = ch.reconstruct_unitary(record)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = ch.fit_params(rec.unitary, n_starts=args.n_starts, seed=args.seed)
    payload = {
        "params": _params_dict(fit.params),
        "residual": fit.residual,
        "phi_n_std": fit.phi_n_std,
        "phi_n_values": list(fit.phi_n_values),
        "warning": fit.warning,
        "fm": mode_fidelity(rec.unitary, hcz_target()),
        "fp": process_fidelity(jamiolkowski_state(rec.unitary, unitarity_tol=np.inf)),
        "d_max": rec.diagnostic.max,
        "d_mean": rec.diagnostic.mean,
    }
    if args.n_mc > 0:
        unc = ch.propagate_uncertainty(record, n_mc=args.n_mc, seed=args.seed)
        payload.update(sigma_fm=unc.sigma_fm, sigma_fp=unc.sigma_fp, d_significance=unc.d_significance)
    _emit(args, payload)


def cmd_visibility_predict(args) -> None:
    p = _params(args)
    u = build_circuit(p)
    entries = vis.visibility_table(u)
    if args.csv:
        vis.write_table_csv(entries, args.csv)
    values = [e.v for e in entries]
    _emit(args, {"params": _params_dict(p), "table": vis.table_matrix_json(values)})


def _read_columns(path, names) -> List[np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    missing = [n for n in names if not rows or n not in rows[0]]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    try:
        return [np.array([float(r[n]) for r in rows]) for n in names]
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from exc


def cmd_visibility_fitdip(args) -> None:
    delays, counts = _read_columns(args.curve, ["delay", "counts"])
    fit = vis.fit_dip(delays, counts, n_starts=args.n_starts, seed=args.seed)
    _emit(args, {
        "c_max": fit.c_max, "c_min": fit.c_min, "v": fit.v, "q": fit.q, "d": fit.d,
        "sigma": fit.profile.sigma, "period": fit.profile.period, "chi2": fit.chi2,
        "convention": vis.SIGN_CONVENTION,
    })


def _read_unitary_csv(path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        return ch.unitary_from_csv_rows([[float(x) for x in r] for r in rows])
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: malformed unitary CSV ({exc})") from exc


def cmd_visibility_fitunitary(args) -> None:
    (values,) = _read_columns(args.table, ["V"])
    reference = _read_unitary_csv(args.reference) if args.reference else None
    fit = vis.fit_unitary_to_visibilities(values, n_starts=args.n_starts, seed=args.seed, reference=reference)
    if args.csv:
        _write_csv(args.csv, [f"{part}{j}" for j in range(4) for part in ("re", "im")],
                   ch.unitary_to_csv_rows(fit.unitary))
    payload = {
        "unitary": _complex_json(fit.unitary),
        "rms": fit.rms,
        "n_equivalent_solutions": len(fit.candidates),
        "fm_vs_ideal": mode_fidelity(fit.unitary, hcz_target()),
    }
    if reference is not None:
        payload["fm_vs_reference"] = mode_fidelity(fit.unitary, reference)
    _emit(args, payload)


def cmd_rate(args) -> None:
    r = rate_estimate(args.loss_db, args.source_hz)
    _emit(args, {
        "per_shot_success": r.per_shot_success,
        "wall_rate_hz": r.wall_rate,
        "loss_db_per_waveguide": r.loss_per_waveguide,
        "source_rate_hz": r.source_rate,
    })


# ---------------------------------------------------------------------------


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise UsageError("--config needs a path")
            path = argv[i + 1]
            _apply_config(_subparser_for(parser, argv), load_config(path), path)
        args = parser.parse_args(argv)
        args.func(args)
    except SystemExit as exc:  # argparse: --help gives 0, bad usage 2
        return int(exc.code or 0)
    except (UsageError, ContractViolation) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
