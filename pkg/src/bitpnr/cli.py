"""Command-line front end: ``bitpnr <verb> ...``.

Exit codes: 0 success, 2 input error, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    calibrate,
    calibration_from_shots,
    coherent_basis,
    CalibrationSet,
    fock_basis,
    synthesize_calibration,
)
from .exceptions import DomainError, ExpansionTooLarge, IllConditioned
from .fock import Label, ProbVector, coherent_distribution, fock_state, tvd
from .hmm import ConfusionMatrix, DetectorParams, confusion_matrix
from .mitigation import (
    COND_THRESHOLD,
    extracted_bits,
    invert_confusion,
    mitigate,
    model_condition_number,
)
from .multimode import (
    ExpansionSpec,
    SparseDist,
    mitigate_peaks,
    mitigate_truncated,
    simulate_multimode,
)
from .simulator import ResetKind, ResetModel, simulate_ensemble

SCHEMAS = {
    "DetectorParams": 1,
    "ProbVector": 1,
    "ConfusionMatrix": 1,
    "ShotRecord": 1,
    "CalibrationSet": 1,
    "SparseDist": 1,
}

EXIT_INPUT = 2
EXIT_NUMERIC = 3


class InputError(Exception):
    pass


def load_params(path) -> DetectorParams:
    try:
        with open(path) as fh:
            return DetectorParams.from_dict(json.load(fh))
    except FileNotFoundError:
        raise InputError(f"params file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    except (DomainError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def parse_initial(spec: str, n_max: int) -> ProbVector:
    kind, _, arg = spec.partition(":")
    try:
        if kind == "fock":
            return fock_state(int(arg), n_max)
        if kind == "coherent":
            alpha = float(arg)
            return coherent_distribution(alpha * alpha, n_max)[0]
        if kind == "file":
            return ProbVector.read_csv(arg, Label.IDEAL, normalize=True)
    except (ValueError, DomainError, FileNotFoundError) as exc:
        raise InputError(f"bad --initial {spec!r}: {exc}") from None
    raise InputError(f"--initial must be fock:N, coherent:ALPHA or file:PATH, got {spec!r}")


def write_vector(vec: ProbVector, path, fmt):
    if fmt == "json":
        Path(path).write_text(vec.to_json() + "\n")
    else:
        vec.write_csv(path)


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def reset_model_from_args(args, params) -> ResetModel:
    pmf = None
    if args.reset_pmf:
        with open(args.reset_pmf) as fh:
            pmf = tuple(json.load(fh))
    try:
        if ResetKind(args.reset_model) is ResetKind.EMPIRICAL:
            # exposure per attempt keeps the model's mean reset exposure at the configured mean
            return ResetModel(ResetKind.EMPIRICAL, 1.0, params.kappa_t_reset / args.mean_attempts, pmf)
        return ResetModel.matching(params, args.reset_model, args.mean_attempts)
    except DomainError as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(args):
    params = load_params(args.params)
    p0 = parse_initial(args.initial, params.n_max)
    reset = reset_model_from_args(args, params)
    t0 = time.perf_counter()
    res = simulate_ensemble(
        params, reset, p0, args.shots, args.seed, keep_shots=args.keep_shots, workers=args.threads
    )
    elapsed = time.perf_counter() - t0
    prefix = args.out
    ext = "json" if args.format == "json" else "csv"
    write_vector(res.histogram, f"{prefix}.hist.{ext}", args.format)
    if args.keep_shots:
        res.write_archive(f"{prefix}.shots.jsonl")
    dump_json(
        {
            "version": __version__,
            "verb": "simulate",
            "seed": args.seed,
            "shots": args.shots,
            "initial": args.initial,
            "params": params.to_dict(),
            "params_hash": params.fingerprint(),
            "reset_model": {
                "kind": reset.kind.value,
                "mean_attempts": reset.mean_attempts,
                "attempt_exposure": reset.attempt_exposure,
                "empirical_pmf": reset.empirical_pmf,
            },
            "threads": args.threads,
            "timing_s": elapsed,
        },
        f"{prefix}.meta.json",
    )
    return 0


def cmd_build_model(args):
    params = load_params(args.params)
    cm = confusion_matrix(params)
    cond = model_condition_number(params)
    cm.write_csv(args.out)
    stem = args.out[:-4] if args.out.endswith(".csv") else args.out
    with open(f"{stem}.heatmap.csv", "w") as fh:
        fh.write("outcome,input,c,c_minus_identity\n")
        for i in range(cm.n_max):
            for j in range(cm.n_max):
                fh.write(f"{i},{j},{cm.c[i, j]!r},{cm.c[i, j] - (i == j)!r}\n")
    report = {
        "params_hash": cm.params_hash,
        "n_max": cm.n_max,
        "cond": cond,
        "cond_threshold": args.cond_threshold,
        "invertible": cond <= args.cond_threshold,
        "mean_infidelity": cm.mean_infidelity(),
        "extracted_bits": extracted_bits(cm),
    }
    if cond > args.cond_threshold:
        print(
            f"warning: condition number {cond:.3e} exceeds {args.cond_threshold:.1e}; "
            "mitigation with this model will be refused",
            file=sys.stderr,
        )
    print(json.dumps(report, indent=2))
    return 0


def load_model(args) -> ConfusionMatrix:
    if bool(args.model) == bool(args.params):
        raise InputError("give exactly one of --model or --params")
    if args.model:
        try:
            return ConfusionMatrix.read_csv(args.model)
        except (OSError, ValueError, DomainError) as exc:
            raise InputError(f"{args.model}: {exc}") from None
    return confusion_matrix(load_params(args.params))


def read_hist(path, label):
    try:
        return ProbVector.read_csv(path, label, normalize=True)
    except (OSError, DomainError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_mitigate(args):
    cm = load_model(args)
    hist = read_hist(args.hist, Label.MEASURED)
    if len(hist) != cm.n_max:
        raise InputError(f"histogram has {len(hist)} bins, model is {cm.n_max}x{cm.n_max}")
    inv = invert_confusion(cm, args.cond_threshold)
    res = mitigate(inv, hist)
    write_vector(res.mitigated, args.out, args.format)
    report = {"cond": inv.cond, "residual_norm": res.residual_norm, "inverse_residual": inv.residual,
              "params_hash": cm.params_hash}
    if args.ideal:
        if args.ideal.partition(":")[0] in ("fock", "coherent", "file"):
            ideal = parse_initial(args.ideal, cm.n_max)
        else:
            ideal = read_hist(args.ideal, Label.IDEAL)
        if len(ideal) != cm.n_max:
            raise InputError(f"ideal distribution has {len(ideal)} bins, model is {cm.n_max}")
        report["tvd_pre"] = tvd(hist, ideal)
        report["tvd_post"] = tvd(res.mitigated, ideal)
    stem = args.out.rsplit(".", 1)[0]
    dump_json(report, args.report or f"{stem}.report.json")
    print(json.dumps(report))
    return 0


def cmd_calibrate(args):
    params = load_params(args.params)
    n_max = params.n_max
    if args.synthesize:
        overlap = fock_basis(n_max) if args.basis == "fock" else coherent_basis(np.linspace(0, 3, n_max), n_max)
        prep = args.prep_exposure if args.prep_exposure is not None else params.kappa_t[0]
        sets = [
            synthesize_calibration(params, k, overlap, prep, args.shots, np.random.SeedSequence((args.seed, k)))
            for k in range(params.n_bits)
        ]
    elif args.archive:
        prep = args.prep_exposure if args.prep_exposure is not None else params.kappa_t[0]
        with open(args.archive) as fh:
            sets = calibration_from_shots((json.loads(l) for l in fh if l.strip()), n_max, prep)
    elif args.cal:
        sets = []
        for path in args.cal:
            with open(path) as fh:
                sets.append(CalibrationSet.from_dict(json.load(fh)))
    else:
        raise InputError("give --synthesize, --archive or --cal")
    recovered, rates = calibrate(sets, params.kappa_t, params.kappa_t_reset, args.cond_threshold)
    if args.out:
        Path(args.out).write_text(recovered.to_json() + "\n")
    rows = [
        {"bit": k, "eps_g": r.eps_g, "sigma_g": r.sigma_g, "eps_e": r.eps_e, "sigma_e": r.sigma_e}
        for k, r in enumerate(rates)
    ]
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        print("bit,eps_g,sigma_g,eps_e,sigma_e")
        for r in rows:
            print(f"{r['bit']},{r['eps_g']:.6g},{r['sigma_g']:.3g},{r['eps_e']:.6g},{r['sigma_e']:.3g}")
    return 0


def cmd_info_bits(args):
    cm = confusion_matrix(load_params(args.params))
    bits = extracted_bits(cm)
    if args.format == "json":
        print(json.dumps({"extracted_bits": bits, "n_bits": int(np.log2(cm.n_max))}))
    else:
        print(f"{bits:.4f}")
    return 0


def cmd_cond_sweep(args):
    if args.points < 1 or args.to < args.from_:
        raise InputError("need --points >= 1 and --to >= --from")
    xs = np.linspace(args.from_, args.to, args.points)

    def point(x):
        return model_condition_number(DetectorParams.uniform(args.bits, x, x, args.eps_g, args.eps_e))

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        conds = list(pool.map(point, xs))
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        if args.format == "json":
            json.dump([{"exposure": float(x), "cond": c} for x, c in zip(xs, conds)], out)
            out.write("\n")
        else:
            out.write("exposure,cond\n")
            for x, c in zip(xs, conds):
                out.write(f"{x!r},{c!r}\n")
    finally:
        if args.out:
            out.close()
    return 0


def cmd_multimode(args):
    inverses = []
    if args.inverse:
        for path in args.inverse:
            inverses.append(np.loadtxt(path, delimiter=",", ndmin=2))
        mode_params = None
    else:
        if not args.params:
            raise InputError("give --params (one per mode, or one with --modes) or --inverse")
        mode_params = [load_params(p) for p in args.params]
        if len(mode_params) == 1 and args.modes:
            mode_params = mode_params * args.modes
        for p in mode_params:
            inverses.append(invert_confusion(confusion_matrix(p), args.cond_threshold).matrix)
    n_modes = len(inverses)
    n_max = inverses[0].shape[0]

    if args.dist:
        with open(args.dist) as fh:
            dist = SparseDist.from_jsonl(fh.read())
    else:
        if mode_params is None:
            raise InputError("synthesizing a distribution needs --params")
        rng = np.random.default_rng(args.seed)
        peaks = {tuple(int(v) for v in rng.integers(0, n_max, n_modes)): float(w)
                 for w in rng.dirichlet(np.ones(args.peaks))}
        dist = simulate_multimode(mode_params, None, peaks, args.shots, args.seed)
    if dist.n_modes != n_modes:
        raise InputError(f"distribution has {dist.n_modes} modes, {n_modes} detectors given")

    if args.q is not None:
        spec = ExpansionSpec(args.q, tuple(inverses), budget=args.budget)
        values = mitigate_truncated(spec, dist)
    else:
        targets = None
        if args.targets:
            with open(args.targets) as fh:
                targets = [tuple(json.loads(l)["digits"]) for l in fh if l.strip()]
        values = mitigate_peaks(inverses, targets, dist)

    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for digits, v in sorted(values.items()):
            out.write(json.dumps({"digits": list(digits), "p": v}) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def env_seed():
    raw = os.environ.get("PNR_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"PNR_SEED must be an integer, got {raw!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: $PNR_SEED or 0)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--cond-threshold", type=float, default=COND_THRESHOLD)

    parser = argparse.ArgumentParser(prog="bitpnr", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version", action="version",
        version=json.dumps({"bitpnr": __version__, "schemas": SCHEMAS}),
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo shot simulation")
    p.add_argument("--params", required=True)
    p.add_argument("--initial", default="fock:0", help="fock:N, coherent:ALPHA or file:PATH")
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--reset-model", choices=[k.value for k in ResetKind], default=ResetKind.CONSTANT.value)
    p.add_argument("--mean-attempts", type=float, default=2.05)
    p.add_argument("--reset-pmf", help="JSON list, entry a = P(a+1 attempts)")
    p.add_argument("--keep-shots", action="store_true", help="also write <prefix>.shots.jsonl")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-model", parents=[common], help="confusion matrix from parameters")
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_model)

    p = sub.add_parser("mitigate", parents=[common], help="single-mode error mitigation")
    p.add_argument("--model")
    p.add_argument("--params")
    p.add_argument("--hist", required=True)
    p.add_argument("--ideal", help="CSV path, or fock:N / coherent:ALPHA / file:PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("calibrate", parents=[common], help="recover readout error rates")
    p.add_argument("--params", required=True, help="supplies decay exposures (and true rates with --synthesize)")
    p.add_argument("--cal", action="append", help="CalibrationSet JSON, one per bit")
    p.add_argument("--archive", help="JSONL of single-bit shots {state, bit, outcome}")
    p.add_argument("--synthesize", action="store_true")
    p.add_argument("--basis", choices=("fock", "coherent"), default="fock")
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--prep-exposure", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("info-bits", parents=[common], help="information extracted per shot")
    p.add_argument("--params", required=True)
    p.set_defaults(func=cmd_info_bits)

    p = sub.add_parser("cond-sweep", parents=[common], help="condition number vs decay exposure")
    p.add_argument("--from", dest="from_", type=float, default=0.001)
    p.add_argument("--to", type=float, default=0.6)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--eps-g", type=float, default=0.01)
    p.add_argument("--eps-e", type=float, default=0.03)
    p.add_argument("--bits", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cond_sweep)

    p = sub.add_parser("multimode", parents=[common], help="multi-mode Kronecker mitigation")
    p.add_argument("--params", action="append")
    p.add_argument("--modes", type=int)
    p.add_argument("--inverse", action="append", help="single-mode inverse CSV, one per mode")
    p.add_argument("--dist", help="SparseDist JSONL; synthesized when omitted")
    p.add_argument("--peaks", type=int, default=4)
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--q", type=int, help="expansion order; peak-by-peak mode when omitted")
    p.add_argument("--targets", help="JSONL of {digits} to evaluate in peak mode")
    p.add_argument("--budget", type=int, default=10_000_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_multimode)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = env_seed()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            return args.func(args)
    except (InputError, DomainError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IllConditioned, ExpansionTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
