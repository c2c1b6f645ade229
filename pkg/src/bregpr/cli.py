"""Command-line interface.

Subcommands::

    bregpr reconstruct IN.wav --algo G.KL.L1 --out OUT.wav
    bregpr bench exact [WAV ...] [--synth multisine,chirp] --out DIR
    bregpr bench degrade --snr 10,-20 [WAV ...] --out DIR
    bregpr metrics REF.wav EST.wav

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure, 4 all runs diverged.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (DivergedRunError, DomainError, InvalidConfigurationError, InvalidInputError,
                     UnsupportedOperationError, WavError)
from .experiment import (ExperimentConfig, degrade, derive_rng, measure, rows_to_csv,
                         run_experiment)
from .grid import default_iterations, load_grid, resolve
from .metrics import align_and_snr, spectral_convergence
from .signals import KINDS, SynthSpec, synth_signal
from .solvers import SolverConfig, random_phase_init, run_setup
from .stft import TimeSignal, make_plan
from .wavio import load_wav, write_wav

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4

log = logging.getLogger("bregpr")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _codes(text: str) -> list[str]:
    return [t for t in text.replace(" ", "").split(",") if t]


def _add_common(p: argparse.ArgumentParser, many_algos: bool):
    g = p.add_argument_group("algorithm")
    if many_algos:
        g.add_argument("--algo", type=_codes, default=None,
                       help="comma-separated setup codes (default: the whole grid)")
    else:
        g.add_argument("--algo", default="GLA", help="setup code, e.g. G.KL.L1 or GLADMM (default: GLA)")
    g.add_argument("--iters", type=int, default=None, help="iterations (default: from the grid, 2500)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--step", type=float, default=None, help="gradient step mu (grid convention)")
    g.add_argument("--rho", type=float, default=None, help="ADMM penalty (grid convention)")
    g.add_argument("--gamma", type=float, default=None, help="acceleration in [0, 1)")
    g.add_argument("--d", type=int, choices=(1, 2), default=None, help="measurement power for gradient setups")
    g.add_argument("--step-convention", choices=("librosa", "unitary"), default=None,
                   help="scale in which --step/--rho and grid values are expressed")
    g.add_argument("--momentum-start", choices=("init", "zero"), default="init",
                   help="value of the previous gradient iterate before the first step")
    g.add_argument("--grid", default=None, help="JSON grid file replacing the built-in setup table")
    s = p.add_argument_group("transform")
    s.add_argument("--win-len", type=int, default=1024)
    s.add_argument("--hop", type=int, default=None, help="default: win-len / 2")
    s.add_argument("--sample-rate", type=int, default=22050)
    p.add_argument("--trace", action="store_true", help="dump per-iteration loss traces")
    p.add_argument("--trace-period", type=int, default=10)


def _add_inputs(p: argparse.ArgumentParser):
    p.add_argument("inputs", nargs="*", help="WAV files")
    p.add_argument("--synth", type=_codes, default=None,
                   help=f"comma-separated synthetic kinds ({', '.join(KINDS)})")
    p.add_argument("--duration", type=float, default=0.5, help="synthetic duration in seconds")
    p.add_argument("--synth-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bregpr", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="recover one signal from its spectrogram")
    rec.add_argument("input", nargs="?", help="WAV file whose spectrogram is the measurement")
    rec.add_argument("--synth", choices=KINDS, default=None, help="use a synthetic signal instead")
    rec.add_argument("--duration", type=float, default=0.5)
    rec.add_argument("--synth-seed", type=int, default=0)
    rec.add_argument("--snr", type=float, default=None, help="degrade the spectrogram at this input SNR (dB)")
    rec.add_argument("--out", required=True, help="output WAV path")
    _add_common(rec, many_algos=False)

    bench = sub.add_parser("bench", help="run the experiment grid")
    bsub = bench.add_subparsers(dest="protocol", required=True)
    ex = bsub.add_parser("exact", help="recovery from exact spectrograms")
    dg = bsub.add_parser("degrade", help="recovery from noisy, Wiener-filtered spectrograms")
    dg.add_argument("--snr", type=_floats, required=True, help="comma-separated input SNRs in dB")
    for b in (ex, dg):
        _add_inputs(b)
        b.add_argument("--out", required=True, help="output directory for report.csv / report.json")
        b.add_argument("--wavs", action="store_true", help="also write reconstructed WAVs")
        _add_common(b, many_algos=True)

    met = sub.add_parser("metrics", help="compare a reconstruction with its reference")
    met.add_argument("reference")
    met.add_argument("estimate")
    met.add_argument("--win-len", type=int, default=1024)
    met.add_argument("--hop", type=int, default=None)
    met.add_argument("--sample-rate", type=int, default=None)
    return parser


def _experiment_inputs(args) -> list:
    items: list = list(args.inputs)
    for kind in args.synth or []:
        items.append(SynthSpec(kind, args.duration, args.synth_seed))
    if not items:
        raise InvalidConfigurationError("no inputs: pass WAV files or --synth")
    return items


def _cmd_bench(args) -> int:
    cfg = ExperimentConfig(
        inputs=_experiment_inputs(args), algorithms=args.algo,
        protocol="exact" if args.protocol == "exact" else "degraded",
        input_snrs=getattr(args, "snr", []) or [], win_len=args.win_len,
        hop=args.hop or args.win_len // 2, sample_rate=args.sample_rate,
        iterations=default_iterations() if args.iters is None else args.iters, seed=args.seed,
        trace_period=args.trace_period, mu=args.step, rho=args.rho, gamma=args.gamma, d=args.d,
        convention=args.step_convention, momentum_start=args.momentum_start, grid_path=args.grid,
        output=args.out, write_wavs=args.wavs, dump_traces=args.trace,
    )
    result = run_experiment(cfg)
    sys.stdout.write(rows_to_csv(result.rows))
    if result.all_diverged:
        log.error("every run diverged")
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    if (args.input is None) == (args.synth is None):
        raise InvalidConfigurationError("give exactly one of an input WAV or --synth")
    if args.input is not None:
        sig = load_wav(args.input, expected_rate=args.sample_rate)
        input_id = Path(args.input).stem
    else:
        spec = SynthSpec(args.synth, args.duration, args.synth_seed)
        sig = synth_signal(spec, args.sample_rate, min_length=2 * args.win_len)
        input_id = spec.input_id
    grid = load_grid(args.grid)
    setup = resolve(args.algo, grid)
    if setup.kind == "init":
        raise InvalidConfigurationError("INIT is a baseline row, not an algorithm")
    allowed = {"step": ("gradient",), "d": ("gradient",), "rho": ("admm",), "gamma": ("gradient", "fgla")}
    for flag, kinds in allowed.items():
        if getattr(args, flag) is not None and setup.kind not in kinds:
            raise InvalidConfigurationError(f"--{flag} does not apply to {setup.code}")
    setup = setup.with_overrides(
        mu=args.step if setup.kind == "gradient" else None,
        rho=args.rho if setup.kind == "admm" else None,
        gamma=args.gamma if setup.kind in ("gradient", "fgla") else None,
        d=args.d if setup.kind == "gradient" else None,
        convention=args.step_convention,
    )
    plan = make_plan(len(sig), args.win_len, args.hop)
    x_star = plan.pad(sig.samples)
    cond = "exact" if args.snr is None else f"snr{args.snr:+g}"
    if args.snr is None:
        R1 = measure(x_star, plan, 1)
    else:
        R1 = degrade(x_star, args.snr, plan, derive_rng(args.seed, input_id, cond, "noise"))
    R = R1 if setup.d == 1 else type(R1)(R1.values ** 2, 2)
    _, x0 = random_phase_init(R1, plan, derive_rng(args.seed, input_id, cond, "phase"))
    iters = default_iterations() if args.iters is None else args.iters
    config = SolverConfig(iterations=iters, seed=args.seed, trace_period=args.trace_period,
                          momentum_start=args.momentum_start)
    diverged = False
    try:
        rep = run_setup(setup, R, plan, x0, config)
    except DivergedRunError as exc:
        log.error("%s", exc)
        rep, diverged = exc.report, True
    out = Path(args.out)
    write_wav(out, TimeSignal(plan.crop(rep.final_x), sig.sample_rate))
    snr_db, al = align_and_snr(x_star, rep.final_x)
    summary = {
        "input": input_id, "algo": setup.code, "condition": cond, "iterations": rep.iterations,
        "sc": spectral_convergence(R, rep.final_x, plan),
        "snr_db": snr_db, "shift": al.shift if al else None, "diverged": diverged,
        "floored_entries": rep.floored_entry_count, "wall_ms": round(rep.wall_time * 1e3, 3),
    }
    if args.trace:
        trace_path = out.with_suffix(".trace.csv")
        trace_path.write_text("iteration,objective\n" + "".join(f"{t},{j!r}\n" for t, j in rep.loss_trace))
        summary["trace"] = str(trace_path)
    print(json.dumps(summary, indent=2))
    return EXIT_DIVERGED if diverged else EXIT_OK


def _cmd_metrics(args) -> int:
    ref = load_wav(args.reference, expected_rate=args.sample_rate)
    est = load_wav(args.estimate, expected_rate=ref.sample_rate)
    if len(ref) != len(est):
        raise InvalidInputError(f"length mismatch: {len(ref)} vs {len(est)} samples")
    plan = make_plan(len(ref), args.win_len, args.hop)
    x_star, x = plan.pad(ref.samples), plan.pad(est.samples)
    snr_db, al = align_and_snr(x_star, x)
    out = {
        "sc": spectral_convergence(measure(x_star, plan, 1), x, plan),
        "snr_db": snr_db,
        "shift": al.shift if al else None,
        "scale": al.scale if al else None,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    handlers = {"reconstruct": _cmd_reconstruct, "bench": _cmd_bench, "metrics": _cmd_metrics}
    try:
        return handlers[args.command](args)
    except (InvalidConfigurationError, InvalidInputError, UnsupportedOperationError, DomainError) as exc:
        print(f"bregpr: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WavError, OSError) as exc:
        print(f"bregpr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
