"""Command-line entry point: denoise, evaluate, synth and sweep.

Exit codes: 0 success, 2 input error, 3 processing error, 4 degraded sweep.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from rirdenoise import __version__
from rirdenoise.acoustics.service import (
    DEFAULT_RANGE_DB,
    THIRD_OCTAVE_CENTERS,
    band_dt60,
    dynamic_improvement,
    schroeder_edc,
)
from rirdenoise.audio import SUPPORTED_SUBTYPES, read_wav, write_wav
from rirdenoise.config import settings
from rirdenoise.exceptions import (
    InputError,
    PlanError,
    ProcessingError,
    SignalLengthError,
    WaveletLevelError,
)
from rirdenoise.manifest import RunManifest, write_manifest
from rirdenoise.pipeline.schemas import PipelineConfig
from rirdenoise.pipeline.service import denoise, denoise_baseline
from rirdenoise.sparsedl.service import dump_artifact
from rirdenoise.synth.aggregation import export_summary_xlsx, summarize
from rirdenoise.synth.schemas import ModalSpec, SweepPlan
from rirdenoise.synth.service import gen_modal, gen_shaped_noise, mix_at_snr
from rirdenoise.synth.sweep import (
    run_sweep,
    trial_indices,
    trial_signals,
    write_records_csv,
    write_records_json,
)

logger = logging.getLogger("rirdenoise")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PROCESSING = 3
EXIT_DEGRADED = 4

EDC_COLUMNS = ("sample", "time_s", "edc_db")
DT60_COLUMNS = ("file", "band_hz", "dt60_s", "fit_r2", "fit_upper_db", "fit_lower_db", "error")


def _load_model(model, path: Path, what: str, error=InputError):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise error(f"Cannot read {what} file {path}: {e}") from e
    return model.model_validate_json(text)


def load_config(path: Path | None) -> PipelineConfig:
    return PipelineConfig() if path is None else _load_model(PipelineConfig, path, "config")


def load_plan(path: Path | None) -> SweepPlan:
    return SweepPlan.default() if path is None else _load_model(SweepPlan, path, "plan", PlanError)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\r\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def _threads(args: argparse.Namespace) -> int:
    return max(1, args.threads if args.threads is not None else settings.THREADS)


# ── Subcommands ────────────────────────────────────────────────────────────


def cmd_denoise(args: argparse.Namespace) -> int:
    signal, subtype = read_wav(args.input)
    config = load_config(args.config)
    if args.dump_dictionary is not None and (args.baseline or not config.enable_dictionary_learning):
        raise InputError("--dump-dictionary needs dictionary learning; drop --baseline and enable it in the config")
    run = denoise_baseline if args.baseline else denoise
    try:
        out, report = run(signal, config, workers=_threads(args))
    except (WaveletLevelError, SignalLengthError) as e:
        # the file was readable; the configured transform does not fit it
        raise ProcessingError(str(e)) from e
    output = write_wav(args.output, out, args.subtype or subtype)
    arguments = {"baseline": args.baseline, "subtype": args.subtype or subtype}
    if args.dump_dictionary is not None:
        dump_artifact(args.dump_dictionary, report.dictionary, report.code)
        write_manifest(args.dump_dictionary, RunManifest(
            command="denoise",
            arguments=arguments,
            config=config.model_dump(mode="json"),
            inputs=[str(args.input)],
            outputs=[str(args.dump_dictionary)],
            seed=config.seed,
        ))
        logger.info("Wrote %s", args.dump_dictionary)
    write_manifest(output, RunManifest(
        command="denoise",
        arguments=arguments,
        config=config.model_dump(mode="json"),
        inputs=[str(args.input)],
        outputs=[str(output)],
        seed=config.seed,
        report=report.model_dump(mode="json"),
    ))
    logger.info("Wrote %s", output)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    if len(args.inputs) not in (1, 2):
        raise InputError("evaluate takes one file (metrics) or two files (before, after)")
    signals = [read_wav(p)[0] for p in args.inputs]
    range_db = tuple(args.range_db)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [str(p) for p in args.inputs]
    arguments = {"range_db": list(range_db), "bands": list(args.bands)}

    edc = schroeder_edc(signals[0])
    times = edc.times()
    edc_path = _write_csv(out_dir / "edc.csv", EDC_COLUMNS, [
        {"sample": i, "time_s": repr(float(times[i])), "edc_db": repr(float(v))}
        for i, v in enumerate(edc.values_db)
    ])

    rows = []
    for path, signal in zip(args.inputs, signals):
        for band in band_dt60(signal, tuple(args.bands), range_db):
            rows.append({
                "file": Path(path).name,
                "band_hz": repr(band.center_hz),
                "dt60_s": repr(band.dt60_seconds) if band.estimate else "",
                "fit_r2": repr(band.estimate.fit_r2) if band.estimate else "",
                "fit_upper_db": repr(band.estimate.fit_range_db[0]) if band.estimate else repr(range_db[0]),
                "fit_lower_db": repr(band.estimate.fit_range_db[1]) if band.estimate else repr(range_db[1]),
                "error": band.error or "",
            })
    dt60_path = _write_csv(out_dir / "dt60.csv", DT60_COLUMNS, rows)
    outputs = [edc_path, dt60_path]

    if len(signals) == 2:
        improvement = dynamic_improvement(signals[0], signals[1])
        comparison = out_dir / "comparison.json"
        comparison.write_text(json.dumps({"dynamic_improvement_db": improvement}, indent=2))
        outputs.append(comparison)
        print(f"dynamic improvement: {improvement:.2f} dB")

    for path in outputs:
        write_manifest(path, RunManifest(
            command="evaluate", arguments=arguments, inputs=inputs, outputs=[str(path)]
        ))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.plan is not None:
        plan = load_plan(args.plan)
        plan_json = plan.model_dump(mode="json")
        for fi, si, ni in trial_indices(plan):
            _, noisy = trial_signals(plan, fi, si, ni)
            path = write_wav(out_dir / f"trial_f{fi}_s{si}_n{ni}.wav", noisy, args.subtype)
            write_manifest(path, RunManifest(
                command="synth",
                arguments={"factor_index": fi, "seed_index": si, "snr_index": ni},
                plan=plan_json, outputs=[str(path)], seed=plan.seed,
            ))
        logger.info("Wrote %d trial signals to %s", plan.trial_count, out_dir)
        return EXIT_OK

    spec = _load_model(ModalSpec, args.spec, "spec") if args.spec else ModalSpec.default()
    signal = gen_modal(spec)
    arguments: dict = {}
    if args.snr is not None:
        seed = args.seed if args.seed is not None else settings.DEFAULT_SEED
        noise = gen_shaped_noise(len(signal), signal.sample_rate, seed)
        signal = mix_at_snr(signal, noise, args.snr)
        arguments = {"snr_db": args.snr, "noise_seed": seed}
    path = write_wav(out_dir / "modal.wav", signal, args.subtype)
    write_manifest(path, RunManifest(
        command="synth",
        arguments={**arguments, "spec": spec.model_dump(mode="json")},
        outputs=[str(path)],
        seed=arguments.get("noise_seed"),
    ))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    config = load_config(args.config)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = run_sweep(plan, config, workers=_threads(args))
    summary = summarize(records)
    outputs = [
        write_records_csv(records, out_dir / "records.csv"),
        write_records_json(records, out_dir / "records.json"),
    ]
    summary_path = out_dir / "summary.json"
    summary_path.write_text(summary.model_dump_json(indent=2))
    outputs.append(summary_path)
    if args.xlsx:
        outputs.append(Path(export_summary_xlsx(summary, out_dir / "summary.xlsx")))

    for path in outputs:
        write_manifest(path, RunManifest(
            command="sweep",
            config=config.model_dump(mode="json"),
            plan=plan.model_dump(mode="json"),
            outputs=[str(path)],
            seed=plan.seed,
        ))

    print(f"{summary.succeeded}/{summary.trials} trials succeeded")
    if summary.success_rate < settings.SWEEP_MIN_SUCCESS:
        logger.error(
            "Sweep degraded: success rate %.1f%% below %.1f%%",
            100 * summary.success_rate, 100 * settings.SWEEP_MIN_SUCCESS,
        )
        return EXIT_DEGRADED
    return EXIT_OK


# ── Parser ─────────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rirdenoise", description="Full-band room impulse response denoising."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: RIRDENOISE_THREADS)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise a mono WAV room impulse response")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("-c", "--config", type=Path, default=None, help="pipeline config JSON")
    p.add_argument("--baseline", action="store_true", help="thresholding only")
    p.add_argument("--subtype", choices=SUPPORTED_SUBTYPES, default=None,
                   help="output sample format (default: same as input)")
    p.add_argument("--dump-dictionary", type=Path, default=None, metavar="PATH",
                   help="also write the learned dictionary and sparse code as JSON")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("evaluate", help="EDC, per-band DT60 and dynamic improvement")
    p.add_argument("inputs", type=Path, nargs="+", help="one file, or before and after")
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    p.add_argument("--range-db", type=float, nargs=2, default=list(DEFAULT_RANGE_DB),
                   metavar=("UPPER", "LOWER"))
    p.add_argument("--bands", type=float, nargs="+", default=list(THIRD_OCTAVE_CENTERS))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate modal test signals")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--spec", type=Path, default=None, help="modal spec JSON")
    source.add_argument("--plan", type=Path, default=None, help="sweep plan JSON (one WAV per trial)")
    p.add_argument("--snr", type=float, default=None, help="mix shaped noise at this SNR (dB)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--subtype", choices=SUPPORTED_SUBTYPES, default="FLOAT")
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="run the synthetic SNR sweep")
    p.add_argument("--plan", type=Path, default=None, help="sweep plan JSON (default: full grid)")
    p.add_argument("-c", "--config", type=Path, default=None)
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    p.add_argument("--xlsx", action="store_true", help="also write summary.xlsx")
    p.set_defaults(func=cmd_sweep)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = settings.LOG_LEVEL
    if args.verbose:
        level = "DEBUG"
    elif args.quiet:
        level = "WARNING"
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: invalid {e.title}:", file=sys.stderr)
        for err in e.errors():
            field = ".".join(str(p) for p in err["loc"]) or "(root)"
            print(f"  {field}: {err['msg']}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ProcessingError as e:
        print(f"error: processing failed: {e}", file=sys.stderr)
        return EXIT_PROCESSING
    except Exception as e:
        logger.exception("Unexpected failure in %s", args.command)
        print(f"error: processing failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PROCESSING
