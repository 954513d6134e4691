"""Command-line harness: training, evaluation, one-off file augmentation,
the two experiment protocols, and plot emission.

Exit codes: 0 success, 2 usage error, 1 runtime error. All pipelines are
single-threaded and seeded, so --deterministic is the only mode there is;
the flag is accepted for interface stability.
"""

import argparse
import json
import math
import sys
from pathlib import Path

from .audio import SAMPLE_RATE, read_wav, resample, write_wav
from .augment import SnrSpec, VocodeSpec, mix_at_snr, noise_vocode, sine_wave_speech
from .data import default_provider, load_manifest
from .experiments import (
    DEFAULT_SNRS_DB,
    read_results_csv,
    run_augment,
    run_babble,
    write_results_csv,
)
from .model import JointModel, ModelConfig, load_checkpoint, save_checkpoint
from .svgplot import render_plot
from .train import TrainSettings, evaluate, train, write_metrics_csv

MODEL_FIELDS = ("n_layers", "d_ff", "n_heads", "d_model", "d_attn",
                "vocab_size", "n_speakers", "use_speaker_branch", "dropout")
TRAINING_FIELDS = ("lr", "warmup_steps", "clip_norm", "batch_size",
                   "heldout_fraction", "eval_every_epochs", "max_steps", "stop_at_cer")


def load_config(path, ablation=False):
    """Canonical JSON config: {"model": {...}, "training": {...}}.

    Anything omitted falls back to the Variant 2 architecture and the
    declared training defaults.
    """
    model_kw = {}
    train_kw = {}
    if path is not None:
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - {"model", "training"}
        if unknown:
            raise ValueError(f"{path}: unknown config sections {sorted(unknown)}")
        for key, value in raw.get("model", {}).items():
            if key not in MODEL_FIELDS:
                raise ValueError(f"{path}: unknown model field {key!r}")
            model_kw[key] = value
        for key, value in raw.get("training", {}).items():
            if key not in TRAINING_FIELDS:
                raise ValueError(f"{path}: unknown training field {key!r}")
            train_kw[key] = value
    if ablation:
        model_kw["d_model"] = 512
        model_kw["use_speaker_branch"] = False
    model_kw.setdefault("n_layers", 4)
    model_kw.setdefault("d_ff", 512)
    return ModelConfig(**model_kw), TrainSettings(**train_kw)


def _snr_value(raw: str) -> float:
    if raw.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid SNR {raw!r} (number of dB, or 'inf')")


def _read_canonical(path):
    w = read_wav(path)
    if w.sample_rate != SAMPLE_RATE:
        w = resample(w, SAMPLE_RATE)
    return w


# -- subcommand handlers ------------------------------------------------


def cmd_train(args):
    config, settings = load_config(args.config, ablation=args.ablation)
    manifest = load_manifest(args.manifest)
    if config.n_speakers < manifest.n_speakers:
        raise ValueError(
            f"config allows {config.n_speakers} speakers but the manifest has "
            f"{manifest.n_speakers}; set model.n_speakers in --config"
        )
    result = train(config, manifest, epochs=args.epochs, seed=args.seed,
                   settings=settings)
    save_checkpoint(result.model, args.out)
    if args.metrics_log:
        write_metrics_csv(result.log, args.metrics_log)
    if result.log:
        last = result.log[-1]
        sra = "n/a" if last["heldout_sra"] is None else f"{last['heldout_sra']:.4f}"
        print(f"trained {result.steps} steps; best held-out CER {result.best_cer:.4f}; "
              f"final CER {last['heldout_cer']:.4f}, SRA {sra}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_eval(args):
    model = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    cer_mean, sra = evaluate(model, manifest, default_provider, seed=args.seed)
    sra_text = "" if sra is None else f" sra={sra:.6f}"
    print(f"cer={cer_mean:.6f}{sra_text}")
    return 0


def cmd_augment_wav(args, parser):
    modes = [args.snr is not None, args.vocode_channels is not None, args.sinewave]
    if sum(modes) != 1:
        parser.error("choose exactly one of --snr, --vocode-channels, --sinewave")
    w = _read_canonical(args.input)
    if args.snr is not None:
        spec = SnrSpec(args.snr)
        if spec.is_clean:
            out = w
        else:
            if args.noise is None:
                parser.error("--snr with a finite value requires --noise")
            noise = _read_canonical(args.noise)
            out = mix_at_snr(w, noise, spec).waveform
    elif args.vocode_channels is not None:
        out = noise_vocode(w, VocodeSpec(args.vocode_channels), rng_seed=args.seed)
    else:
        out = sine_wave_speech(w)
    write_wav(args.out, out)
    print(f"wrote {args.out}")
    return 0


def cmd_experiment_babble(args):
    model = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    snrs = DEFAULT_SNRS_DB if args.snrs is None else tuple(
        _snr_value(s) for s in args.snrs.split(","))
    excluded = args.exclude_speakers.split(",") if args.exclude_speakers else None
    rows, pair_set = run_babble(model, manifest, n_pairs=args.pairs,
                                snrs=snrs, seed=args.seed,
                                exclude_speakers=excluded)
    write_results_csv(rows, args.out)
    if args.pairs_log:
        with open(args.pairs_log, "w") as fh:
            for fg, bgs in pair_set.pairs:
                fh.write(json.dumps({"foreground": fg, "background": list(bgs)}) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_experiment_augment(args):
    model = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    rows, sampled = run_augment(model, manifest, vocode_n=args.vocode_n,
                                sine_n=args.sine_n, seed=args.seed)
    write_results_csv(rows, args.out)
    if args.sample_log:
        Path(args.sample_log).write_text(json.dumps(sampled) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_plot(args):
    rows = read_results_csv(args.table)
    render_plot(rows, args.out)
    print(f"wrote {args.out}")
    return 0


# -- parser wiring -------------------------------------------------------


GLOBAL_DEFAULTS = {"seed": 0, "config": None, "deterministic": False}


def _global_flags():
    """Shared flags, accepted both before and after the subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="global random seed (default 0)")
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS,
                        help="JSON config mirroring the model and training defaults")
    common.add_argument("--deterministic", action="store_true",
                        default=argparse.SUPPRESS,
                        help="request fully deterministic execution (always on)")
    return common


def build_parser():
    common = _global_flags()
    parser = argparse.ArgumentParser(
        prog="jointasr",
        description="Joint speech + speaker recognition harness with "
                    "adversarial audio evaluation.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(owner, name, **kw):
        return owner.add_parser(name, parents=[common], **kw)

    p = add_parser(sub, "train", help="train a model on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path (.jck1)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--ablation", action="store_true",
                   help="speech-only variant: no speaker embedding or head")
    p.add_argument("--metrics-log", default=None, help="CSV metrics log path")
    p.set_defaults(func=cmd_train)

    p = add_parser(sub, "eval", help="clean evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_eval)

    p = add_parser(sub, "augment", help="one-off file augmentation")
    aug_sub = p.add_subparsers(dest="augment_target", required=True)
    pw = add_parser(aug_sub, "wav", help="augment a single WAV file")
    pw.add_argument("input", help="input WAV path")
    pw.add_argument("--out", required=True)
    pw.add_argument("--snr", type=_snr_value, default=None,
                    help="mix noise at this SNR in dB ('inf' passes through)")
    pw.add_argument("--noise", default=None, help="noise WAV for --snr")
    pw.add_argument("--vocode-channels", type=int, default=None)
    pw.add_argument("--sinewave", action="store_true")
    pw.set_defaults(func=lambda a: cmd_augment_wav(a, pw))

    p = add_parser(sub, "experiment", help="run an evaluation protocol")
    exp_sub = p.add_subparsers(dest="experiment_name", required=True)
    pb = add_parser(exp_sub, "babble", help="8-talker babble SNR sweep")
    pb.add_argument("--checkpoint", required=True)
    pb.add_argument("--manifest", required=True)
    pb.add_argument("--pairs", type=int, default=1000)
    pb.add_argument("--snrs", default=None,
                    help="comma-separated SNR grid in dB (default: -15..20 step 5 plus inf)")
    pb.add_argument("--out", required=True, help="results CSV path")
    pb.add_argument("--pairs-log", default=None,
                    help="JSONL log of the sampled foreground/background identities")
    pb.add_argument("--exclude-speakers", default=None,
                    help="comma-separated speaker_ids barred from babble backgrounds")
    pb.set_defaults(func=cmd_experiment_babble)
    pa = add_parser(exp_sub, "augment", help="noise-vocoded and sine-wave speech")
    pa.add_argument("--checkpoint", required=True)
    pa.add_argument("--manifest", required=True)
    pa.add_argument("--vocode-n", type=int, default=1000)
    pa.add_argument("--sine-n", type=int, default=795)
    pa.add_argument("--out", required=True)
    pa.add_argument("--sample-log", default=None,
                    help="JSON log of the sampled excerpt ids per condition")
    pa.set_defaults(func=cmd_experiment_augment)

    p = add_parser(sub, "plot", help="render a results CSV as an SVG line plot")
    p.add_argument("table", help="results CSV produced by an experiment")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
