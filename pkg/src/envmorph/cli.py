"""envmorph command line: extract, synth, train-ae, train-mapper, morph, bench, stimuli.

Exit codes: 0 success, 1 I/O failure, 2 usage or bad input, 3 numeric failure,
4 expectation failure (bench --strict). A config file (INI sections named
after subcommands) can supply defaults; explicit flags win. The environment
variable ENVMORPH_SEED overrides the built-in default seed of 0.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .envelope import (
    Envelope,
    ExtractionConfig,
    extract_envelope,
    load_envelope,
    rmse,
    save_envelope,
)
from .errors import EnvMorphError, NumericFailure
from .fileio import atomic_write_text
from .engines import MorphEngineKind, morph, parse_alpha_map
from .bench import (
    ENGINE_ORDER,
    SuiteConfig,
    SuiteKind,
    check_orderings,
    default_expectations,
    emit_table,
    run_suite,
    save_results,
)
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.train import TrainConfig, train_autoencoder, train_mapper
from .seeding import NS_AE_CORPUS
from .stimuli import (
    ToneSequenceSpec,
    count_bursts,
    midpoint_tone_spec,
    render_sequence_morph,
    render_tone_sequence,
)
from .synth import (
    AXIS_NAMES,
    DatasetConfig,
    generate_dataset,
    generate_envelope_corpus,
    iter_dataset_tuples,
    load_dataset,
)
from .wavio import read_wav, write_wav

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_EXPECTATION = 4


def _default_seed() -> int:
    env = os.environ.get("ENVMORPH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise EnvMorphError(f"ENVMORPH_SEED must be an integer, got {env!r}")
    return 0


def _parse_combos(spec: str):
    """Parse an axes spec: 'single', 'compositional', or 'a+b;c' lists."""
    if spec == "single":
        return tuple((n,) for n in AXIS_NAMES)
    if spec == "compositional":
        from .bench import default_combos

        return default_combos(SuiteKind.COMPOSITIONAL)
    combos = []
    for part in spec.split(";"):
        part = part.strip()
        if part:
            combos.append(tuple(axis.strip() for axis in part.split("+")))
    if not combos:
        raise EnvMorphError(f"empty axes spec {spec!r}")
    return tuple(combos)


# --- subcommands -------------------------------------------------------------


def cmd_extract(args) -> int:
    clip, downmixed = read_wav(args.input)
    if downmixed:
        print("note: downmixed stereo to mono", file=sys.stderr)
    cfg = ExtractionConfig(
        lowpass_cutoff=args.cutoff, filter_order=args.order, clip_duration=args.duration
    )
    env = extract_envelope(clip, cfg)
    save_envelope(env, args.output)
    handled = "padded" if clip.duration < cfg.clip_duration else (
        "truncated" if clip.duration > cfg.clip_duration else "exact"
    )
    print(
        f"wrote {args.output}: peak {env.frames.max():.4f}, mean {env.frames.mean():.4f},"
        f" input {clip.duration:.2f}s ({handled} to {cfg.clip_duration:g}s)"
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = DatasetConfig(
        count=args.count,
        base_seed=args.seed,
        combos=_parse_combos(args.axes),
        alpha_mode=args.alpha_mode,
        kernel_name=args.kernel,
    )
    manifest = generate_dataset(cfg, args.out)
    print(f"wrote {args.count} tuples to {manifest}")
    return EXIT_OK


def _train_config(args, **overrides) -> TrainConfig:
    base = dict(
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        lr_schedule=args.schedule,
    )
    base.update(overrides)
    return TrainConfig(**base)


def _write_loss_csv(path, log: np.ndarray) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["step", "loss"])
    for step, loss in log:
        writer.writerow([int(step), repr(float(loss))])
    atomic_write_text(path, buf.getvalue())


def cmd_train_ae(args) -> int:
    if args.corpus:
        tuples = load_dataset(args.corpus)
        frames = np.concatenate(
            [np.stack([t.e_a.frames, t.e_b.frames, t.e_morph.frames]) for t in tuples]
        )
    else:
        frames = generate_envelope_corpus(args.generate, args.seed, NS_AE_CORPUS)
    cfg = _train_config(args, steps=args.steps, loss=args.loss)
    model, log = train_autoencoder(frames, cfg)
    save_checkpoint(model, args.out)
    if args.log:
        _write_loss_csv(args.log, log)
    print(f"trained autoencoder on {frames.shape[0]} envelopes for {args.steps} steps")
    print(f"final loss {log[-1, 1]:.5f}; checkpoint {args.out}")
    return EXIT_OK


def cmd_train_mapper(args) -> int:
    autoencoder = load_checkpoint(args.ae, expected_kind="autoencoder")
    if args.dataset:
        tuples = load_dataset(args.dataset)
    else:
        cfg = DatasetConfig(count=args.generate, base_seed=args.seed)
        tuples = list(iter_dataset_tuples(cfg))
    cfg = _train_config(args, epochs=args.epochs, loss="rmse")
    mapper, log, epoch_means = train_mapper(tuples, autoencoder, cfg)
    save_checkpoint(mapper, args.out)
    if args.log:
        _write_loss_csv(args.log, log)
    print(f"trained mapper on {len(tuples)} tuples for {args.epochs} epochs")
    print(f"epoch losses: {' '.join(f'{v:.5f}' for v in epoch_means)}")
    print(f"checkpoint {args.out}")
    return EXIT_OK


def _load_input_envelope(path, do_extract: bool) -> Envelope:
    if do_extract:
        clip, downmixed = read_wav(path)
        if downmixed:
            print("note: downmixed stereo to mono", file=sys.stderr)
        return extract_envelope(clip, ExtractionConfig())
    return load_envelope(path)


def cmd_morph(args) -> int:
    kind = MorphEngineKind(args.engine)
    e_a = _load_input_envelope(args.a, args.extract)
    e_b = _load_input_envelope(args.b, args.extract)
    autoencoder = load_checkpoint(args.ae, "autoencoder") if args.ae else None
    mapper = load_checkpoint(args.mapper, "mapper") if args.mapper else None
    alpha_map = parse_alpha_map(args.alpha_map) if args.alpha_map else None
    result = morph(
        kind, e_a, e_b, args.alpha, autoencoder=autoencoder, mapper=mapper, alpha_map=alpha_map
    )
    save_envelope(result, args.out)
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["frame", "a", "b", "morph"])
        for i in range(result.frames.size):
            writer.writerow([i, repr(float(e_a.frames[i])), repr(float(e_b.frames[i])), repr(float(result.frames[i]))])
        atomic_write_text(args.csv, buf.getvalue())
    print(f"{args.engine} morph at alpha={args.alpha:g} -> {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    engines = tuple(e.strip() for e in args.engines.split(",") if e.strip())
    suite = SuiteKind(args.suite)
    cfg = SuiteConfig(
        kind=suite,
        count_per_cell=args.count,
        seed=args.seed,
        engines=engines,
        alpha_mode=args.alpha_mode,
        templates=tuple(t.strip() for t in args.templates.split(",") if t.strip()),
    )
    autoencoder = load_checkpoint(args.ae, "autoencoder") if args.ae else None
    mapper = load_checkpoint(args.mapper, "mapper") if args.mapper else None
    result = run_suite(cfg, autoencoder=autoencoder, mapper=mapper)
    print(emit_table(result, "markdown"))
    if args.out:
        paths = save_results(result, args.out)
        print(f"reports: {paths['markdown']}, {paths['csv']}, {paths['json']}")

    failures = 0
    if args.expectations:
        if args.expectations == "default":
            expectations = default_expectations(suite, engines)
        else:
            expectations = Path(args.expectations).read_text(encoding="utf-8")
        verdicts = check_orderings(result, expectations)
        for v in verdicts:
            status = "PASS" if v["passed"] else "FAIL"
            print(f"[{status}] {v['expectation']}  ({v['lhs']:.4f} vs {v['rhs']:.4f})")
        failures = sum(not v["passed"] for v in verdicts)
    if args.strict and failures:
        print(f"{failures} expectation(s) failed", file=sys.stderr)
        return EXIT_EXPECTATION
    return EXIT_OK


def _tone_spec(args, prefix: str) -> ToneSequenceSpec:
    return ToneSequenceSpec(
        quantity=getattr(args, f"{prefix}_quantity"),
        onset=getattr(args, f"{prefix}_onset"),
        ioi=getattr(args, f"{prefix}_ioi"),
        tone_freq=args.tone_freq,
        tone_dur=args.tone_dur,
        total_dur=args.total_dur,
        noise_level=args.noise_level,
    )


def cmd_stimuli(args) -> int:
    spec_a = _tone_spec(args, "a")
    spec_b = _tone_spec(args, "b")
    spec_mid = midpoint_tone_spec(spec_a, spec_b)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clips = {
        "input_a.wav": render_tone_sequence(spec_a, args.sr, args.seed),
        "input_b.wav": render_tone_sequence(spec_b, args.sr, args.seed + 1),
        "midpoint.wav": render_tone_sequence(spec_mid, args.sr, args.seed + 2),
        "sequence.wav": render_sequence_morph(spec_a, spec_b, args.sr, args.seed + 3),
    }
    for name, clip in clips.items():
        write_wav(out / name, clip.samples, clip.sample_rate)
        bursts = count_bursts(clip.samples, clip.sample_rate) if args.noise_level == 0 else "-"
        print(f"wrote {out / name} ({clip.duration:g}s, bursts: {bursts})")
    print(
        f"midpoint parameters: quantity {spec_mid.quantity}, onset {spec_mid.onset:g}s,"
        f" ioi {spec_mid.ioi:g}s"
    )
    return EXIT_OK


# --- parser / config wiring ---------------------------------------------------


def _build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="envmorph", description="temporal envelope morphing toolkit"
    )
    parser.add_argument("--version", action="version", version=f"envmorph {__version__}")
    parser.add_argument("--config", help="INI config file with per-subcommand sections")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    converters: dict[str, dict[str, type]] = {}
    subparsers: dict[str, argparse.ArgumentParser] = {}

    def register(name, sp):
        converters[name] = {}
        subparsers[name] = sp

        def opt(flag, *, type=str, default=None, **kwargs):
            action = sp.add_argument(flag, type=type, default=default, **kwargs)
            converters[name][action.dest] = type
            return action

        return opt

    seed_default = _default_seed()

    sp = sub.add_parser("extract", help="extract a 2048-frame envelope from a WAV file")
    opt = register("extract", sp)
    sp.add_argument("input", help="input WAV (PCM16 or float32)")
    sp.add_argument("output", help="output .env1 path")
    opt("--cutoff", type=float, default=30.0, help="lowpass cutoff in Hz")
    opt("--order", type=int, default=4, help="Butterworth filter order")
    opt("--duration", type=float, default=10.0, help="pad/truncate input to this many seconds")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("synth", help="generate a rule-based morph tuple dataset")
    opt = register("synth", sp)
    opt("--out", default="dataset", help="output directory")
    opt("--count", type=int, default=1000)
    opt("--seed", type=int, default=seed_default)
    opt("--axes", default="single", help="'single', 'compositional' or 'a+b;c' list")
    opt("--alpha-mode", default="uniform", choices=["uniform", "grid"])
    opt("--kernel", default="gaussian", help="'gaussian' or 'template:<name>'")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train-ae", help="train the envelope autoencoder")
    opt = register("train-ae", sp)
    opt("--corpus", default=None, help="dataset manifest; its envelopes form the corpus")
    opt("--generate", type=int, default=10_000, help="or generate a synthetic corpus this big")
    opt("--steps", type=int, default=20_000)
    opt("--batch-size", type=int, default=64)
    opt("--lr", type=float, default=1e-3)
    opt("--schedule", default="cosine", choices=["cosine", "constant"])
    opt("--loss", default="rmse", choices=["l1", "rmse"])
    opt("--seed", type=int, default=seed_default)
    opt("--out", default="autoencoder.ckpt")
    opt("--log", default=None, help="write per-step loss CSV here")
    sp.set_defaults(func=cmd_train_ae)

    sp = sub.add_parser("train-mapper", help="train the twin mapper (frozen autoencoder)")
    opt = register("train-mapper", sp)
    opt("--ae", required=True, help="autoencoder checkpoint")
    opt("--dataset", default=None, help="tuple dataset manifest")
    opt("--generate", type=int, default=10_000, help="or generate single-axis tuples")
    opt("--epochs", type=int, default=10)
    opt("--batch-size", type=int, default=64)
    opt("--lr", type=float, default=1e-3)
    opt("--schedule", default="cosine", choices=["cosine", "constant"])
    opt("--seed", type=int, default=seed_default)
    opt("--out", default="mapper.ckpt")
    opt("--log", default=None)
    sp.set_defaults(func=cmd_train_mapper)

    sp = sub.add_parser("morph", help="morph two envelopes with a chosen engine")
    opt = register("morph", sp)
    sp.add_argument("--engine", required=True, choices=[k.value for k in MorphEngineKind])
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--a", required=True, help="input A (.env1, or WAV with --extract)")
    sp.add_argument("--b", required=True, help="input B")
    sp.add_argument("--out", required=True, help="output .env1")
    sp.add_argument("--extract", action="store_true", help="inputs are WAV files")
    opt("--ae", default=None, help="autoencoder checkpoint (embed-mix / learned)")
    opt("--mapper", default=None, help="mapper checkpoint (learned)")
    opt("--alpha-map", default=None, help="'identity' or 'gamma:<g>'")
    opt("--csv", default=None, help="write side-by-side frames CSV here")
    sp.set_defaults(func=cmd_morph)

    sp = sub.add_parser("bench", help="run a benchmark suite and emit reports")
    opt = register("bench", sp)
    sp.add_argument(
        "--suite", required=True, choices=[k.value for k in SuiteKind]
    )
    opt("--count", type=int, default=1000, help="tuples per cell")
    opt("--seed", type=int, default=seed_default)
    opt("--engines", default=",".join(ENGINE_ORDER))
    opt("--alpha-mode", default="grid", choices=["grid", "uniform"])
    opt("--templates", default="", help="naturalistic template names (default: all bundled)")
    opt("--ae", default=None)
    opt("--mapper", default=None)
    opt("--out", default=None, help="directory for results.json/report.csv/report.md")
    opt("--expectations", default=None, help="'default' or a file of ordering expectations")
    sp.add_argument("--strict", action="store_true", help="exit 4 if an expectation fails")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("stimuli", help="render tone-sequence stimuli (midpoint + sequence)")
    opt = register("stimuli", sp)
    sp.add_argument("--a-quantity", type=int, required=True)
    sp.add_argument("--a-onset", type=float, required=True)
    sp.add_argument("--a-ioi", type=float, required=True)
    sp.add_argument("--b-quantity", type=int, required=True)
    sp.add_argument("--b-onset", type=float, required=True)
    sp.add_argument("--b-ioi", type=float, required=True)
    opt("--tone-freq", type=float, default=440.0)
    opt("--tone-dur", type=float, default=0.15)
    opt("--total-dur", type=float, default=6.0)
    opt("--noise-level", type=float, default=0.01)
    opt("--sr", type=int, default=44100)
    opt("--seed", type=int, default=seed_default)
    opt("--out", default="stimuli")
    sp.set_defaults(func=cmd_stimuli)

    return parser, converters, subparsers


def _apply_config(subparsers, converters, argv):
    """Pre-read --config and install section values as subparser defaults."""
    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if not config_path:
        return
    ini = configparser.ConfigParser()
    if not ini.read(config_path):
        raise FileNotFoundError(config_path)
    command = next((t for t in argv if t in subparsers), None)
    if command is None or command not in ini:
        return
    defaults = {}
    for key, raw in ini[command].items():
        dest = key.replace("-", "_")
        conv = converters[command].get(dest, str)
        defaults[dest] = conv(raw)
    for action in subparsers[command]._actions:
        if action.dest in defaults:
            action.default = defaults[action.dest]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, converters, subparsers = _build_parser()
    try:
        _apply_config(subparsers, converters, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnvMorphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
