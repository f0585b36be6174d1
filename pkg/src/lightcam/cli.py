"""Command-line interface: init, extract, score, eval, profile, bench.

Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
stderr; results go to files or stdout.

BLAS/OpenMP pools are pinned to one thread before numpy loads (the vars
below are read at library load time), so ``bench`` measures single-thread
inference and extraction is byte-reproducible across runs.
"""

import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "VECLIB_MAXIMUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .embedder import (extract_embedding, format_embedding_line, read_embeddings,
                       write_embeddings)
from .errors import LightCamError
from .metrics import (compute_eer, compute_min_dcf, cosine_score, pair_trial_scores,
                      read_scores, read_trials, write_scores)
from .model import Model, ModelConfig, config_from_text, init_weights
from .profiler import measure_rtf, profile_model, render_report, report_as_dict
from .weights import WeightStore

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

REFERENCE_RTF = 0.017  # reported single-thread CPU figure for this architecture


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    data errors and use 1 for usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="lightcam",
                     description="Speaker-embedding extraction, scoring, and "
                                 "complexity profiling.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("init", help="initialize a weight file")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    p.add_argument("--out", required=True, help="output weight file")
    p.add_argument("--config", default=None,
                   help="flat 'key = value' configuration file (defaults otherwise)")
    p.add_argument("--override", action="store_true",
                   help="accept a configuration that deviates from the pinned constants")
    p.add_argument("--embedding-dim", type=int, default=None)
    p.add_argument("--fnn-hidden", type=int, default=None)
    p.add_argument("--cam-bottleneck", type=int, default=None)
    p.add_argument("--segment-length", type=int, default=None)
    p.add_argument("--growth", type=int, default=None)

    p = sub.add_parser("extract", help="extract speaker embeddings from WAV files")
    p.add_argument("model", help="weight file from `init`")
    p.add_argument("wavs", nargs="+", metavar="WAV", help="16 kHz/16-bit/mono PCM WAV files")
    p.add_argument("--out", default=None, help="embedding file (default: stdout)")

    p = sub.add_parser("score", help="cosine-score trial pairs from an embedding file")
    p.add_argument("embeddings", help="embedding file from `extract`")
    p.add_argument("--trials", required=True, help="trial list: enroll test target|nontarget")
    p.add_argument("--out", default=None, help="score file (default: stdout)")

    p = sub.add_parser("eval", help="EER / MinDCF from a score file and a trial list")
    p.add_argument("--scores", required=True, help="score file from `score`")
    p.add_argument("--trials", required=True, help="trial list with target|nontarget labels")
    p.add_argument("--p-target", type=float, default=0.01)

    p = sub.add_parser("profile", help="parameter and FLOPs breakdown")
    p.add_argument("model", help="weight file")
    p.add_argument("--frames", type=int, default=100,
                   help="frame count the FLOPs are priced for (default 100 = 1 s)")
    p.add_argument("--out", default=None, help="text report file (default: stdout)")
    p.add_argument("--json", dest="json_out", default=None,
                   help="machine-readable report file")

    p = sub.add_parser("bench", help="single-thread real-time-factor benchmark")
    p.add_argument("model", help="weight file")
    p.add_argument("--duration", type=float, default=10.0,
                   help="synthetic waveform length in seconds (default 10)")
    p.add_argument("--reps", type=int, default=3, help="timed repetitions (default 3)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; only 1 is supported")
    p.add_argument("--seed", type=int, default=0, help="waveform PRNG seed")
    return parser


def _config_from_args(args) -> ModelConfig:
    if args.config is not None:
        cfg = config_from_text(Path(args.config).read_text(encoding="utf-8"))
    else:
        cfg = ModelConfig()
    overrides = {name: getattr(args, name)
                 for name in ("embedding_dim", "fnn_hidden", "cam_bottleneck",
                              "segment_length", "growth")
                 if getattr(args, name) is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate(override=args.override)
    return cfg


def _cmd_init(args) -> int:
    cfg = _config_from_args(args)
    init_weights(cfg, seed=args.seed).save(args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_extract(args) -> int:
    model = Model.from_file(args.model)
    embeddings = []
    seen = set()
    for wav in args.wavs:
        utt = Path(wav).stem
        if utt in seen:
            raise LightCamError(f"duplicate utterance id {utt!r} among inputs")
        seen.add(utt)
        embeddings.append(extract_embedding(Path(wav).read_bytes(), model, utterance=utt))
    if args.out:
        write_embeddings(args.out, embeddings)
    else:
        for emb in embeddings:
            print(format_embedding_line(emb))
    return EXIT_OK


def _cmd_score(args) -> int:
    emb = read_embeddings(args.embeddings)
    rows = []
    for enroll, test, _ in read_trials(args.trials):
        for utt in (enroll, test):
            if utt not in emb:
                raise LightCamError(f"no embedding for utterance {utt!r}")
        rows.append((enroll, test, cosine_score(emb[enroll], emb[test])))
    if args.out:
        write_scores(args.out, rows)
    else:
        for enroll, test, score in rows:
            print(f"{enroll} {test} {score:.6f}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    trials = read_trials(args.trials)
    t = pair_trial_scores(trials, read_scores(args.scores))
    eer, eer_thr = compute_eer(t)
    min_dcf, dcf_thr = compute_min_dcf(t, p_target=args.p_target)
    print(f"EER {eer:.6f} (threshold {eer_thr:.6f})")
    print(f"MinDCF(p_target={args.p_target},c_miss=1,c_fa=1) {min_dcf:.6f} "
          f"(threshold {dcf_thr:.6f})")
    return EXIT_OK


def _cmd_profile(args) -> int:
    store = WeightStore.load(args.model)
    cfg = ModelConfig()
    report = profile_model(cfg, store, frames=args.frames)
    text = render_report(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report_as_dict(report), indent=1),
                                       encoding="utf-8")
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.threads != 1:
        raise LightCamError("bench supports --threads 1 only (single-thread contract)")
    if args.duration < 0.5:
        raise LightCamError("bench needs at least 0.5 s of audio")
    from .audio import SAMPLE_RATE, Waveform, compute_fbank

    model = Model.from_file(args.model)
    rng = np.random.default_rng(args.seed)
    n = int(args.duration * SAMPLE_RATE)
    wave = Waveform(rng.uniform(-0.5, 0.5, n).astype(np.float32))
    feats = compute_fbank(wave)

    result = measure_rtf(lambda: model.embed(feats), duration_s=args.duration,
                         repetitions=args.reps)
    lo, hi = result.spread
    print(f"duration: {args.duration:.1f} s synthetic audio ({feats.num_frames} frames)")
    print(f"repetitions: {args.reps} (after 1 warm-up)")
    print(f"rtf median: {result.median:.4f}   min: {lo:.4f}   max: {hi:.4f}")
    print(f"reference rtf: {REFERENCE_RTF} "
          "(reported single-thread CPU figure for this architecture; "
          "hardware-dependent, not asserted)")
    return EXIT_OK


_COMMANDS = {
    "init": _cmd_init,
    "extract": _cmd_extract,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "profile": _cmd_profile,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (LightCamError, ValueError) as e:
        print(f"lightcam {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"lightcam {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
