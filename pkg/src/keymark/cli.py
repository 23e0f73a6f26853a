"""Command-line entry point.

Subcommands cover the whole pipeline: keygen, train-lm, generate, attack,
detect, reference, sweep. Every command is a pure function of its flags and
input files; there is no hidden state, so reruns reproduce outputs exactly.

Token files are newline-delimited integers by default, or raw bytes with
--bytes (only meaningful for the 256-token byte vocabulary). Reference
corpora hold one text per line: raw bytes per line with --bytes, else
space-separated integers.

Exit codes: 0 success, 2 usage, 3 missing/unreadable file, 4 corrupt or
wrong-format file, 5 invalid or mismatched configuration, 1 unexpected
error. Errors print one structured line to stderr.
"""

import argparse
import csv
import sys

import numpy as np

from . import __version__
from .alignment import AlignmentCostSpec, TestStatisticConfig
from .attacks import crop, delete_attack, insert_attack, substitute_attack
from .detection import (
    DEFAULT_MIN_PROMPT,
    DEFAULT_RESAMPLES,
    build_reference,
    detect,
    detect_with_reference,
    load_reference,
    save_reference,
)
from .errors import (
    ConfigInvalid,
    ConfigMismatch,
    CorruptFile,
    KeymarkError,
    KindMismatch,
    ModelMissing,
    VersionMismatch,
)
from .experiments import VARIANTS, load_sweep_config, run_sweep
from .generation import generate, generate_hash, shift_generate
from .keys import EXP, ITS, key_generate, load_key, save_key
from .lm import load_model, markov_train

DEFAULT_N = 256
DEFAULT_VOCAB = 256

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_FORMAT = 4
EXIT_BAD_CONFIG = 5

_FORMAT_ERRORS = (CorruptFile, VersionMismatch, KindMismatch)


def read_tokens(path, raw_bytes=False) -> np.ndarray:
    """One token sequence from a file (int lines, or raw bytes)."""
    if raw_bytes:
        with open(path, "rb") as fh:
            return np.frombuffer(fh.read(), dtype=np.uint8).astype(np.int64)
    with open(path) as fh:
        try:
            return np.asarray(
                [int(line) for line in fh.read().split()], dtype=np.int64
            )
        except ValueError as exc:
            raise CorruptFile(f"{path} is not a newline-delimited integer file: {exc}") from exc


def write_tokens(path, tokens, raw_bytes=False):
    arr = np.asarray(tokens, dtype=np.int64)
    if raw_bytes:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ConfigInvalid("raw byte output needs tokens in [0, 256)")
        with open(path, "wb") as fh:
            fh.write(bytes(int(t) for t in arr))
        return
    with open(path, "w") as fh:
        fh.write("\n".join(str(int(t)) for t in arr))
        if arr.size:
            fh.write("\n")


def _read_text_stream(path, raw_bytes):
    """Reference corpora: one text per line."""
    texts = []
    if raw_bytes:
        with open(path, "rb") as fh:
            for line in fh.read().split(b"\n"):
                if line:
                    texts.append(np.frombuffer(line, dtype=np.uint8).astype(np.int64))
        return texts
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts:
                try:
                    texts.append(np.asarray([int(p) for p in parts], dtype=np.int64))
                except ValueError as exc:
                    raise CorruptFile(f"{path}: bad token line: {exc}") from exc
    return texts


def _statistic_config(args, key_kind):
    variant = args.variant
    if variant is None:
        variant = key_kind  # plain variant of the key's own kind
    if variant == "exp-hash":
        raise ConfigInvalid("the hash baseline has no keyed detection; use the sweep harness")
    if variant not in VARIANTS:
        raise ConfigInvalid(f"unknown variant {variant!r}")
    kind, family, edit, default_gamma = VARIANTS[variant]
    if kind != key_kind:
        raise ConfigMismatch(f"variant {variant} needs a key of kind {kind}, got {key_kind}")
    gamma = default_gamma if args.gamma is None else args.gamma
    return TestStatisticConfig(
        cost=AlignmentCostSpec(family=family, edit=edit, gamma=gamma),
        block_size=args.block_size,
    )


def _cmd_keygen(args):
    key = key_generate(args.kind, args.n, args.vocab, args.seed)
    save_key(key, args.out)
    print(f"wrote {args.kind} key: n={args.n} vocab={args.vocab} -> {args.out}")
    return EXIT_OK


def _cmd_train_lm(args):
    use_bytes = args.bytes or args.vocab == 256
    if use_bytes and args.vocab != 256:
        raise ConfigInvalid("--bytes requires --vocab 256")
    if use_bytes:
        with open(args.corpus, "rb") as fh:
            corpus = np.frombuffer(fh.read(), dtype=np.uint8).astype(np.int64)
    else:
        corpus = read_tokens(args.corpus)
    model = markov_train(corpus, order=args.order, smoothing=args.smoothing,
                         vocab_size=args.vocab)
    model.save(args.out)
    print(f"trained order-{args.order} model on {corpus.size} tokens -> {args.out}")
    return EXIT_OK


def _cmd_generate(args):
    model = load_model(args.model)
    prompt = read_tokens(args.prompt, args.bytes) if args.prompt else ()
    if args.hash_window is not None:
        tokens = generate_hash(model, args.m, args.hash_window, args.seed, EXP, prompt)
    else:
        if args.key is None:
            raise ConfigInvalid("generation needs --key (or --hash-window for the baseline)")
        key = load_key(args.key)
        if args.shift:
            rng = np.random.default_rng(args.seed)
            tokens = shift_generate(key, args.m, model, prompt, rng)
        else:
            tokens = generate(key, args.m, model, prompt)
    write_tokens(args.out, tokens, args.bytes)
    print(f"wrote {len(tokens)} tokens -> {args.out}")
    return EXIT_OK


def _cmd_attack(args):
    tokens = read_tokens(args.tokens, args.bytes)
    rng = np.random.default_rng(args.seed)
    if args.attack == "substitute":
        out = substitute_attack(tokens, args.fraction, args.vocab, rng)
    elif args.attack == "insert":
        out = insert_attack(tokens, args.fraction, args.vocab, rng)
    elif args.attack == "delete":
        out = delete_attack(tokens, args.fraction, rng)
    else:
        if args.start is None or args.len is None:
            raise ConfigInvalid("crop needs --start and --len")
        out = crop(tokens, args.start, args.len)
    write_tokens(args.out, out, args.bytes)
    print(f"{args.attack}: {len(tokens)} -> {len(out)} tokens -> {args.out}")
    return EXIT_OK


def _write_report(report, args):
    payload = report.as_dict()
    if args.format == "csv":
        fields = ["p_value", "statistic", "argmin_block", "resamples", "mode"]
        rows = dict(payload, argmin_block=f"{payload['argmin_block'][0]}:{payload['argmin_block'][1]}")
        sink = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            writer = csv.DictWriter(sink, fieldnames=fields, extrasaction="ignore")
            writer.writeheader()
            writer.writerow(rows)
        finally:
            if args.out:
                sink.close()
    else:
        text = report.to_json()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
    if args.out:
        print(f"p_value={report.p_value:.6g} mode={report.mode} -> {args.out}")


def _cmd_detect(args):
    tokens = read_tokens(args.tokens, args.bytes)
    key = load_key(args.key)
    cfg = _statistic_config(args, key.kind)
    if args.reference:
        ref = load_reference(args.reference)
        report = detect_with_reference(tokens, key, cfg, ref)
    else:
        rng = np.random.default_rng(args.seed)
        report = detect(tokens, key, cfg, args.T, rng)
    _write_report(report, args)
    return EXIT_OK


def _cmd_reference(args):
    texts = _read_text_stream(args.corpus, args.bytes)
    cfg = _statistic_config(args, args.kind)
    rng = np.random.default_rng(args.seed)
    ref = build_reference(args.T, args.m, args.kind, args.n, args.vocab, cfg,
                          texts, min_prompt=args.min_prompt, rng=rng)
    save_reference(ref, args.out)
    print(f"reference: T={ref.T} m={ref.m} -> {args.out}")
    return EXIT_OK


def _cmd_sweep(args):
    cfg = load_sweep_config(args.config)
    result = run_sweep(cfg)
    if args.format == "json":
        result.write_jsonl(args.out)
    else:
        result.write_csv(args.out)
    for cell in result.cells:
        print(
            f"variant={cell.variant} m={cell.m} n={cell.n} fraction={cell.fraction} "
            f"median_p={cell.median_p:.4g} boot_sd={cell.boot_sd:.3g} "
            f"alpha={cell.mean_alpha:.3f} ({cell.seconds:.1f}s)"
        )
    print(f"wrote {len(result.cells)} cells -> {args.out}")
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="keymark",
        description="Plant and detect distortion-free keyed watermarks in token sequences.",
    )
    parser.add_argument("--version", action="version", version=f"keymark {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate and save a watermark key")
    p.add_argument("--kind", choices=[ITS, EXP], default=EXP)
    p.add_argument("--n", type=int, default=DEFAULT_N, help="key length (default 256)")
    p.add_argument("--vocab", type=int, default=DEFAULT_VOCAB)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_keygen)

    p = sub.add_parser("train-lm", help="train the built-in Markov model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--vocab", type=int, default=DEFAULT_VOCAB)
    p.add_argument("--bytes", action="store_true",
                   help="read the corpus as raw bytes (default when --vocab is 256)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_lm)

    p = sub.add_parser("generate", help="generate watermarked (or hash-baseline) text")
    p.add_argument("--key")
    p.add_argument("--model", required=True)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--prompt", help="optional prompt token file")
    p.add_argument("--shift", action="store_true",
                   help="generate from a uniformly shifted key (seeded by --seed)")
    p.add_argument("--hash-window", type=int, default=None,
                   help="use the keyless hash baseline with this window")
    p.add_argument("--seed", type=int, default=0,
                   help="shift randomness, or the hash baseline's salt")
    p.add_argument("--bytes", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("attack", help="corrupt a token file")
    p.add_argument("tokens")
    p.add_argument("--attack", choices=["substitute", "insert", "delete", "crop"], required=True)
    p.add_argument("--fraction", type=float, default=0.0)
    p.add_argument("--vocab", type=int, default=DEFAULT_VOCAB)
    p.add_argument("--start", type=int, default=None, help="crop start")
    p.add_argument("--len", type=int, default=None, help="crop length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bytes", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("detect", help="compute a detection p-value for a token file")
    p.add_argument("tokens")
    p.add_argument("--key", required=True)
    p.add_argument("--variant", choices=[v for v in VARIANTS if v != "exp-hash"],
                   default=None, help="default: the plain variant of the key's kind")
    p.add_argument("--gamma", type=float, default=None,
                   help="edit penalty override (defaults: its-edit 0.4, exp-edit 0.0)")
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--T", type=int, default=DEFAULT_RESAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", help="use a frozen reference distribution instead of resampling")
    p.add_argument("--bytes", action="store_true")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("reference", help="build a reference distribution from a corpus")
    p.add_argument("--corpus", required=True, help="one text per line")
    p.add_argument("--T", type=int, default=DEFAULT_RESAMPLES)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--min-prompt", type=int, default=DEFAULT_MIN_PROMPT)
    p.add_argument("--kind", choices=[ITS, EXP], default=EXP)
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.add_argument("--vocab", type=int, default=DEFAULT_VOCAB)
    p.add_argument("--variant", default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bytes", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("sweep", help="run an experiment sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    return parser


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError, ModelMissing) as exc:
        print(f"error[{EXIT_MISSING_FILE}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except _FORMAT_ERRORS as exc:
        print(f"error[{EXIT_BAD_FORMAT}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_FORMAT
    except (KeymarkError, ValueError) as exc:
        print(f"error[{EXIT_BAD_CONFIG}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except Exception as exc:  # pragma: no cover - safety net
        print(f"error[{EXIT_UNEXPECTED}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


def main() -> int:
    return cli_main()
