"""Command-line entry point.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure (non-finite
training loss). Every command writes ``<output>.manifest.json`` recording the
argv, resolved configuration, input hashes and timestamps; ``winmask
--manifest FILE`` re-runs the command recorded in FILE.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from typing import Sequence

from . import __version__, synthetic
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .evaluation import bench as bench_mod
from .evaluation import io as eio
from .evaluation import sms as sms_mod
from .evaluation import sts as sts_mod
from .evaluation.metrics import MetricError
from .evaluation.rerank import SELECTION_HEADER, SUMMARY_HEADER, RerankConfig, RerankError, rerank
from .model import MaskRegime, ModelConfig, ModelError
from .nncore import NNCoreError
from .representations import ReprError, ReprLevel
from .tokenizer import TokenizerError, Vocabulary, build_vocab, encode
from .training import NonFiniteLossError, TrainConfig, TrainingError, train_loop

log = logging.getLogger("winmask")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
LEVEL_CHOICES = "embed, output, context, context:k"


class UsageError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_path: str, command: str, argv: Sequence[str], config: dict,
                   inputs: Sequence[str], seed, started: str, results: dict | None = None) -> str:
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "inputs": {p: _sha256(p) for p in inputs},
        "seed": seed,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "results": results or {},
    }
    path = f"{out_path}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _read_lines(path: str) -> list[str]:
    with open(_require_file(path), encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _parse_levels(text: str, num_layers: int) -> list[ReprLevel]:
    levels = []
    for tok in text.split(","):
        try:
            levels.append(ReprLevel.parse(tok, num_layers))
        except ReprError:
            raise UsageError(f"unknown --level {tok!r}; valid: {LEVEL_CHOICES}") from None
        if levels[-1].kind == "context" and levels[-1].layer > num_layers:
            raise UsageError(f"--level {tok!r}: model has layers 1..{num_layers}")
    return levels


def _load(path: str):
    ckpt = load_checkpoint(_require_file(path))
    return ckpt, ckpt.build_model()


# -- commands ---------------------------------------------------------------

def cmd_build_vocab(args, argv) -> int:
    started = _now()
    vocab = build_vocab(_read_lines(args.corpus), args.max_size, args.min_freq)
    vocab.save(args.out)
    write_manifest(args.out, "build-vocab", argv,
                   {"max_size": args.max_size, "min_freq": args.min_freq},
                   [args.corpus], None, started, {"vocab_size": len(vocab)})
    print(f"wrote {len(vocab)} tokens to {args.out}")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    started = _now()
    vocab = Vocabulary.load(_require_file(args.vocab))
    model_cfg = ModelConfig(vocab_size=len(vocab), num_layers=args.layers, model_dim=args.dim,
                            num_heads=args.heads, ffn_dim=args.ffn, max_len=args.max_len,
                            dropout_rate=args.dropout, regime=args.regime, mlm_prob=args.mlm_prob)
    train_cfg = TrainConfig(batch_size=args.batch, steps=args.steps, lr=args.lr, seed=args.seed,
                            regime=args.regime, log_every=args.log_every)
    corpus = []
    for line in _read_lines(args.corpus):
        if line.strip():
            try:
                corpus.append(encode(vocab, line, model_cfg.max_len))
            except TokenizerError:
                continue
    ckpt, loss_log = train_loop(corpus, model_cfg, train_cfg, vocab)
    save_checkpoint(ckpt, args.out)
    loss_log.write(args.log)
    last = loss_log.rows[-1]
    write_manifest(args.out, "train", argv,
                   {"model_config": model_cfg.to_dict(), "train_config": train_cfg.to_dict()},
                   [args.corpus, args.vocab], args.seed, started,
                   {"final_loss": last.loss, "final_step": last.step, "loss_log": args.log})
    print(f"trained {args.regime} for {args.steps} steps; last logged loss {last.loss:.4f}")
    return EXIT_OK


def cmd_eval_sts(args, argv) -> int:
    started = _now()
    ckpt, model = _load(args.ckpt)
    levels = _parse_levels(args.level, model.config.num_layers)
    lo, hi = (float(x) for x in args.gold_range.split(","))
    pairs = eio.read_pairs(_require_file(args.pairs), (lo, hi))
    reports = [sts_mod.sts_eval(model, ckpt.vocab, pairs, lvl) for lvl in levels]
    eio.write_csv(args.out, sts_mod.SUMMARY_HEADER, [r.summary_row() for r in reports])
    pairs_path = args.out + ".pairs.csv"
    eio.write_csv(pairs_path, sts_mod.PAIR_HEADER, [row for r in reports for row in r.rows])
    write_manifest(args.out, "eval-sts", argv,
                   {"levels": [lvl.label() for lvl in levels], "gold_range": [lo, hi],
                    "regime": model.regime.value, "pooling": "mean"},
                   [args.ckpt, args.pairs], None, started,
                   {r.level.label(): r.pearson for r in reports})
    for r in reports:
        print(f"{r.level.label():>10}  pearson r = {r.pearson:.4f}  ({len(r.rows)} pairs, {r.skipped} skipped)")
    return EXIT_OK


def cmd_eval_sms(args, argv) -> int:
    started = _now()
    ckpt, model = _load(args.ckpt)
    levels = _parse_levels(args.level, model.config.num_layers)
    messages = eio.read_messages(_require_file(args.data))
    reports = [sms_mod.sms_eval(model, ckpt.vocab, messages, lvl, args.split_seed) for lvl in levels]
    eio.write_csv(args.out, sms_mod.REPORT_HEADER, [r.row() for r in reports])
    write_manifest(args.out, "eval-sms", argv,
                   {"levels": [lvl.label() for lvl in levels], "split": "stratified 80/20",
                    "regime": model.regime.value},
                   [args.ckpt, args.data], args.split_seed, started,
                   {r.level.label(): r.accuracy for r in reports})
    for r in reports:
        print(f"{r.level.label():>10}  accuracy = {r.accuracy:.4f}  (majority {r.majority_rate:.4f})")
    return EXIT_OK


def cmd_rerank(args, argv) -> int:
    started = _now()
    ckpt, model = _load(args.ckpt)
    try:
        cfg = RerankConfig(args.lam)
    except RerankError as exc:
        raise UsageError(str(exc)) from None
    entries = eio.read_nbest(_require_file(args.nbest))
    result = rerank(model, ckpt.vocab, entries, cfg)
    eio.write_csv(args.out, SELECTION_HEADER,
                  [(i, e.source, s.index, s.s2s_score, s.lm_score, s.combined, s.text)
                   for i, (e, s) in enumerate(zip(entries, result.selections))])
    summary = (cfg.lam, len(entries), result.bleu_reranked, result.bleu_beam, result.lm_passes)
    eio.write_csv(args.out + ".summary.csv", SUMMARY_HEADER, [summary])
    write_manifest(args.out, "rerank", argv,
                   {"lambda": cfg.lam, "regime": model.regime.value,
                    "bleu": "corpus BLEU-4, uniform weights, epsilon 1e-9 on zero matches"},
                   [args.ckpt, args.nbest], None, started,
                   {"bleu_reranked": result.bleu_reranked, "bleu_beam_1best": result.bleu_beam})
    print(f"BLEU reranked = {result.bleu_reranked:.4f}, beam 1-best = {result.bleu_beam:.4f}")
    return EXIT_OK


def cmd_bench(args, argv) -> int:
    started = _now()
    paths = [p for p in args.ckpts.split(",") if p]
    models = [_load(p)[1] for p in paths]
    try:
        lengths = [int(x) for x in args.lengths.split(",") if x]
    except ValueError:
        raise UsageError(f"--lengths must be comma-separated integers, got {args.lengths!r}") from None
    try:
        rows = bench_mod.runtime_bench(models, lengths, args.trials, args.seed)
    except bench_mod.BenchError as exc:
        raise UsageError(str(exc)) from None
    eio.write_csv(args.out, bench_mod.BENCH_HEADER, [r.as_tuple() for r in rows])
    write_manifest(args.out, "bench", argv,
                   {"lengths": lengths, "trials": args.trials, "warmup": bench_mod.WARMUP_CALLS,
                    "clock": "perf_counter_ns"},
                   paths, args.seed, started)
    for r in rows:
        print(f"{r.regime:>7} n={r.n:<3} {r.mean_ms:9.3f} ms  passes={r.passes}")
    return EXIT_OK


def cmd_make_toy(args, argv) -> int:
    started = _now()
    os.makedirs(args.out_dir, exist_ok=True)
    files = ["corpus.txt", "nbest.jsonl", "sms.tsv", "sts.tsv"]
    messages = synthetic.sms_messages(args.messages, args.seed)
    # message texts join the training corpus so their words reach the vocabulary
    corpus = synthetic.grammar_corpus(args.sentences, args.seed) + [text for _, text in messages]
    corpus_path = os.path.join(args.out_dir, "corpus.txt")
    with open(corpus_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(s + "\n" for s in corpus)
    eio.write_pairs(os.path.join(args.out_dir, "sts.tsv"), synthetic.sts_pairs(args.pairs, args.seed))
    eio.write_messages(os.path.join(args.out_dir, "sms.tsv"), messages)
    eio.write_nbest(os.path.join(args.out_dir, "nbest.jsonl"), synthetic.nbest_entries(args.entries, args.seed))
    write_manifest(os.path.join(args.out_dir, "toy"), "make-toy", argv,
                   {"sentences": args.sentences, "pairs": args.pairs, "messages": args.messages,
                    "entries": args.entries}, [], args.seed, started,
                   {"files": files})
    print(f"wrote toy data to {args.out_dir}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="winmask", description="Train and evaluate window-masked, causal and masked-LM transformers.",
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--manifest", help="re-run the command recorded in a manifest file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("build-vocab", help="build a word-level vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-size", type=int, default=10_000)
    p.add_argument("--min-freq", type=int, default=2)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train one regime")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--regime", choices=[r.value for r in MaskRegime], default="window")
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", required=True, help="loss log CSV path")
    p.add_argument("--log-every", type=int, default=100)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--ffn", type=int, default=2048)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--mlm-prob", type=float, default=0.15)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-sts", help="Pearson r of cosine similarities (STSb / SICK TSV)")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--level", default="context,embed,output", help=f"comma list of: {LEVEL_CHOICES}")
    p.add_argument("--gold-range", default="0,5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_sts)

    p = sub.add_parser("eval-sms", help="logistic-regression spam probe")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--level", default="context", help=f"comma list of: {LEVEL_CHOICES}")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_sms)

    p = sub.add_parser("rerank", help="rerank N-best lists and report corpus BLEU")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--nbest", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("bench", help="time sentence scoring per regime and length")
    p.add_argument("--ckpts", required=True, help="comma-separated checkpoint paths")
    p.add_argument("--lengths", default="5,10,20,40")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-toy", help="write synthetic corpus / STS / SMS / N-best files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sentences", type=int, default=200)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--messages", type=int, default=200)
    p.add_argument("--entries", type=int, default=50)
    p.set_defaults(func=cmd_make_toy)
    return parser


def _replay_argv(path: str) -> list[str]:
    with open(_require_file(path), encoding="utf-8") as fh:
        manifest = json.load(fh)
    argv = manifest.get("argv")
    if not isinstance(argv, list) or "--manifest" in argv:
        raise UsageError(f"manifest {path} has no replayable argv")
    return argv


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.manifest:
            if args.command:
                raise UsageError("--manifest replays a recorded run; do not also give a command")
            argv = _replay_argv(args.manifest)
            args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args, argv)
    except NonFiniteLossError as exc:
        print(f"winmask: error: {exc} (step {exc.step})", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, FileNotFoundError, CheckpointError, TokenizerError, ReprError, eio.DataFormatError,
            TrainingError, ModelError, MetricError, NNCoreError, ValueError) as exc:
        print(f"winmask: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
