"""Command-line entry point: ``nqg <subcommand> ...``.

Every subcommand also reads ``--config <file.json>``, a flat JSON object whose
keys are flag names (``l_t`` or ``l-t``); explicit flags override it.
Exit status: 0 success, 1 computation error, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from nqg import __version__

log = logging.getLogger("nqg")

EXIT_OK, EXIT_COMPUTE, EXIT_INPUT = 0, 1, 2
ABSTAIN = "<abstain>"


class InputError(Exception):
    pass


def _bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="nqg", description="QCFG induction, training and evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    subs = {}

    p = subs["induce"] = sub.add_parser("induce", help="induce a grammar from training pairs")
    p.add_argument("--train", required=True, help="training TSV")
    p.add_argument("--out", required=True, help="grammar file to write")
    p.add_argument("--l-nt", type=float, default=1.0, help="bits per nonterminal symbol")
    p.add_argument("--l-t", type=float, default=8.0, help="bits per terminal symbol")
    p.add_argument("--sample-k", type=int, default=10)
    p.add_argument("--max-examples", type=int, default=500)
    p.add_argument("--allow-repeated-target-nt", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="JSONL file for the per-step trace")

    p = subs["train"] = sub.add_parser("train", help="train rule scores by MML")
    p.add_argument("--grammar", required=True)
    p.add_argument("--train", required=True, help="training TSV")
    p.add_argument("--target-cfg", help="target CFG file, or 'scan' / 'funql'")
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=256, help="scoring hidden size")
    p.add_argument("--d-enc", type=int, default=64, help="token vector size")
    p.add_argument("--window", type=int, default=1, help="encoder context window per side")
    p.add_argument("--out", required=True, help="params file to write")

    for name, help_ in (("predict", "predict targets for sources"),
                        ("eval", "evaluate hybrid predictions against gold targets")):
        p = subs[name] = sub.add_parser(name, help=help_)
        p.add_argument("--grammar", required=True)
        p.add_argument("--params", required=True)
        p.add_argument("--target-cfg", help="target CFG file, or 'scan' / 'funql'")
        p.add_argument("--test", required=True,
                       help="TSV of examples" + ("" if name == "eval" else "; a line without a tab is a bare source"))
        g = p.add_mutually_exclusive_group()
        g.add_argument("--fallback-file", help="TSV of source and fallback prediction")
        g.add_argument("--fallback-cmd", help="command reading sources on stdin, one prediction per line")
        g.add_argument("--fallback-echo", action="store_true", help="fall back to echoing the source")
        p.add_argument("--per-example", help="JSONL of per-example records")
        if name == "predict":
            p.add_argument("--out", help=f"TSV of source and prediction ({ABSTAIN} when none)")
        else:
            p.add_argument("--report", help="JSON report path (default: stdout)")
            p.add_argument("--train", help="training TSV, for the examples-per-rule ratio")

    p = subs["split"] = sub.add_parser("split", help="split a dataset")
    p.add_argument("--in", dest="input", required=True, help="dataset TSV")
    p.add_argument("--kind", choices=("random", "length", "template", "tmcd"), required=True)
    p.add_argument("--extractor", choices=("funql", "tree", "token"), default="funql")
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--train-size", type=int)
    p.add_argument("--test-size", type=int)
    p.add_argument("--measure", choices=("source", "target"), default="target", help="length split measure")
    p.add_argument("--test-fraction", type=float, default=0.5, help="length split test fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--candidates", type=int, default=1000, help="TMCD swap pairs sampled per step")
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--report", help="JSON report path (default: stdout)")

    p = subs["stats"] = sub.add_parser("stats", help="grammar size statistics")
    p.add_argument("--grammar", required=True)
    p.add_argument("--train", required=True, help="dataset TSV the grammar was induced from")

    p = subs["verify"] = sub.add_parser("verify", help="validate a dataset and print its hash")
    p.add_argument("--in", dest="input", required=True, help="dataset TSV or SCAN file")
    p.add_argument("--funql", action="store_true", help="check every target parses as FunQL")
    p.add_argument("--grammar", help="also report how many examples the grammar derives")

    for p in subs.values():
        _add_common(p)
    return parser, subs


def _apply_config(argv, parser, subs):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in subs:
        return
    try:
        doc = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read config {known.config}: {e}") from e
    if not isinstance(doc, dict):
        raise InputError(f"config {known.config} must be a JSON object")
    sp = subs[known.command]
    dests = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest == "in":
            dest = "input"
        if dest not in dests:
            raise InputError(f"config key {key!r} is not an option of {known.command}")
        action = dests[dest]
        if action.type is not None and value is not None and not isinstance(value, bool):
            try:
                value = action.type(value)
            except (TypeError, ValueError, argparse.ArgumentTypeError) as e:
                raise InputError(f"config key {key!r}: {e}") from e
        defaults[dest] = value
        action.required = False
    sp.set_defaults(**defaults)


def _setup(args):
    level = logging.WARNING if args.quiet else (logging.INFO if args.verbose < 2 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s", force=True)
    threads = args.threads or os.cpu_count() or 1
    import torch
    torch.set_num_threads(max(1, threads))
    resolved = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose", "quiet")}
    log.info("config: %s", json.dumps(resolved, sort_keys=True, default=str))


def _load_dataset(path):
    from nqg.data import load_tsv
    ds = load_tsv(path)
    log.info("input %s: %d examples, hash %s", path, len(ds), ds.hash_hex)
    return ds


def _load_grammar(path):
    from nqg.grammar import load_grammar
    try:
        g = load_grammar(path)
    except OSError as e:
        raise InputError(f"cannot read grammar {path}: {e.strerror}") from e
    log.info("grammar %s: %d rules", path, len(g))
    return g


def _load_cfg(spec):
    from nqg.grammar import TargetCfg, load_builtin
    if not spec or spec == "none":
        return None
    if Path(spec).exists():
        return TargetCfg.load(spec)
    if spec in ("scan", "funql"):
        return load_builtin(spec)
    raise InputError(f"target CFG not found: {spec}")


def _write_json(doc, path):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_induce(args):
    from nqg.grammar import save_grammar
    from nqg.induction import InductionConfig, induce
    ds = _load_dataset(args.train)
    config = InductionConfig(l_nt=args.l_nt, l_t=args.l_t, sample_k=args.sample_k,
                             max_examples=args.max_examples,
                             allow_repeated_target_nt=args.allow_repeated_target_nt, seed=args.seed)
    start = time.time()
    grammar, trace = induce(ds.pairs, config)
    save_grammar(grammar, args.out)
    if args.trace:
        trace.write_jsonl(args.trace)
    log.info("induced %d rules in %.1fs (%d steps)", len(grammar), time.time() - start, len(trace.steps))
    return EXIT_OK


def cmd_train(args):
    from nqg.model import ModelConfig, TrainConfig, save_params, train
    grammar = _load_grammar(args.grammar)
    ds = _load_dataset(args.train)
    cfg = _load_cfg(args.target_cfg)
    config = TrainConfig(steps=args.steps, lr=args.lr, seed=args.seed, optimizer=args.optimizer,
                         model=ModelConfig(d=args.d, d_enc=args.d_enc, window=args.window))
    params = train(grammar, ds.pairs, cfg, config)
    save_params(params, args.out)
    return EXIT_OK


def _load_sources(path):
    from nqg.data import DataError, _read_text
    out = []
    for lineno, line in enumerate(_read_text(path).split("\n"), 1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        src = line.split("\t")[0].split()
        if not src:
            raise DataError("empty source", lineno, path)
        out.append(tuple(src))
    return out


def _fallback(args, sources):
    from nqg.hybrid_eval import FallbackPredictor
    if args.fallback_file:
        return FallbackPredictor.from_file(args.fallback_file, sources)
    if args.fallback_cmd:
        return FallbackPredictor.from_command(args.fallback_cmd)
    if args.fallback_echo:
        return FallbackPredictor.echo()
    return None


def _run_predictions(args, sources):
    from nqg.model import load_params, predict
    grammar = _load_grammar(args.grammar)
    params = load_params(args.params, grammar)
    cfg = _load_cfg(args.target_cfg)
    nqg = [predict(grammar, params, cfg, s).target for s in sources]
    fallback = _fallback(args, sources)
    if fallback is not None:
        fallback.prepare([s for s, p in zip(sources, nqg) if p is None])
    hybrid = [p if p is not None else (fallback(s) if fallback else None) for s, p in zip(sources, nqg)]
    return grammar, nqg, hybrid


def cmd_predict(args):
    from nqg.hybrid_eval import write_jsonl
    sources = _load_sources(args.test)
    _, nqg, hybrid = _run_predictions(args, sources)
    lines = []
    records = []
    for s, p, h in zip(sources, nqg, hybrid):
        pred = " ".join(h) if h is not None else ABSTAIN
        lines.append(f"{' '.join(s)}\t{pred}\n")
        records.append({"source": " ".join(s), "nqg": None if p is None else " ".join(p),
                        "prediction": None if h is None else " ".join(h)})
    if args.out:
        Path(args.out).write_text("".join(lines), encoding="utf-8")
    else:
        sys.stdout.write("".join(lines))
    if args.per_example:
        write_jsonl(records, args.per_example)
    return EXIT_OK


def cmd_eval(args):
    from nqg.hybrid_eval import evaluate, write_jsonl
    gold = _load_dataset(args.test)
    sources = [ex.source for ex in gold]
    grammar, nqg, hybrid = _run_predictions(args, sources)
    hybrid = [h if h is not None else () for h in hybrid]
    train_size = len(_load_dataset(args.train)) if args.train else None
    report, records = evaluate(gold, nqg, hybrid, grammar, train_size)
    doc = report.to_json()
    doc["inputs"] = {"test": args.test, "test_hash": gold.hash_hex}
    _write_json(doc, args.report)
    if args.per_example:
        write_jsonl(records, args.per_example)
    return EXIT_OK


def cmd_split(args):
    from nqg.data import store_tsv
    from nqg.splits import Extractor, length_split, random_split, template_split, tmcd_split
    ds = _load_dataset(args.input)
    extractor = Extractor(args.extractor, args.order)
    if args.kind == "random":
        result = random_split(ds, args.train_size, args.test_size, args.seed, extractor)
    elif args.kind == "length":
        result = length_split(ds, args.measure, args.test_fraction, extractor)
    elif args.kind == "template":
        result = template_split(ds, None, args.train_size, args.seed, extractor)
    else:
        result = tmcd_split(ds, extractor, args.train_size, args.test_size, args.seed,
                            args.max_iterations, args.candidates)
    store_tsv(result.train, args.out_train)
    store_tsv(result.test, args.out_test)
    doc = result.report()
    doc["seed"] = args.seed
    doc["input_hash"] = ds.hash_hex
    _write_json(doc, args.report)
    return EXIT_OK


def cmd_stats(args):
    from nqg.hybrid_eval import grammar_stats
    grammar = _load_grammar(args.grammar)
    ds = _load_dataset(args.train)
    examples, rules, ratio = grammar_stats(grammar, ds)
    _write_json({"examples": examples, "rules": rules, "ratio": ratio}, None)
    return EXIT_OK


def cmd_verify(args):
    from nqg.data import load_tsv, scan_loader, validate_funql
    text_head = Path(args.input).read_bytes()[:64]
    ds = scan_loader(args.input) if text_head.startswith(b"IN:") else load_tsv(args.input)
    doc = {"examples": len(ds), "hash": ds.hash_hex}
    if args.funql:
        doc["funql"] = validate_funql(ds).to_json()
    if args.grammar:
        from nqg.grammar import can_derive
        grammar = _load_grammar(args.grammar)
        doc["derivable"] = sum(1 for ex in ds if can_derive(grammar, ex.source, ex.target))
    _write_json(doc, None)
    ok = not args.funql or not doc["funql"]["failures"]
    return EXIT_OK if ok else EXIT_INPUT


COMMANDS = {"induce": cmd_induce, "train": cmd_train, "predict": cmd_predict, "eval": cmd_eval,
            "split": cmd_split, "stats": cmd_stats, "verify": cmd_verify}


def run(argv=None) -> int:
    from nqg.data import DataError
    from nqg.grammar import CfgError, RuleError
    from nqg.splits import FunqlError
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config(argv, parser, subs)
    except InputError as e:
        print(f"nqg: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not args.command:
        parser.print_help()
        return EXIT_INPUT
    _setup(args)
    try:
        return COMMANDS[args.command](args)
    except (InputError, DataError, RuleError, CfgError, FunqlError, FileNotFoundError,
            IsADirectoryError, PermissionError) as e:
        print(f"nqg: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - reported as a computation failure
        log.debug("failure", exc_info=True)
        print(f"nqg: error: {e}", file=sys.stderr)
        return EXIT_COMPUTE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
