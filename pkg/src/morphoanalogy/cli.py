"""Batch command-line front end for the full pipeline.

Every subcommand derives all randomness from --seed and writes a JSON run
manifest next to each output artifact (flags, seeds, input content hashes,
tool version), so identical invocations on identical inputs reproduce
byte-identical checkpoints and CSV reports.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import baselines, evaluator
from .augment import augment_for_evaluation
from .corpus import (
    CorpusFormatError,
    build_vocabulary,
    extract_analogies,
    parse_inflection_file,
    quadruple_words,
    read_quadruples,
    subsample_quadruples,
    write_quadruples,
)
from .evaluator import (
    PerturbationReport,
    ReportRow,
    emit_report,
    emit_svg,
    eval_classifier,
    eval_regressor,
    perturbation_study,
    read_report,
)
from .numkit import Rng
from .trainer import (
    TOOL_VERSION,
    CheckpointError,
    TrainConfig,
    TrainingError,
    load_checkpoint,
    save_checkpoint,
    train_classifier,
    train_regressor,
)

INVALID_FLAG_TO_SETTING = {3: "3-of-base", 8: "8-sampled", 24: "24-all"}


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    inputs: dict[str, str]    # path -> sha256 of content
    outputs: list[str]
    tool_version: str = TOOL_VERSION

    def write(self, anchor_path: str) -> None:
        path = Path(str(anchor_path) + ".manifest.json")
        payload = json.dumps(asdict(self), sort_keys=True, indent=2)
        path.write_text(payload + "\n", encoding="utf-8")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest(args, inputs: list, outputs: list) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = RunManifest(
        command=args.command,
        config={k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()},
        seed=getattr(args, "seed", 0),
        inputs={str(p): _sha256(p) for p in inputs},
        outputs=[str(p) for p in outputs],
    )
    manifest.write(outputs[0])


def _log(message: str) -> None:
    print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_extract(args) -> int:
    with open(args.data, "rb") as fh:
        pairs = parse_inflection_file(fh.read())
    cap = None if args.cap == 0 else args.cap
    quads = extract_analogies(pairs, cap=cap, seed=args.seed)
    write_quadruples(quads, args.out)
    _log(f"extracted {len(quads)} quadruples from {len(pairs)} pairs")
    _manifest(args, [args.data], [args.out])
    return 0


def _load_capped(path, cap, seed):
    quads = read_quadruples(path)
    if cap and cap > 0:
        quads = subsample_quadruples(quads, cap, seed)
    return quads


def cmd_train_clf(args) -> int:
    quads = _load_capped(args.data, args.cap, args.seed)
    config = TrainConfig.classification(
        language=args.language, epochs=args.epochs, lr=args.lr,
        batch_size=args.batch_size, char_dim=args.char_dim,
        invalid_setting=INVALID_FLAG_TO_SETTING[args.invalid],
        cap=args.cap, seed=args.seed)
    ckpt = train_classifier(quads, config, log=lambda s: _log(
        f"epoch {s['epoch']:>3}: loss={s['loss']:.5f} acc={s['accuracy']:.4f}"))
    save_checkpoint(ckpt, args.out)
    _manifest(args, [args.data], [args.out])
    return 0


def cmd_train_reg(args) -> int:
    quads = _load_capped(args.data, args.cap, args.seed)
    init_from = load_checkpoint(args.init_from)
    config = TrainConfig.regression(
        language=args.language or init_from.metadata.get("language", ""),
        epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
        char_dim=init_from.metadata["char_dim"], cap=args.cap, seed=args.seed,
        freeze_epochs=args.freeze_epochs)
    ckpt = train_regressor(quads, config, init_from, log=lambda s: _log(
        f"epoch {s['epoch']:>3}: loss={s['loss']:.6f} frozen={s['frozen']}"))
    save_checkpoint(ckpt, args.out)
    _manifest(args, [args.data, args.init_from], [args.out])
    return 0


def cmd_eval_clf(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    quads = _load_capped(args.data_test, args.cap, args.seed)
    report = eval_classifier(ckpt, quads)
    language = ckpt.metadata.get("language", "")
    out_report = PerturbationReport((0.0,), 1, [
        ReportRow(language, 0.0, 0, "valid_accuracy", report.valid_accuracy),
        ReportRow(language, 0.0, 0, "invalid_accuracy", report.invalid_accuracy),
    ])
    print(f"valid_accuracy={report.valid_accuracy:.2f} "
          f"invalid_accuracy={report.invalid_accuracy:.2f} "
          f"(n_valid={report.n_valid}, n_invalid={report.n_invalid})")
    if args.out:
        emit_report(out_report, args.out)
        _manifest(args, [args.ckpt, args.data_test], [args.out])
    return 0


def _retrieval_vocab(args, quads):
    train_quads = read_quadruples(args.data) if args.data else []
    return build_vocabulary(train_quads, quads)


def cmd_eval_reg(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    quads = _load_capped(args.data_test, args.cap, args.seed)
    vocab = _retrieval_vocab(args, quads)
    accuracy = eval_regressor(ckpt, quads, vocab, metric=args.metric)
    language = ckpt.metadata.get("language", "")
    print(f"accuracy={accuracy:.2f} (n={8 * len(quads)}, vocab={len(vocab)})")
    if args.out:
        out_report = PerturbationReport((0.0,), 1, [
            ReportRow(language, 0.0, 0, "accuracy", accuracy)])
        emit_report(out_report, args.out)
        inputs = [args.ckpt, args.data_test] + ([args.data] if args.data else [])
        _manifest(args, inputs, [args.out])
    return 0


def cmd_baseline(args) -> int:
    if args.solver == "kolmo":
        entry = baselines.KOLMO_REFERENCE.get(args.language.lower())
        if entry is None:
            raise TrainingError(
                f"no published reference values for language {args.language!r}")
        print(f"static reference values for the minimal-complexity solver "
              f"(not implemented here), language={args.language}:")
        for key, (valid, invalid) in entry.items():
            print(f"  {key}: valid={valid} invalid={invalid}")
        return 0

    quads = _load_capped(args.data_test, args.cap, args.seed)
    rng = Rng(args.seed).stream("baseline")
    if args.solver == "alea":
        config = baselines.SolverConfig(rho=args.rho, k=args.k)

        def classify(q):
            return baselines.solver_as_classifier(
                lambda a, b, c: baselines.alea_solve(a, b, c, config, rng), q, args.k)
    elif args.solver == "feature":
        classify = baselines.feature_arithmetic_classify
    else:  # parallelogram
        if not args.ckpt:
            raise TrainingError("parallelogram baseline needs --ckpt for embeddings")
        ckpt = load_checkpoint(args.ckpt)
        vocab = _retrieval_vocab(args, quads)

        def classify(q):
            return baselines.parallelogram_solve(
                ckpt, q.a, q.b, q.c, vocab, metric=args.metric) == q.d

    totals = {1: 0, 0: 0}
    correct = {1: 0, 0: 0}
    for base in quads:
        for form, label in augment_for_evaluation(base):
            verdict = classify(form)
            totals[label] += 1
            correct[label] += int(verdict == bool(label))
    valid_acc = 100.0 * correct[1] / totals[1] if totals[1] else 0.0
    invalid_acc = 100.0 * correct[0] / totals[0] if totals[0] else 0.0
    print(f"solver={args.solver} valid_accuracy={valid_acc:.2f} "
          f"invalid_accuracy={invalid_acc:.2f} "
          f"(n_valid={totals[1]}, n_invalid={totals[0]})")
    if args.out:
        rows = [ReportRow(args.language, 0.0, 0, "valid_accuracy", valid_acc),
                ReportRow(args.language, 0.0, 0, "invalid_accuracy", invalid_acc)]
        emit_report(PerturbationReport((0.0,), 1, rows), args.out)
        inputs = [args.data_test] + ([args.ckpt] if args.ckpt else [])
        _manifest(args, inputs, [args.out])
    return 0


def cmd_perturb(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    quads = _load_capped(args.data_test, args.cap, args.seed)
    probs = [float(p) for p in args.probs.split(",") if p]
    vocab = None
    if ckpt.task == "regression":
        vocab = _retrieval_vocab(args, quads)
    report = perturbation_study(ckpt, quads, probs, repeats=args.repeats,
                                rng=Rng(args.seed).stream("perturb"),
                                vocab=vocab, metric=args.metric)
    emit_report(report, args.out)
    for (p_d, metric), (mean, std) in sorted(report.summary().items()):
        _log(f"p_d={p_d}: {metric} = {mean:.2f} +- {std:.2f}")
    outputs = [args.out]
    if args.svg:
        emit_svg(report, args.svg, title=ckpt.metadata.get("language", ""))
        outputs.append(args.svg)
    inputs = [args.ckpt, args.data_test] + ([args.data] if args.data else [])
    _manifest(args, inputs, outputs)
    return 0


def cmd_report(args) -> int:
    report = read_report(getattr(args, "in"))
    for (p_d, metric), (mean, std) in sorted(report.summary().items()):
        print(f"p_d={p_d}: {metric} = {mean:.2f} +- {std:.2f}")
    if args.out:
        emit_svg(report, args.out)
        _manifest(args, [getattr(args, "in")], [args.out])
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphoanalogy",
        description="Morphological analogy pipeline: extraction, training, "
                    "evaluation, baselines, and perturbation studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("extract", help="extract analogical quadruples from a 3-column TSV")
    p.add_argument("--data", required=True)
    p.add_argument("--cap", type=int, default=50000,
                   help="subsample to this many quadruples (0 = no cap)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-clf", help="train embedder + analogy classifier")
    p.add_argument("--data", required=True, help="4-column quadruple TSV")
    p.add_argument("--language", default="")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--char-dim", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--invalid", type=int, choices=(3, 8, 24), default=8)
    p.add_argument("--cap", type=int, default=50000)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_train_clf)

    p = sub.add_parser("train-reg", help="train the analogy regressor")
    p.add_argument("--data", required=True)
    p.add_argument("--init-from", required=True,
                   help="classifier checkpoint providing the initial embedder")
    p.add_argument("--language", default="")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--freeze-epochs", type=int, default=10)
    p.add_argument("--cap", type=int, default=50000)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_train_reg)

    p = sub.add_parser("eval-clf", help="classification accuracy on a test set")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data-test", required=True)
    p.add_argument("--cap", type=int, default=0)
    p.add_argument("--out", default="")
    common(p)
    p.set_defaults(func=cmd_eval_clf)

    p = sub.add_parser("eval-reg", help="retrieval accuracy on a test set")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data-test", required=True)
    p.add_argument("--data", default="", help="train quadruples (for the vocabulary)")
    p.add_argument("--metric", choices=evaluator.METRICS, default="euclidean")
    p.add_argument("--cap", type=int, default=0)
    p.add_argument("--out", default="")
    common(p)
    p.set_defaults(func=cmd_eval_reg)

    p = sub.add_parser("baseline", help="evaluate a symbolic baseline as classifier")
    p.add_argument("--solver", choices=("alea", "feature", "parallelogram", "kolmo"),
                   required=True)
    p.add_argument("--data-test", default="")
    p.add_argument("--data", default="")
    p.add_argument("--language", default="")
    p.add_argument("--ckpt", default="", help="embedder checkpoint (parallelogram)")
    p.add_argument("--metric", choices=evaluator.METRICS, default="euclidean")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--rho", type=int, default=1000)
    p.add_argument("--cap", type=int, default=0)
    p.add_argument("--out", default="")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("perturb", help="dropout perturbation study")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data-test", required=True)
    p.add_argument("--data", default="", help="train quadruples (regression vocabulary)")
    p.add_argument("--probs", default="0.01,0.05,0.1,0.3")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--metric", choices=evaluator.METRICS, default="euclidean")
    p.add_argument("--cap", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default="")
    common(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("report", help="summarize a CSV report, optionally to SVG")
    p.add_argument("--in", required=True)
    p.add_argument("--out", default="")
    common(p, seed=False)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusFormatError, TrainingError, CheckpointError,
            evaluator.DegenerateVarianceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
