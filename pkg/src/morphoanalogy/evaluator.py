"""Evaluation: accuracies, retrieval solving, perturbation studies, t-tests.

Classifier evaluation scores the 8 valid forms plus the full set of invalid
forms of every test quadruple. Regression evaluation predicts the fourth
embedding for the 8 valid forms and retrieves the nearest vocabulary word.
The perturbation study zeroes embedding components between the embedder and
the head (all four inputs for classification; only a, b, c for regression,
with the retrieval vocabulary left untouched).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import augment
from .corpus import Quadruple, Vocabulary
from .embedder import embed_batch
from .annc import annc_forward
from .annr import annr_forward
from .numkit import Rng, dropout
from .trainer import (
    VALID_SLOTS_ARRAY,
    Checkpoint,
    TrainingError,
    _batches_by_budget,
    annc_from_checkpoint,
    annr_from_checkpoint,
    build_form_batch,
    embedder_from_checkpoint,
)

EVAL_FORM_BUDGET = 4096
METRICS = ("euclidean", "cosine")


class DegenerateVarianceError(ValueError):
    """A t-test sample has zero variance, so the statistic is undefined."""


@dataclass(frozen=True)
class ClassReport:
    valid_accuracy: float      # percent of valid forms scored >= 0.5
    invalid_accuracy: float    # percent of invalid forms scored < 0.5
    n_valid: int
    n_invalid: int
    n_valid_correct: int
    n_invalid_correct: int


class ReportRow(NamedTuple):
    language: str
    p_d: float
    repeat: int
    metric: str
    value: float


@dataclass
class PerturbationReport:
    """Per-dropout-probability accuracies over repeated perturbed evaluations."""

    probs: tuple[float, ...]
    repeats: int
    rows: list[ReportRow] = field(default_factory=list)

    def summary(self) -> dict[tuple[float, str], tuple[float, float]]:
        """(p_d, metric) -> (mean, std) over repeats."""
        grouped: dict[tuple[float, str], list[float]] = {}
        for row in self.rows:
            grouped.setdefault((row.p_d, row.metric), []).append(row.value)
        return {key: (float(np.mean(vals)), float(np.std(vals)))
                for key, vals in grouped.items()}

    def means(self, metric: str) -> list[float]:
        """Mean value per probability, in the order of ``probs``."""
        summary = self.summary()
        return [summary[(p, metric)][0] for p in self.probs]


# ---------------------------------------------------------------------------
# classifier evaluation


def _evaluation_plan(quads: Sequence[Quadruple]):
    slot_arrays, label_arrays = [], []
    for q in quads:
        invalid = augment.invalid_slots_for(q)
        slots = np.concatenate([VALID_SLOTS_ARRAY,
                                np.array(invalid, dtype=np.int64).reshape(-1, 4)])
        labels = np.concatenate([np.ones(8, dtype=np.float32),
                                 np.zeros(len(invalid), dtype=np.float32)])
        slot_arrays.append(slots)
        label_arrays.append(labels)
    return slot_arrays, label_arrays


def eval_classifier(ckpt: Checkpoint, test_quads: Sequence[Quadruple],
                    dropout_p: float = 0.0, rng: Optional[Rng] = None) -> ClassReport:
    """Accuracy on valid and invalid augmented forms of the test quadruples."""
    if ckpt.task != "classification":
        raise TrainingError(f"expected a classification checkpoint, got {ckpt.task!r}")
    if not test_quads:
        raise TrainingError("empty evaluation set")
    e_params = embedder_from_checkpoint(ckpt)
    c_params = annc_from_checkpoint(ckpt)
    charset = ckpt.charset()
    slot_arrays, label_arrays = _evaluation_plan(test_quads)
    counts = np.array([len(s) for s in slot_arrays])
    order = np.arange(len(test_quads))

    totals = {1: 0, 0: 0}
    correct = {1: 0, 0: 0}
    for base_idx in _batches_by_budget(order, counts, EVAL_FORM_BUDGET):
        quads = [test_quads[i] for i in base_idx]
        slots = [slot_arrays[i] for i in base_idx]
        labels = np.concatenate([label_arrays[i] for i in base_idx])
        batch = build_form_batch(e_params, charset, quads, slots)
        stacks = dropout(batch.stacks, dropout_p, rng) if dropout_p else batch.stacks
        scores, _ = annc_forward(c_params, stacks)
        predicted_valid = scores >= 0.5
        for label in (1, 0):
            mask = labels == label
            totals[label] += int(mask.sum())
            hit = predicted_valid[mask] if label == 1 else ~predicted_valid[mask]
            correct[label] += int(hit.sum())

    return ClassReport(
        valid_accuracy=100.0 * correct[1] / totals[1] if totals[1] else 0.0,
        invalid_accuracy=100.0 * correct[0] / totals[0] if totals[0] else 0.0,
        n_valid=totals[1], n_invalid=totals[0],
        n_valid_correct=correct[1], n_invalid_correct=correct[0])


# ---------------------------------------------------------------------------
# retrieval solving


def embed_vocabulary(ckpt_or_params, vocab: Vocabulary, charset=None,
                     chunk: int = 2048) -> np.ndarray:
    """(|vocab|, n) embedding matrix in vocabulary (lexicographic) order."""
    if isinstance(ckpt_or_params, Checkpoint):
        e_params = embedder_from_checkpoint(ckpt_or_params)
        charset = ckpt_or_params.charset()
    else:
        e_params = ckpt_or_params
    if len(vocab) == 0:
        raise ValueError("empty vocabulary")
    parts = []
    words = list(vocab)
    for start in range(0, len(words), chunk):
        emb, _ = embed_batch(e_params, words[start:start + chunk], charset)
        parts.append(emb)
    return np.concatenate(parts, axis=0)


def retrieve_nearest(queries: np.ndarray, vocab_matrix: np.ndarray,
                     metric: str = "euclidean", chunk: int = 1024) -> np.ndarray:
    """Index of the nearest vocabulary row per query; first minimum wins.

    With the vocabulary in lexicographic order, the first-minimum rule makes
    ties resolve lexicographically.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    out = np.empty(len(queries), dtype=np.int64)
    v_t = vocab_matrix.T.astype(np.float64)
    if metric == "euclidean":
        v_sq = (v_t * v_t).sum(axis=0)
        for start in range(0, len(queries), chunk):
            q = queries[start:start + chunk].astype(np.float64)
            d2 = v_sq[None, :] - 2.0 * (q @ v_t)
            out[start:start + chunk] = np.argmin(d2, axis=1)
    else:
        v_norm = np.maximum(np.sqrt((v_t * v_t).sum(axis=0)), 1e-12)
        for start in range(0, len(queries), chunk):
            q = queries[start:start + chunk].astype(np.float64)
            q_norm = np.maximum(np.linalg.norm(q, axis=1), 1e-12)
            sim = (q @ v_t) / (q_norm[:, None] * v_norm[None, :])
            out[start:start + chunk] = np.argmin(1.0 - sim, axis=1)
    return out


def solve_by_retrieval(ckpt: Checkpoint, a: str, b: str, c: str,
                       vocab: Vocabulary, metric: str = "euclidean") -> str:
    """Word whose embedding is nearest to the predicted embedding of d."""
    if ckpt.task != "regression":
        raise TrainingError(f"expected a regression checkpoint, got {ckpt.task!r}")
    e_params = embedder_from_checkpoint(ckpt)
    r_params = annr_from_checkpoint(ckpt)
    charset = ckpt.charset()
    emb, _ = embed_batch(e_params, [a, b, c], charset)
    pred, _ = annr_forward(r_params, emb[0:1], emb[1:2], emb[2:3])
    vocab_matrix = embed_vocabulary(e_params, vocab, charset)
    idx = retrieve_nearest(pred, vocab_matrix, metric)
    return vocab.words[idx[0]]


def eval_regressor(ckpt: Checkpoint, test_quads: Sequence[Quadruple],
                   vocab: Vocabulary, metric: str = "euclidean",
                   dropout_p: float = 0.0, rng: Optional[Rng] = None) -> float:
    """Retrieval accuracy (percent) over the 8 valid forms of each test base.

    A form counts as solved only when the retrieved word equals the gold d
    exactly (string equality).
    """
    if ckpt.task != "regression":
        raise TrainingError(f"expected a regression checkpoint, got {ckpt.task!r}")
    if not test_quads:
        raise TrainingError("empty evaluation set")
    e_params = embedder_from_checkpoint(ckpt)
    r_params = annr_from_checkpoint(ckpt)
    charset = ckpt.charset()
    vocab_matrix = embed_vocabulary(e_params, vocab, charset)

    counts = np.full(len(test_quads), len(VALID_SLOTS_ARRAY))
    order = np.arange(len(test_quads))
    n_correct, n_total = 0, 0
    for base_idx in _batches_by_budget(order, counts, EVAL_FORM_BUDGET):
        quads = [test_quads[i] for i in base_idx]
        slots = [VALID_SLOTS_ARRAY] * len(quads)
        batch = build_form_batch(e_params, charset, quads, slots)
        ea, eb, ec = (batch.stacks[:, i, :] for i in range(3))
        if dropout_p:
            ea = dropout(ea, dropout_p, rng)
            eb = dropout(eb, dropout_p, rng)
            ec = dropout(ec, dropout_p, rng)
        pred, _ = annr_forward(r_params, ea, eb, ec)
        nearest = retrieve_nearest(pred, vocab_matrix, metric)
        gold = [q[s[3]] for q, sl in zip(quads, slots) for s in sl]
        got = [vocab.words[i] for i in nearest]
        n_correct += sum(1 for g, w in zip(gold, got) if g == w)
        n_total += len(gold)
    return 100.0 * n_correct / n_total


# ---------------------------------------------------------------------------
# perturbation study


def perturbation_study(ckpt: Checkpoint, test_quads: Sequence[Quadruple],
                       probs: Sequence[float], repeats: int = 10,
                       rng: Optional[Rng] = None,
                       vocab: Optional[Vocabulary] = None,
                       metric: str = "euclidean") -> PerturbationReport:
    """Evaluate under embedding dropout for each probability, repeatedly.

    Classification perturbs all four stacked embeddings; regression perturbs
    only the a, b, c inputs and retrieves against the unperturbed vocabulary.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"dropout probability must be in [0, 1], got {p}")
    if ckpt.task == "regression" and vocab is None:
        raise TrainingError("regression perturbation study needs a vocabulary")
    rng = rng if rng is not None else Rng(0)
    language = ckpt.metadata.get("language", "")

    report = PerturbationReport(tuple(probs), repeats)
    for p_d in probs:
        for repeat in range(repeats):
            stream = rng.stream(f"perturb/p{p_d!r}/r{repeat}")
            if ckpt.task == "classification":
                res = eval_classifier(ckpt, test_quads, dropout_p=p_d, rng=stream)
                report.rows.append(ReportRow(language, p_d, repeat,
                                             "valid_accuracy", res.valid_accuracy))
                report.rows.append(ReportRow(language, p_d, repeat,
                                             "invalid_accuracy", res.invalid_accuracy))
            else:
                acc = eval_regressor(ckpt, test_quads, vocab, metric,
                                     dropout_p=p_d, rng=stream)
                report.rows.append(ReportRow(language, p_d, repeat, "accuracy", acc))
    return report


# ---------------------------------------------------------------------------
# Student t-tests


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-14:
            break
    return h


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _two_sided_p(t: float, df: float) -> float:
    if df <= 0:
        raise DegenerateVarianceError(f"degrees of freedom must be positive, got {df}")
    return betainc_regularized(df / 2.0, 0.5, df / (df + t * t))


def t_test(kind: str, x: Sequence[float], y: Optional[Sequence[float]] = None,
           popmean: float = 0.0) -> tuple[float, float]:
    """Student t statistic and two-sided p-value.

    kind: "one_sample" (x against popmean), "paired" (elementwise x - y), or
    "independent" (pooled-variance two-sample form). Zero-variance samples
    raise DegenerateVarianceError.
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == "one_sample":
        if x.size < 2:
            raise DegenerateVarianceError("one_sample needs at least 2 observations")
        sd = x.std(ddof=1)
        if sd == 0.0:
            raise DegenerateVarianceError("sample standard deviation is zero")
        t = (x.mean() - popmean) / (sd / math.sqrt(x.size))
        return float(t), _two_sided_p(float(t), x.size - 1)
    if kind == "paired":
        if y is None:
            raise ValueError("paired test needs two samples")
        y = np.asarray(y, dtype=np.float64)
        if x.shape != y.shape:
            raise ValueError(f"paired samples differ in length: {x.size} vs {y.size}")
        return t_test("one_sample", x - y, popmean=0.0)
    if kind == "independent":
        if y is None:
            raise ValueError("independent test needs two samples")
        y = np.asarray(y, dtype=np.float64)
        if x.size < 2 or y.size < 2:
            raise DegenerateVarianceError("independent test needs n >= 2 per sample")
        df = x.size + y.size - 2
        pooled = ((x.size - 1) * x.var(ddof=1) + (y.size - 1) * y.var(ddof=1)) / df
        if pooled == 0.0:
            raise DegenerateVarianceError("pooled variance is zero")
        t = (x.mean() - y.mean()) / math.sqrt(pooled * (1.0 / x.size + 1.0 / y.size))
        return float(t), _two_sided_p(float(t), df)
    raise ValueError(f"unknown t-test kind {kind!r}")


# ---------------------------------------------------------------------------
# report emission


CSV_HEADER = ("language", "p_d", "repeat", "metric", "value")


def emit_report(report, path) -> None:
    """Write report rows as CSV (one row per configuration and repeat)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in report.rows:
            writer.writerow([row.language, repr(row.p_d), row.repeat,
                             row.metric, repr(row.value)])


def read_report(path) -> PerturbationReport:
    """Parse a CSV written by emit_report back into a report."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header}")
        for rec in reader:
            rows.append(ReportRow(rec[0], float(rec[1]), int(rec[2]), rec[3], float(rec[4])))
    probs = tuple(dict.fromkeys(r.p_d for r in rows))
    repeats = max((r.repeat for r in rows), default=0) + 1
    report = PerturbationReport(probs, repeats if rows else 1)
    report.rows = rows
    return report


def emit_svg(report: PerturbationReport, path, title: str = "") -> None:
    """Static SVG bar chart: one bar group per p_d, std-dev error bars."""
    summary = report.summary()
    metrics = sorted({m for (_, m) in summary})
    probs = list(report.probs)
    group_w = 46 * max(1, len(metrics))
    width = 90 + group_w * len(probs)
    height = 320
    plot_h, x0, y0 = 240.0, 60, 280
    colors = {m: c for m, c in zip(metrics, ("#4878a8", "#d1605e", "#6aa56e"))}

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
             f'width="{width}" height="{height}">']
    if title:
        parts.append(f'<text x="{width / 2}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{width - 20}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 - plot_h}" stroke="black"/>')
    for tick in (0, 25, 50, 75, 100):
        ty = y0 - plot_h * tick / 100.0
        parts.append(f'<text x="{x0 - 8}" y="{ty + 4}" text-anchor="end" '
                     f'font-size="10">{tick}</text>')
        parts.append(f'<line x1="{x0 - 4}" y1="{ty}" x2="{x0}" y2="{ty}" stroke="black"/>')

    for gi, p_d in enumerate(probs):
        gx = x0 + 10 + gi * group_w
        parts.append(f'<g class="bar-group" data-pd="{p_d!r}">')
        for mi, metric in enumerate(metrics):
            mean, std = summary.get((p_d, metric), (0.0, 0.0))
            bx = gx + mi * 44
            bh = plot_h * mean / 100.0
            parts.append(f'<rect class="bar" x="{bx}" y="{y0 - bh:.2f}" width="36" '
                         f'height="{bh:.2f}" fill="{colors[metric]}"/>')
            cx = bx + 18
            lo, hi = y0 - plot_h * min(100.0, mean + std) / 100.0, y0 - plot_h * max(0.0, mean - std) / 100.0
            parts.append(f'<line class="error-bar" x1="{cx}" y1="{lo:.2f}" '
                         f'x2="{cx}" y2="{hi:.2f}" stroke="black" stroke-width="1.5"/>')
        parts.append(f'<text x="{gx + group_w / 2 - 10}" y="{y0 + 16}" text-anchor="middle" '
                     f'font-size="11">p_d={p_d}</text>')
        parts.append('</g>')
    for mi, metric in enumerate(metrics):
        ly = 36 + 14 * mi
        parts.append(f'<rect x="{width - 150}" y="{ly - 9}" width="10" height="10" '
                     f'fill="{colors[metric]}"/>')
        parts.append(f'<text x="{width - 136}" y="{ly}" font-size="11">{metric}</text>')
    parts.append('</svg>')
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
