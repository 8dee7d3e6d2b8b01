"""Evaluation metrics: normalized exact match, unigram F1, corpus BLEU,
ROUGE-N, and ROUGE-L.

EM/F1 normalization follows the open-domain-QA convention (lowercase, strip
punctuation, drop articles, collapse whitespace). Generation metrics (BLEU,
ROUGE) tokenize the same way minus article removal, since articles are
meaningful n-gram content. ROUGE F-measure is the plain harmonic mean.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, remove punctuation, drop articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def _qa_tokens(text: str) -> list[str]:
    return normalize_answer(text).split()


def _gen_tokens(text: str) -> list[str]:
    """Generation-metric tokenization: normalization minus article removal."""
    return text.lower().translate(_PUNCT_TABLE).split()


# ---------------------------------------------------------------------------
# QA metrics
# ---------------------------------------------------------------------------

def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def unigram_f1(pred: str, gold: str) -> float:
    """Harmonic mean of token-multiset precision and recall."""
    pred_tokens = _qa_tokens(pred)
    gold_tokens = _qa_tokens(gold)
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidates: Sequence[str],
    references: Sequence[str | Sequence[str]],
    max_n: int = 4,
    smoothing: str = "none",
) -> float:
    """Corpus-level BLEU: geometric mean of clipped n-gram precisions times
    the brevity penalty.

    Each reference entry may be a string or a list of strings (multi-reference
    clipping). n-levels with no candidate n-grams anywhere in the corpus are
    excluded from the geometric mean, so a candidate identical to its
    reference scores exactly 1 regardless of length or smoothing.
    """
    if len(candidates) != len(references):
        raise ValueError(
            f"{len(candidates)} candidates vs {len(references)} reference entries"
        )
    if not candidates:
        raise ValueError("empty corpus")
    if smoothing not in ("none", "add1"):
        raise ValueError(f"unknown smoothing {smoothing!r}")

    matched = [0] * (max_n + 1)
    total = [0] * (max_n + 1)
    candidate_length = 0
    reference_length = 0
    for candidate, refs in zip(candidates, references):
        if isinstance(refs, str):
            refs = [refs]
        cand_tokens = _gen_tokens(candidate)
        ref_token_lists = [_gen_tokens(r) for r in refs]
        candidate_length += len(cand_tokens)
        # Effective reference length: closest to the candidate, ties -> shorter.
        reference_length += min(
            (len(r) for r in ref_token_lists),
            key=lambda L: (abs(L - len(cand_tokens)), L),
        )
        for n in range(1, max_n + 1):
            cand_ngrams = _ngram_counts(cand_tokens, n)
            if not cand_ngrams:
                continue
            clip: Counter = Counter()
            for ref_tokens in ref_token_lists:
                clip |= _ngram_counts(ref_tokens, n)
            overlap = cand_ngrams & clip
            matched[n] += sum(overlap.values())
            total[n] += sum(cand_ngrams.values())

    log_sum = 0.0
    levels = 0
    for n in range(1, max_n + 1):
        if total[n] == 0:
            continue
        levels += 1
        if smoothing == "add1":
            precision = (matched[n] + 1) / (total[n] + 1)
        else:
            if matched[n] == 0:
                return 0.0
            precision = matched[n] / total[n]
        log_sum += math.log(precision)
    if levels == 0:
        return 0.0
    geo_mean = math.exp(log_sum / levels)
    if candidate_length == 0:
        return 0.0
    brevity = (
        1.0
        if candidate_length >= reference_length
        else math.exp(1 - reference_length / candidate_length)
    )
    return brevity * geo_mean


# ---------------------------------------------------------------------------
# ROUGE
# ---------------------------------------------------------------------------

class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


_ZERO_ROUGE = RougeScore(0.0, 0.0, 0.0)


def _prf(overlap: float, cand_total: float, ref_total: float) -> RougeScore:
    if cand_total == 0 or ref_total == 0 or overlap == 0:
        return _ZERO_ROUGE
    precision = overlap / cand_total
    recall = overlap / ref_total
    return RougeScore(precision, recall, 2 * precision * recall / (precision + recall))


def rouge_n(candidate: str, reference: str, n: int) -> RougeScore:
    """Clipped n-gram overlap precision/recall/F1 on normalized tokens."""
    cand = _ngram_counts(_gen_tokens(candidate), n)
    ref = _ngram_counts(_gen_tokens(reference), n)
    overlap = sum((cand & ref).values())
    return _prf(overlap, sum(cand.values()), sum(ref.values()))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Row-rolling dynamic program.
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS-based precision/recall/F1 on normalized tokens."""
    cand = _gen_tokens(candidate)
    ref = _gen_tokens(reference)
    lcs = _lcs_length(cand, ref)
    return _prf(lcs, len(cand), len(ref))


# ---------------------------------------------------------------------------
# Corpus scoring
# ---------------------------------------------------------------------------

@dataclass
class ScoreReport:
    em: float
    f1: float
    bleu: float
    rouge2_f: float
    rougeL_f: float
    n_examples: int
    per_example: list[dict] = field(default_factory=list)

    def as_dict(self, include_examples: bool = True) -> dict:
        out = {
            "em": self.em,
            "f1": self.f1,
            "bleu": self.bleu,
            "rouge2_f": self.rouge2_f,
            "rougeL_f": self.rougeL_f,
            "n_examples": self.n_examples,
        }
        if include_examples:
            out["per_example"] = self.per_example
        return out

    def as_table(self) -> str:
        """Aligned plain-text table, scores x100 with two decimals."""
        headers = ["EM", "F1", "BLEU", "R2", "RL"]
        values = [self.em, self.f1, self.bleu, self.rouge2_f, self.rougeL_f]
        cells = [f"{v * 100:.2f}" for v in values]
        width = max(len(h) for h in headers + cells) + 2
        header_row = "".join(h.rjust(width) for h in headers)
        value_row = "".join(c.rjust(width) for c in cells)
        return f"{header_row}\n{value_row}"


def score_corpus(
    predictions: Mapping[str, str],
    references: Mapping[str, Sequence[str] | str],
) -> ScoreReport:
    """Score aligned predictions against references (max over multi-references
    for EM/F1/ROUGE; BLEU uses its native multi-reference clipping)."""
    common_ids = sorted(set(predictions) & set(references))
    if not common_ids:
        raise ValueError("no overlapping ids between predictions and references")
    per_example = []
    em_total = f1_total = r2_total = rl_total = 0.0
    bleu_candidates = []
    bleu_references: list[Sequence[str]] = []
    for example_id in common_ids:
        pred = predictions[example_id]
        refs = references[example_id]
        if isinstance(refs, str):
            refs = [refs]
        em = max(exact_match(pred, r) for r in refs)
        f1 = max(unigram_f1(pred, r) for r in refs)
        r2 = max(rouge_n(pred, r, 2).f1 for r in refs)
        rl = max(rouge_l(pred, r).f1 for r in refs)
        per_example.append(
            {"id": example_id, "em": em, "f1": f1, "rouge2_f": r2, "rougeL_f": rl}
        )
        em_total += em
        f1_total += f1
        r2_total += r2
        rl_total += rl
        bleu_candidates.append(pred)
        bleu_references.append(list(refs))
    n = len(common_ids)
    return ScoreReport(
        em=em_total / n,
        f1=f1_total / n,
        bleu=bleu(bleu_candidates, bleu_references),
        rouge2_f=r2_total / n,
        rougeL_f=rl_total / n,
        n_examples=n,
        per_example=per_example,
    )
