"""Corpus text metrics: BLEU, ROUGE-L and CIDEr-D, plus CIDEr rescaling."""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})

Ngram = Tuple[str, ...]


def tokenize(text: str | None) -> List[str]:
    """Lowercase, replace ASCII punctuation by spaces, split on whitespace."""
    if not text:
        return []
    return text.lower().translate(_PUNCT_TABLE).split()


@dataclass(frozen=True)
class TokenizedPair:
    candidate: Tuple[str, ...]
    references: Tuple[Tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "candidate", tuple(self.candidate))
        object.__setattr__(self, "references", tuple(tuple(r) for r in self.references))
        if not self.references:
            raise ValueError("a pair needs at least one reference")

    @classmethod
    def from_text(cls, candidate: str | None, references: Sequence[str]) -> "TokenizedPair":
        return cls(tuple(tokenize(candidate)), tuple(tuple(tokenize(r)) for r in references))


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_pairs(pairs: Sequence[TokenizedPair]) -> None:
    if not pairs:
        raise ValueError("need at least one pair")


def bleu(pairs: Sequence[TokenizedPair], max_n: int = 4, smoothing: float = 0.0) -> float:
    """Corpus-level BLEU with clipped n-gram precisions and brevity penalty.

    ``smoothing`` > 0 replaces zero matched counts by that epsilon; with the
    default of 0 any zero precision makes the score 0. Reference length per
    pair is the reference length closest to the candidate (shorter wins ties).
    """
    _check_pairs(pairs)
    matched = [0] * max_n
    total = [0] * max_n
    cand_len = 0
    ref_len = 0
    for p in pairs:
        cand = p.candidate
        cand_len += len(cand)
        ref_len += min((abs(len(r) - len(cand)), len(r)) for r in p.references)[1]
        for n in range(1, max_n + 1):
            counts = ngrams(cand, n)
            max_ref: Counter = Counter()
            for r in p.references:
                max_ref |= ngrams(r, n)
            matched[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            total[n - 1] += max(0, len(cand) - n + 1)
    if cand_len == 0:
        return 0.0
    log_p = 0.0
    for m, t in zip(matched, total):
        if t == 0:
            return 0.0
        if m == 0:
            if smoothing <= 0:
                return 0.0
            m = smoothing
        log_p += math.log(m / t)
    bp = math.exp(min(0.0, 1.0 - ref_len / cand_len))
    return bp * math.exp(log_p / max_n)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_pair(cand: Sequence[str], refs: Sequence[Sequence[str]], beta: float = 1.2) -> float:
    best = 0.0
    for ref in refs:
        lcs = lcs_length(cand, ref)
        if lcs == 0:
            continue
        p = lcs / len(cand)
        r = lcs / len(ref)
        f = (1 + beta ** 2) * p * r / (r + beta ** 2 * p)
        best = max(best, f)
    return best


def rouge_l(pairs: Sequence[TokenizedPair], beta: float = 1.2) -> float:
    """Mean over pairs of the best LCS F-measure against any reference."""
    _check_pairs(pairs)
    return sum(rouge_l_pair(p.candidate, p.references, beta) for p in pairs) / len(pairs)


def _all_ngrams(tokens: Sequence[str], max_n: int) -> Counter:
    out: Counter = Counter()
    for n in range(1, max_n + 1):
        out.update(ngrams(tokens, n))
    return out


def cider_scores(pairs: Sequence[TokenizedPair], max_n: int = 4, sigma: float = 6.0) -> List[float]:
    """Per-pair CIDEr-D scores.

    Document frequencies come from the references of the whole corpus. Follows
    the widely used coco-caption scorer, including its length term, which
    counts bigrams rather than tokens.
    """
    _check_pairs(pairs)
    ref_counts = [[_all_ngrams(r, max_n) for r in p.references] for p in pairs]
    df: Counter = Counter()
    for refs in ref_counts:
        df.update({g for counts in refs for g in counts})
    log_n = math.log(float(len(pairs)))

    def to_vec(counts: Counter):
        vec: List[Dict[Ngram, float]] = [{} for _ in range(max_n)]
        norm = [0.0] * max_n
        length = 0
        for g, tf in counts.items():
            n = len(g) - 1
            w = tf * (log_n - math.log(max(1.0, df[g])))
            vec[n][g] = w
            norm[n] += w * w
            if n == 1:
                length += tf
        return vec, [math.sqrt(x) for x in norm], length

    scores = []
    for p, refs in zip(pairs, ref_counts):
        vh, nh, lh = to_vec(_all_ngrams(p.candidate, max_n))
        acc = [0.0] * max_n
        for rc in refs:
            vr, nr, lr = to_vec(rc)
            penalty = math.exp(-((lh - lr) ** 2) / (2 * sigma ** 2))
            for n in range(max_n):
                val = sum(min(w, vr[n].get(g, 0.0)) * vr[n].get(g, 0.0) for g, w in vh[n].items())
                if nh[n] != 0 and nr[n] != 0:
                    val /= nh[n] * nr[n]
                acc[n] += val * penalty
        scores.append(10.0 * (sum(acc) / max_n) / len(refs))
    return scores


def cider(pairs: Sequence[TokenizedPair], max_n: int = 4, sigma: float = 6.0) -> float:
    """Corpus CIDEr-D: the mean of the per-pair scores (unbounded above)."""
    scores = cider_scores(pairs, max_n, sigma)
    return sum(scores) / len(scores)


def rescale_cider(c: float) -> float:
    """log10(c + 1), mapping raw CIDEr into roughly [0, 1]."""
    if c < 0:
        raise ValueError(f"CIDEr must be >= 0, got {c}")
    return math.log10(c + 1.0)
