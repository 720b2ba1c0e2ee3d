"""Corpus-level text generation metrics implemented from first principles.

All four metrics share one preprocessing step (lowercase, strip
punctuation, whitespace tokens).  Accumulating float sums go through
math.fsum so results do not depend on iteration order, which keeps the
metrics exactly invariant under vocabulary relabeling.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")

DEFAULT_MAX_N = 4
DEFAULT_ROUGE_BETA = 1.2
DEFAULT_CIDER_SCALE = 10.0

SMOOTHING_MODES = ("none", "add-one-sentence")


def preprocess(text: str) -> list[str]:
    """Lowercased word tokens with punctuation stripped."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class EvalItem:
    id: str
    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if not self.references:
            raise ValueError(f"item {self.id!r} has no references")


@dataclass(frozen=True)
class EvalCorpus:
    items: tuple[EvalItem, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("empty evaluation corpus")

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def from_texts(cls, rows: Iterable[tuple[str, str, Sequence[str]]]) -> "EvalCorpus":
        """Rows of (id, candidate text, reference texts)."""
        items = [
            EvalItem(
                id=str(item_id),
                candidate=tuple(preprocess(candidate)),
                references=tuple(tuple(preprocess(ref)) for ref in references),
            )
            for item_id, candidate, references in rows
        ]
        return cls(tuple(items))

    @classmethod
    def load_jsonl(cls, path: Union[str, Path]) -> "EvalCorpus":
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    rows.append(
                        (record["id"], record["candidate"], list(record["references"]))
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"evaluation input line {line_no}: {exc}") from exc
        return cls.from_texts(rows)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# --- BLEU ---


def modified_precision_counts(
    candidate: Sequence[str], references: Sequence[Sequence[str]], n: int
) -> tuple[int, int]:
    """Clipped match count and total n-gram count for one candidate."""
    counts = _ngram_counts(candidate, n)
    if not counts:
        return 0, 0
    max_ref: dict[tuple, int] = {}
    for ref in references:
        for gram, count in _ngram_counts(ref, n).items():
            if count > max_ref.get(gram, 0):
                max_ref[gram] = count
    clipped = sum(min(count, max_ref.get(gram, 0)) for gram, count in counts.items())
    return clipped, sum(counts.values())


def closest_reference_length(candidate_len: int, reference_lens: Sequence[int]) -> int:
    """Reference length closest to the candidate's; ties pick the shorter."""
    return min(reference_lens, key=lambda r: (abs(r - candidate_len), r))


def _bleu_from_stats(
    clipped: Sequence[int], totals: Sequence[int], cand_len: int, ref_len: int, max_n: int
) -> list[float]:
    if cand_len == 0:
        return [0.0] * max_n
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    scores = []
    log_sum = 0.0
    dead = False
    for n in range(1, max_n + 1):
        if clipped[n - 1] == 0 or totals[n - 1] == 0:
            dead = True
        if dead:
            scores.append(0.0)
            continue
        log_sum += math.log(clipped[n - 1] / totals[n - 1])
        scores.append(brevity * math.exp(log_sum / n))
    return scores


def bleu(corpus: EvalCorpus, max_n: int = DEFAULT_MAX_N, smoothing: str = "none") -> list[float]:
    """Cumulative BLEU-1..max_n.

    'none' is plain corpus-level BLEU (clipped counts pooled over items,
    one brevity penalty from summed lengths).  'add-one-sentence' scores
    each item separately with add-one smoothing on the n>1 precisions and
    averages the per-item scores.
    """
    if smoothing not in SMOOTHING_MODES:
        raise ValueError(f"unknown smoothing mode {smoothing!r}")
    if smoothing == "add-one-sentence":
        per_item = [
            _sentence_bleu_add_one(item, max_n) for item in corpus.items
        ]
        return [
            math.fsum(scores[n] for scores in per_item) / len(per_item)
            for n in range(max_n)
        ]
    clipped = [0] * max_n
    totals = [0] * max_n
    cand_len = 0
    ref_len = 0
    for item in corpus.items:
        cand_len += len(item.candidate)
        ref_len += closest_reference_length(
            len(item.candidate), [len(r) for r in item.references]
        )
        for n in range(1, max_n + 1):
            c, t = modified_precision_counts(item.candidate, item.references, n)
            clipped[n - 1] += c
            totals[n - 1] += t
    return _bleu_from_stats(clipped, totals, cand_len, ref_len, max_n)


def _sentence_bleu_add_one(item: EvalItem, max_n: int) -> list[float]:
    cand_len = len(item.candidate)
    if cand_len == 0:
        return [0.0] * max_n
    ref_len = closest_reference_length(cand_len, [len(r) for r in item.references])
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    scores = []
    log_sum = 0.0
    dead = False
    for n in range(1, max_n + 1):
        c, t = modified_precision_counts(item.candidate, item.references, n)
        if n > 1:
            c, t = c + 1, t + 1
        if c == 0 or t == 0:
            dead = True
        if dead:
            scores.append(0.0)
            continue
        log_sum += math.log(c / t)
        scores.append(brevity * math.exp(log_sum / n))
    return scores


def bleu_items(corpus: EvalCorpus, max_n: int = DEFAULT_MAX_N) -> list[list[float]]:
    """Per-item sentence BLEU (unsmoothed corpus formula on one item)."""
    out = []
    for item in corpus.items:
        singleton = EvalCorpus((item,))
        out.append(bleu(singleton, max_n=max_n))
    return out


# --- METEOR ---


_SEARCH_NODE_CAP = 100_000


def _greedy_alignment_chunks(candidate: Sequence[str], reference: Sequence[str]) -> int:
    """First-fit alignment preferring run continuation; chunk count."""
    positions: dict[str, list[int]] = defaultdict(list)
    for j, word in enumerate(reference):
        positions[word].append(j)
    used: set[int] = set()
    chunks = 0
    last_c = last_r = -2
    for i, word in enumerate(candidate):
        options = [j for j in positions.get(word, ()) if j not in used]
        if not options:
            continue
        if last_c == i - 1 and (last_r + 1) in options:
            j = last_r + 1
        else:
            j = options[0]
        used.add(j)
        if not (last_c == i - 1 and last_r == j - 1):
            chunks += 1
        last_c, last_r = i, j
    return chunks


def _alignment(candidate: Sequence[str], reference: Sequence[str]) -> tuple[int, int]:
    """(matches, chunks) of an exact-match unigram alignment.

    Matches are maximal by construction; among maximal alignments the
    search minimizes the number of contiguous chunks.  A node cap bounds
    pathological duplicate blowups, falling back to the greedy solution.
    """
    overlap = Counter(candidate) & Counter(reference)
    total = sum(overlap.values())
    if total == 0:
        return 0, 0

    ref_positions: dict[str, list[int]] = defaultdict(list)
    for j, word in enumerate(reference):
        if word in overlap:
            ref_positions[word].append(j)
    need = dict(overlap)
    avail = Counter(word for word in candidate if word in overlap)

    best = [_greedy_alignment_chunks(candidate, reference)]
    if best[0] == 1:
        return total, 1
    used = [False] * len(reference)
    nodes = [0]

    def search(i: int, last_c: int, last_r: int, chunks: int) -> None:
        if chunks >= best[0]:
            return
        if nodes[0] > _SEARCH_NODE_CAP:
            return
        nodes[0] += 1
        if i == len(candidate):
            best[0] = chunks
            return
        word = candidate[i]
        if word in need:
            if need[word] > 0:
                continuation = last_c == i - 1
                options = ref_positions[word]
                # try run continuation first so good bounds arrive early
                ordered = options
                if continuation and (last_r + 1) in options:
                    ordered = [last_r + 1] + [j for j in options if j != last_r + 1]
                for j in ordered:
                    if used[j]:
                        continue
                    extends = continuation and j == last_r + 1
                    used[j] = True
                    need[word] -= 1
                    avail[word] -= 1
                    search(i + 1, i, j, chunks if extends else chunks + 1)
                    used[j] = False
                    need[word] += 1
                    avail[word] += 1
            if avail[word] - 1 >= need[word]:
                avail[word] -= 1
                search(i + 1, last_c, last_r, chunks)
                avail[word] += 1
        else:
            search(i + 1, last_c, last_r, chunks)

    search(0, -2, -2, 0)
    return total, best[0]


def _meteor_pair(candidate: Sequence[str], reference: Sequence[str]) -> float:
    matches, chunks = _alignment(candidate, reference)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1.0 - penalty)


def meteor_items(corpus: EvalCorpus) -> list[float]:
    return [
        max(_meteor_pair(item.candidate, ref) for ref in item.references)
        for item in corpus.items
    ]


def meteor(corpus: EvalCorpus) -> float:
    items = meteor_items(corpus)
    return math.fsum(items) / len(items)


# --- ROUGE-L ---


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length by dynamic programming."""
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


def _rouge_pair(candidate: Sequence[str], reference: Sequence[str], beta: float) -> float:
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    recall = lcs / len(reference)
    precision = lcs / len(candidate)
    denominator = recall + beta * beta * precision
    if denominator == 0.0:
        return 0.0
    return (1.0 + beta * beta) * recall * precision / denominator


def rouge_l_items(corpus: EvalCorpus, beta: float = DEFAULT_ROUGE_BETA) -> list[float]:
    return [
        max(_rouge_pair(item.candidate, ref, beta) for ref in item.references)
        for item in corpus.items
    ]


def rouge_l(corpus: EvalCorpus, beta: float = DEFAULT_ROUGE_BETA) -> float:
    items = rouge_l_items(corpus, beta)
    return math.fsum(items) / len(items)


# --- CIDEr ---


def _document_frequencies(corpus: EvalCorpus, max_n: int) -> Counter:
    """How many items' reference sets contain each n-gram."""
    df: Counter = Counter()
    for item in corpus.items:
        grams: set[tuple] = set()
        for ref in item.references:
            for n in range(1, max_n + 1):
                grams.update(_ngram_counts(ref, n))
        df.update(grams)
    return df


def _tfidf_vector(tokens: Sequence[str], n: int, idf: dict[tuple, float]) -> dict[tuple, float]:
    return {
        gram: count * idf[gram]
        for gram, count in _ngram_counts(tokens, n).items()
    }


def _cosine(u: dict[tuple, float], v: dict[tuple, float]) -> float:
    norm_u = math.sqrt(math.fsum(x * x for x in u.values()))
    norm_v = math.sqrt(math.fsum(x * x for x in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    if len(v) < len(u):
        u, v = v, u
    dot = math.fsum(value * v.get(gram, 0.0) for gram, value in u.items())
    return dot / (norm_u * norm_v)


def cider_items(
    corpus: EvalCorpus, max_n: int = DEFAULT_MAX_N, scale: float = DEFAULT_CIDER_SCALE
) -> list[float]:
    """Per-item TF-IDF n-gram cosine scores.

    IDF treats each item's reference set as one document: idf(g) =
    log(N / df(g)) with df clamped to at least one.
    """
    df = _document_frequencies(corpus, max_n)
    n_docs = len(corpus.items)
    idf_cache: dict[tuple, float] = {}

    def idf(gram: tuple) -> float:
        value = idf_cache.get(gram)
        if value is None:
            value = idf_cache[gram] = math.log(n_docs / max(df.get(gram, 0), 1))
        return value

    scores: list[float] = []
    for item in corpus.items:
        per_n: list[float] = []
        for n in range(1, max_n + 1):
            grams_needed = set(_ngram_counts(item.candidate, n))
            for ref in item.references:
                grams_needed.update(_ngram_counts(ref, n))
            local_idf = {gram: idf(gram) for gram in grams_needed}
            cand_vec = _tfidf_vector(item.candidate, n, local_idf)
            sims = [
                _cosine(cand_vec, _tfidf_vector(ref, n, local_idf))
                for ref in item.references
            ]
            per_n.append(math.fsum(sims) / len(sims))
        scores.append(scale * math.fsum(per_n) / max_n)
    return scores


def cider(
    corpus: EvalCorpus, max_n: int = DEFAULT_MAX_N, scale: float = DEFAULT_CIDER_SCALE
) -> float:
    items = cider_items(corpus, max_n=max_n, scale=scale)
    return math.fsum(items) / len(items)


# --- combined report ---


@dataclass(frozen=True)
class MetricReport:
    bleu: list[float]
    meteor: float
    rouge_l: float
    cider: float
    per_item: list[dict] | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "bleu": self.bleu,
            "meteor": self.meteor,
            "rouge_l": self.rouge_l,
            "cider": self.cider,
        }
        if self.per_item is not None:
            out["items"] = self.per_item
        return out


def evaluate(
    corpus: EvalCorpus,
    max_n: int = DEFAULT_MAX_N,
    smoothing: str = "none",
    rouge_beta: float = DEFAULT_ROUGE_BETA,
    cider_scale: float = DEFAULT_CIDER_SCALE,
    per_item: bool = False,
) -> MetricReport:
    report = MetricReport(
        bleu=bleu(corpus, max_n=max_n, smoothing=smoothing),
        meteor=meteor(corpus),
        rouge_l=rouge_l(corpus, beta=rouge_beta),
        cider=cider(corpus, max_n=max_n, scale=cider_scale),
    )
    if not per_item:
        return report
    items = []
    bleu_per_item = bleu_items(corpus, max_n=max_n)
    meteor_per_item = meteor_items(corpus)
    rouge_per_item = rouge_l_items(corpus, beta=rouge_beta)
    cider_per_item = cider_items(corpus, max_n=max_n, scale=cider_scale)
    for i, item in enumerate(corpus.items):
        items.append(
            {
                "id": item.id,
                "bleu": bleu_per_item[i],
                "meteor": meteor_per_item[i],
                "rouge_l": rouge_per_item[i],
                "cider": cider_per_item[i],
            }
        )
    return MetricReport(
        bleu=report.bleu,
        meteor=report.meteor,
        rouge_l=report.rouge_l,
        cider=report.cider,
        per_item=items,
    )
