"""Phone-error-rate scoring for externally produced hypotheses.

Alignment is minimum edit distance with unit substitution/deletion/insertion
costs; backtrace ties are resolved substitution first, then insertion, then
deletion, so counts are deterministic. Phone sequences are plain sequences
of whitespace-free label strings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlignmentCounts:
    substitutions: int
    deletions: int
    insertions: int
    hits: int
    ref_len: int

    def __post_init__(self):
        for name in ("substitutions", "deletions", "insertions", "hits", "ref_len"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.hits + self.substitutions + self.deletions != self.ref_len:
            raise ValueError("hits + substitutions + deletions must equal ref_len")

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def align(ref, hyp) -> AlignmentCounts:
    """Levenshtein-align a hypothesis against a reference phone sequence."""
    r = list(ref)
    h = list(hyp)
    m, n = len(r), len(h)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dp[i][0] = i
    for j in range(1, n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        ri = r[i - 1]
        row = dp[i]
        prev = dp[i - 1]
        for j in range(1, n + 1):
            sub = prev[j - 1] + (0 if ri == h[j - 1] else 1)
            row[j] = min(sub, row[j - 1] + 1, prev[j] + 1)

    hits = subs = dels = ins = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + (0 if r[i - 1] == h[j - 1] else 1):
            if r[i - 1] == h[j - 1]:
                hits += 1
            else:
                subs += 1
            i, j = i - 1, j - 1
        elif j > 0 and dp[i][j] == dp[i][j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return AlignmentCounts(subs, dels, ins, hits, m)


def per(counts: AlignmentCounts) -> float:
    """100 * (S + D + I) / ref_len; insertions can push this past 100."""
    if counts.ref_len == 0:
        raise ValueError("PER is undefined for an empty reference")
    return 100.0 * counts.errors / counts.ref_len


@dataclass(frozen=True)
class CrossfoldReport:
    per_fold: tuple
    mean: float


def crossfold_report(per_fold_scores) -> CrossfoldReport:
    """Unweighted mean over exactly three fold-level scores."""
    scores = tuple(float(s) for s in per_fold_scores)
    if len(scores) != 3:
        raise ValueError(f"protocol uses exactly 3 folds, got {len(scores)}")
    return CrossfoldReport(scores, sum(scores) / 3.0)


@dataclass(frozen=True)
class CorpusScore:
    """Corpus-level (micro) PER and the mean of per-utterance PERs (macro).

    The two differ whenever utterance lengths differ; both are reported
    and labeled so nobody mistakes one for the other.
    """

    utterances: dict  # id -> AlignmentCounts
    micro_per: float
    macro_per: float
    totals: AlignmentCounts


def score_corpus(refs: dict, hyps: dict) -> CorpusScore:
    """Align every reference against its hypothesis and aggregate.

    Missing hypotheses score as empty (all deletions) with a warning;
    hypothesis ids without a reference are ignored with a warning.
    """
    extra = set(hyps) - set(refs)
    if extra:
        log.warning("ignoring %d hypothesis ids with no reference: %s",
                    len(extra), sorted(extra)[:5])
    utterances = {}
    per_utt_pers = []
    tot_s = tot_d = tot_i = tot_h = tot_n = 0
    for utt_id in refs:
        ref = refs[utt_id]
        hyp = hyps.get(utt_id)
        if hyp is None:
            log.warning("no hypothesis for %s; scoring as empty", utt_id)
            hyp = ()
        counts = align(ref, hyp)
        utterances[utt_id] = counts
        if counts.ref_len > 0:
            per_utt_pers.append(per(counts))
        tot_s += counts.substitutions
        tot_d += counts.deletions
        tot_i += counts.insertions
        tot_h += counts.hits
        tot_n += counts.ref_len
    totals = AlignmentCounts(tot_s, tot_d, tot_i, tot_h, tot_n)
    micro = per(totals) if tot_n else 0.0
    macro = sum(per_utt_pers) / len(per_utt_pers) if per_utt_pers else 0.0
    return CorpusScore(utterances, micro, macro, totals)


def read_trn(path) -> dict:
    """Parse `<utt-id> p1 p2 ...` transcript lines into an id -> phones map."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            utt_id, phones = parts[0], tuple(parts[1:])
            if utt_id in out:
                raise ValueError(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
            out[utt_id] = phones
    return out
