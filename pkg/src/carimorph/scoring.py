"""Pairwise-vote aggregation into zero-sum quality scores.

Each candidate's score sums its vote margins against every other candidate,
normalized by the per-candidate vote budget s_max:

    score(i) = sum_{j != i} (s_i - s_j) / s_max

Scores are exact rationals (integer votes over s_max), which keeps the
zero-sum identity exact instead of accumulating float roundoff; convert with
float() at presentation boundaries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import AggregationError, TallyError


@dataclass(frozen=True)
class VoteTally:
    """Votes for the candidates competing on one photo."""

    candidates: tuple[str, ...]
    votes: tuple[int, ...]
    s_max: int = 40

    def __post_init__(self):
        cands = tuple(str(c) for c in self.candidates)
        votes = tuple(int(v) for v in self.votes)
        if len(cands) < 2:
            raise TallyError("need at least 2 candidates")
        if len(set(cands)) != len(cands):
            raise TallyError("candidate ids must be distinct")
        if len(votes) != len(cands):
            raise TallyError("one vote count per candidate required")
        if self.s_max <= 0:
            raise TallyError("s_max must be positive")
        if any(v < 0 for v in votes):
            raise TallyError("votes must be non-negative")
        if any(v > self.s_max for v in votes):
            raise TallyError(f"votes must not exceed s_max = {self.s_max}")
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "votes", votes)


def rank_score(tally: VoteTally) -> dict[str, Fraction]:
    """Zero-sum rank scores; for k candidates the range is
    [-(k-1), k-1] per candidate."""
    k = len(tally.candidates)
    total = sum(tally.votes)
    return {
        cand: Fraction(k * votes - total, tally.s_max)
        for cand, votes in zip(tally.candidates, tally.votes)
    }


def average_scores(per_photo_scores: list[dict[str, Fraction]]) -> dict[str, Fraction]:
    """Arithmetic mean of per-photo score maps over a shared candidate set."""
    if not per_photo_scores:
        raise AggregationError("no score maps to average")
    candidates = set(per_photo_scores[0])
    for scores in per_photo_scores[1:]:
        if set(scores) != candidates:
            raise AggregationError("score maps disagree on the candidate set")
    n = len(per_photo_scores)
    return {
        cand: sum((scores[cand] for scores in per_photo_scores), Fraction(0)) / n
        for cand in per_photo_scores[0]
    }


def load_vote_csv(path: str | Path, s_max: int = 40) -> dict[str, VoteTally]:
    """Read "photo_id,candidate_id,votes" rows into one tally per photo.

    A header row is skipped when present.  Candidate order follows first
    appearance within each photo.
    """
    per_photo: dict[str, tuple[list[str], list[int]]] = {}
    with Path(path).open("r", newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise TallyError(f"row {row_no}: expected photo_id,candidate_id,votes")
            photo, cand, votes = (cell.strip() for cell in row)
            if row_no == 1 and not votes.lstrip("-").isdigit():
                continue  # header
            try:
                count = int(votes)
            except ValueError as exc:
                raise TallyError(f"row {row_no}: bad vote count {votes!r}") from exc
            cands, counts = per_photo.setdefault(photo, ([], []))
            cands.append(cand)
            counts.append(count)
    if not per_photo:
        raise TallyError(f"{path}: no vote rows")
    return {
        photo: VoteTally(tuple(cands), tuple(counts), s_max=s_max)
        for photo, (cands, counts) in per_photo.items()
    }


def score_vote_csv(path: str | Path, out_path: str | Path, s_max: int = 40) -> dict[str, Fraction]:
    """Score every photo's tally, average across photos, and write
    "candidate_id,score" rows.  Returns the averaged scores."""
    tallies = load_vote_csv(path, s_max=s_max)
    averaged = average_scores([rank_score(t) for t in tallies.values()])
    with Path(out_path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["candidate_id", "score"])
        for cand in sorted(averaged):
            writer.writerow([cand, repr(float(averaged[cand]))])
    return averaged
