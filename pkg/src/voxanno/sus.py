"""System Usability Scale scoring and letter grading.

Ten Likert answers in 1..5; odd-numbered statements are positively worded
and contribute (answer - 1), even-numbered ones (5 - answer); the sum is
scaled by 2.5 onto [0, 100].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MalformedResponse, OutOfRange

# Coarsest bands consistent with published grade tables (68 grades as D).
GRADE_BANDS = (
    (90.0, "A"),
    (80.0, "B"),
    (70.0, "C"),
    (65.0, "D"),
)


@dataclass(frozen=True)
class SusResponse:
    answers: tuple[int, ...]
    respondent: str = ""

    def __post_init__(self):
        answers = tuple(int(a) for a in self.answers)
        if len(answers) != 10:
            raise MalformedResponse(f"expected 10 answers, got {len(answers)}")
        if any(a < 1 or a > 5 for a in answers):
            raise MalformedResponse(f"answers must lie in 1..5: {answers}")
        object.__setattr__(self, "answers", answers)


def sus_score(response: SusResponse) -> float:
    total = 0
    for i, answer in enumerate(response.answers):
        if i % 2 == 0:  # statements 1, 3, 5, 7, 9
            total += answer - 1
        else:
            total += 5 - answer
    return total * 2.5


def sus_grade(score: float) -> str:
    if not 0.0 <= score <= 100.0:
        raise OutOfRange(f"score {score} outside [0, 100]")
    for floor, letter in GRADE_BANDS:
        if score >= floor:
            return letter
    return "F"


@dataclass(frozen=True)
class SusCohort:
    scores: tuple[float, ...]
    grades: tuple[str, ...]
    respondents: tuple[str, ...]
    mean: float
    sd: float  # sample standard deviation


def score_cohort(responses: Sequence[SusResponse]) -> SusCohort:
    scores = tuple(sus_score(r) for r in responses)
    grades = tuple(sus_grade(s) for s in scores)
    arr = np.asarray(scores, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return SusCohort(
        scores=scores,
        grades=grades,
        respondents=tuple(r.respondent for r in responses),
        mean=float(arr.mean()) if arr.size else 0.0,
        sd=sd,
    )


def read_responses_csv(path) -> list[SusResponse]:
    """One row per respondent: a ``respondent`` column plus q1..q10."""
    responses = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = [f"q{i}" for i in range(1, 11)]
        for row in reader:
            try:
                answers = tuple(int(row[c]) for c in cols)
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedResponse(f"{path}: bad row {row}") from exc
            responses.append(SusResponse(answers, respondent=row.get("respondent", "")))
    return responses


def write_cohort_csv(cohort: SusCohort, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["respondent", "score", "grade"])
        for who, score, grade in zip(cohort.respondents, cohort.scores, cohort.grades):
            writer.writerow([who, score, grade])
        writer.writerow(["cohort_mean", cohort.mean, ""])
        writer.writerow(["cohort_sd", cohort.sd, ""])
