"""Adjudication of human/machine labels on attacked images.

Implements the study's validity rule: an attacked image is valid when at
least 2 of the 4 users name the true class, or at least 1 human user names
it with high confidence. Invalid images split into deceptive (a strict
human majority lands on the model's own wrong prediction) and ambiguous.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import CoverageError, InvariantError, ParseError, UsageError

CLASS_VOCABULARY = (
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
)

USER_KINDS = ("human", "machine")
CONDITIONS = ("clean", "adversarial")
CONFIDENCES = ("low", "high")


@dataclass(frozen=True)
class ImageMeta:
    image_id: str
    ground_truth: str
    sota_prediction: str

    def __post_init__(self):
        for label_field in ("ground_truth", "sota_prediction"):
            value = getattr(self, label_field)
            if value not in CLASS_VOCABULARY:
                raise ParseError(f"image {self.image_id}: unknown class {value!r} in {label_field}")


@dataclass(frozen=True)
class LabelRecord:
    user_id: str
    user_kind: str
    image_id: str
    condition: str
    predicted_class: str
    confidence: str

    def __post_init__(self):
        if self.user_kind not in USER_KINDS:
            raise ParseError(f"label for {self.image_id}: unknown user_kind {self.user_kind!r}")
        if self.condition not in CONDITIONS:
            raise ParseError(f"label for {self.image_id}: unknown condition {self.condition!r}")
        if self.predicted_class not in CLASS_VOCABULARY:
            raise ParseError(
                f"label for {self.image_id}: unknown class {self.predicted_class!r}"
            )
        if self.confidence not in CONFIDENCES:
            raise ParseError(f"label for {self.image_id}: unknown confidence {self.confidence!r}")


@dataclass(frozen=True)
class UserAccuracy:
    user_id: str
    user_kind: str
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else float("nan")


@dataclass(frozen=True)
class ValidityReport:
    valid_ids: frozenset[str]
    invalid_ids: frozenset[str]
    deceptive_ids: frozenset[str]
    ambiguous_ids: frozenset[str]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.valid_ids & self.invalid_ids:
            raise InvariantError("valid and invalid image sets overlap")
        if self.deceptive_ids | self.ambiguous_ids != self.invalid_ids:
            raise InvariantError("deceptive and ambiguous sets do not cover invalid")
        if self.deceptive_ids & self.ambiguous_ids:
            raise InvariantError("deceptive and ambiguous sets overlap")


@dataclass(frozen=True)
class BenchmarkTable:
    """Study-corpus accuracy bounds before and after dropping invalid images."""

    sota_correct: int
    total_test: int
    corpus_size: int
    invalid_count: int
    sota_all_pct: float
    sota_valid_pct: float
    human_augmented_all_pct: float
    human_augmented_valid_pct: float | None


def load_labels(path: str | Path) -> list[LabelRecord]:
    """Read label records from a JSON Lines file."""
    path = Path(path)
    records = []
    with path.open() as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                records.append(
                    LabelRecord(
                        user_id=str(raw["user_id"]),
                        user_kind=str(raw["user_kind"]),
                        image_id=str(raw["image_id"]),
                        condition=str(raw["condition"]),
                        predicted_class=str(raw["predicted_class"]),
                        confidence=str(raw["confidence"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, ParseError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return records


def load_images(path: str | Path) -> dict[str, ImageMeta]:
    """Read image metadata from a JSON Lines file, keyed by image_id."""
    path = Path(path)
    images: dict[str, ImageMeta] = {}
    with path.open() as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                meta = ImageMeta(
                    image_id=str(raw["image_id"]),
                    ground_truth=str(raw["ground_truth"]),
                    sota_prediction=str(raw["sota_prediction"]),
                )
            except (json.JSONDecodeError, KeyError, ParseError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if meta.image_id in images:
                raise ParseError(f"{path}:{lineno}: duplicate image_id {meta.image_id}")
            images[meta.image_id] = meta
    return images


def _resolve(labels: Iterable[LabelRecord], images: Mapping[str, ImageMeta]):
    for record in labels:
        if record.image_id not in images:
            raise ParseError(
                f"label by {record.user_id} references unknown image_id {record.image_id}"
            )


def user_accuracy(
    labels: Sequence[LabelRecord],
    images: Mapping[str, ImageMeta],
    condition: str,
    confidence_filter: str = "any",
) -> dict[str, UserAccuracy]:
    """Per-user correct/total over records matching condition and confidence."""
    if condition not in CONDITIONS:
        raise UsageError(f"unknown condition {condition!r}")
    if confidence_filter not in ("any", "low", "high"):
        raise UsageError(f"unknown confidence filter {confidence_filter!r}")
    _resolve(labels, images)
    correct: dict[str, int] = defaultdict(int)
    total: dict[str, int] = defaultdict(int)
    kinds: dict[str, str] = {}
    for record in labels:
        if record.condition != condition:
            continue
        if confidence_filter != "any" and record.confidence != confidence_filter:
            continue
        kinds[record.user_id] = record.user_kind
        total[record.user_id] += 1
        if record.predicted_class == images[record.image_id].ground_truth:
            correct[record.user_id] += 1
    return {
        user_id: UserAccuracy(
            user_id=user_id, user_kind=kinds[user_id], correct=correct[user_id], total=count
        )
        for user_id, count in sorted(total.items())
    }


def _adversarial_by_image(
    labels: Sequence[LabelRecord],
) -> dict[str, list[LabelRecord]]:
    by_image: dict[str, list[LabelRecord]] = defaultdict(list)
    for record in labels:
        if record.condition == "adversarial":
            by_image[record.image_id].append(record)
    return by_image


def _check_coverage(
    by_image: Mapping[str, list[LabelRecord]], images: Mapping[str, ImageMeta]
) -> None:
    short = []
    for image_id in images:
        records = by_image.get(image_id, [])
        humans = {r.user_id for r in records if r.user_kind == "human"}
        machines = {r.user_id for r in records if r.user_kind == "machine"}
        if len(humans) < 3 or len(machines) < 1:
            short.append(image_id)
    if short:
        short.sort()
        raise CoverageError(
            f"{len(short)} images lack 3 human + 1 machine adversarial records", short
        )


def _partition_ids(
    invalid_ids: frozenset[str],
    by_image: Mapping[str, list[LabelRecord]],
    images: Mapping[str, ImageMeta],
) -> tuple[frozenset[str], frozenset[str]]:
    deceptive = set()
    for image_id in invalid_ids:
        meta = images[image_id]
        prediction_by_user: dict[str, str] = {}
        for record in by_image[image_id]:
            if record.user_kind == "human":
                prediction_by_user[record.user_id] = record.predicted_class
        votes: dict[str, int] = defaultdict(int)
        for prediction in prediction_by_user.values():
            votes[prediction] += 1
        majority = [cls for cls, count in votes.items() if count >= 2]
        if majority and majority[0] != meta.ground_truth and majority[0] == meta.sota_prediction:
            deceptive.add(image_id)
    return frozenset(deceptive), invalid_ids - frozenset(deceptive)


def classify_validity(
    labels: Sequence[LabelRecord], images: Mapping[str, ImageMeta]
) -> ValidityReport:
    """Apply the validity rule to every image and partition the invalid ones."""
    _resolve(labels, images)
    by_image = _adversarial_by_image(labels)
    _check_coverage(by_image, images)
    valid = set()
    for image_id, meta in images.items():
        correct_users = set()
        human_high = False
        for record in by_image[image_id]:
            if record.predicted_class != meta.ground_truth:
                continue
            correct_users.add(record.user_id)
            if record.user_kind == "human" and record.confidence == "high":
                human_high = True
        if len(correct_users) >= 2 or human_high:
            valid.add(image_id)
    valid_ids = frozenset(valid)
    invalid_ids = frozenset(images) - valid_ids
    deceptive_ids, ambiguous_ids = _partition_ids(invalid_ids, by_image, images)
    return ValidityReport(
        valid_ids=valid_ids,
        invalid_ids=invalid_ids,
        deceptive_ids=deceptive_ids,
        ambiguous_ids=ambiguous_ids,
        counts={
            "corpus": len(images),
            "valid": len(valid_ids),
            "invalid": len(invalid_ids),
            "deceptive": len(deceptive_ids),
            "ambiguous": len(ambiguous_ids),
        },
    )


def partition_invalid(
    report: ValidityReport,
    labels: Sequence[LabelRecord],
    images: Mapping[str, ImageMeta],
) -> dict[str, frozenset[str]]:
    """Split a report's invalid images into deceptive and ambiguous sets."""
    by_image = _adversarial_by_image(labels)
    deceptive_ids, ambiguous_ids = _partition_ids(report.invalid_ids, by_image, images)
    return {"deceptive_ids": deceptive_ids, "ambiguous_ids": ambiguous_ids}


def average_human_correct(
    labels: Sequence[LabelRecord],
    images: Mapping[str, ImageMeta],
    image_ids: frozenset[str] | None = None,
    include_machine: bool = False,
) -> float:
    """Mean per-user count of correct adversarial predictions on a subset.

    The averaging population is the human users by default; pass
    include_machine=True to fold the machine user in.
    """
    _resolve(labels, images)
    correct: dict[str, int] = defaultdict(int)
    seen_users: dict[str, str] = {}
    for record in labels:
        if record.condition != "adversarial":
            continue
        if image_ids is not None and record.image_id not in image_ids:
            continue
        if record.user_kind == "machine" and not include_machine:
            continue
        seen_users[record.user_id] = record.user_kind
        if record.predicted_class == images[record.image_id].ground_truth:
            correct[record.user_id] += 1
    if not seen_users:
        raise UsageError("average_human_correct found no matching records")
    return sum(correct[user] for user in seen_users) / len(seen_users)


def revised_benchmark(
    report: ValidityReport,
    sota_correct_count: int,
    total_test: int,
    avg_human_correct_on_misclassified: float,
    avg_human_correct_on_valid: float | None = None,
) -> BenchmarkTable:
    """Benchmark accuracies on all data and after excluding invalid images.

    The human-augmented rows assume users classify the model's already
    correct images correctly and add their average correct count on the
    study corpus (full corpus, and its valid subset when that count is
    supplied).
    """
    corpus = len(report.valid_ids) + len(report.invalid_ids)
    if sota_correct_count + corpus != total_test:
        raise InvariantError(
            f"sota_correct_count {sota_correct_count} + corpus {corpus} != total {total_test}"
        )
    invalid = len(report.invalid_ids)
    valid_total = total_test - invalid
    human_valid = None
    if avg_human_correct_on_valid is not None:
        human_valid = 100.0 * (sota_correct_count + avg_human_correct_on_valid) / valid_total
    return BenchmarkTable(
        sota_correct=sota_correct_count,
        total_test=total_test,
        corpus_size=corpus,
        invalid_count=invalid,
        sota_all_pct=100.0 * sota_correct_count / total_test,
        sota_valid_pct=100.0 * sota_correct_count / valid_total,
        human_augmented_all_pct=100.0
        * (sota_correct_count + avg_human_correct_on_misclassified)
        / total_test,
        human_augmented_valid_pct=human_valid,
    )
