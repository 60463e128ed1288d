"""Deterministic synthetic label-study corpus matching the published aggregates.

The raw per-record study data behind the label-validity analysis was never
released, so the bundled fixtures are constructed here by index arithmetic
(no RNG) to hit every published aggregate at once: 1902 valid / 727 invalid
of 2629, 284 deceptive, machine 1160 correct, per-user adversarial and
clean accuracy tables, and the revised-benchmark cells.
"""

from __future__ import annotations

import json
from pathlib import Path

from .validity import CLASS_VOCABULARY, ImageMeta, LabelRecord

CORPUS_SIZE = 2629
SOTA_CORRECT = 7371
TOTAL_TEST = 10000

HUMAN_IDS = ("human-1", "human-2", "human-3")
MACHINE_ID = "machine-1"

# Adversarial-condition blocks, by image index.
_VALID_END = 1902
_DECEPTIVE_END = 2186
_NO_OBJECT_END = 2266
_MACHINE_ONLY_END = 2326

# Per-human index ranges that yield correct high-confidence answers inside
# the valid block; sized so per-user correct counts match the study tables.
_VALID_CORRECT = {
    "human-1": range(0, 1470),
    "human-2": range(97, 1902),
    "human-3": range(0, 1447),
}
_MACHINE_VALID_CORRECT = range(0, 1100)

# Clean-condition correct counts per human (machine was not run clean).
_CLEAN_CORRECT = {"human-1": 2239, "human-2": 2429, "human-3": 2083}

# The machine user reported low confidence on 48 of its (wrong) answers,
# leaving 2581 high-confidence records.
_MACHINE_LOW = range(1854, 1902)


def _truth(i: int) -> str:
    return CLASS_VOCABULARY[i % 10]


def _sota(i: int) -> str:
    return CLASS_VOCABULARY[(i + 1) % 10]


def _wrong(i: int, offset: int) -> str:
    """A class distinct from the truth (and from other small offsets)."""
    return CLASS_VOCABULARY[(i + offset) % 10]


def build_images() -> list[ImageMeta]:
    return [
        ImageMeta(image_id=f"img-{i:04d}", ground_truth=_truth(i), sota_prediction=_sota(i))
        for i in range(CORPUS_SIZE)
    ]


def _adversarial_labels(i: int) -> list[tuple[str, str, str, str]]:
    """(user_id, user_kind, predicted_class, confidence) rows for image i."""
    rows = []
    if i < _VALID_END:
        for k, user in enumerate(HUMAN_IDS):
            if i in _VALID_CORRECT[user]:
                rows.append((user, "human", _truth(i), "high"))
            else:
                rows.append((user, "human", _wrong(i, 2 + k), "low"))
        machine_class = _truth(i) if i in _MACHINE_VALID_CORRECT else _sota(i)
        machine_conf = "low" if i in _MACHINE_LOW else "high"
        rows.append((MACHINE_ID, "machine", machine_class, machine_conf))
    elif i < _DECEPTIVE_END:
        # Everyone falls for the attack target class.
        for user in HUMAN_IDS:
            rows.append((user, "human", _sota(i), "high"))
        rows.append((MACHINE_ID, "machine", _sota(i), "high"))
    elif i < _NO_OBJECT_END:
        # No recognizable object: three distinct wrong answers, low confidence.
        for k, user in enumerate(HUMAN_IDS):
            rows.append((user, "human", _wrong(i, 2 + k), "low"))
        rows.append((MACHINE_ID, "machine", _wrong(i, 2), "high"))
    elif i < _MACHINE_ONLY_END:
        # Only the machine user is right; that alone never makes an image valid.
        for k, user in enumerate(HUMAN_IDS):
            rows.append((user, "human", _wrong(i, 2 + k), "low"))
        rows.append((MACHINE_ID, "machine", _truth(i), "high"))
    else:
        # Exactly one human is right but unsure; the rest miss.
        assigned = (i - _MACHINE_ONLY_END) % 3
        wrong_offset = 2
        for k, user in enumerate(HUMAN_IDS):
            if k == assigned:
                rows.append((user, "human", _truth(i), "low"))
            else:
                rows.append((user, "human", _wrong(i, wrong_offset), "low"))
                wrong_offset += 1
        rows.append((MACHINE_ID, "machine", _sota(i), "high"))
    return rows


def _clean_labels(i: int) -> list[tuple[str, str, str, str]]:
    rows = []
    for k, user in enumerate(HUMAN_IDS):
        if i < _CLEAN_CORRECT[user]:
            confidence = "low" if i % 10 == 0 else "high"
            rows.append((user, "human", _truth(i), confidence))
        else:
            confidence = "high" if i % 7 == 0 else "low"
            rows.append((user, "human", _wrong(i, 2 + k), confidence))
    return rows


def build_labels() -> list[LabelRecord]:
    records = []
    for i in range(CORPUS_SIZE):
        image_id = f"img-{i:04d}"
        for user_id, kind, predicted, confidence in _adversarial_labels(i):
            records.append(
                LabelRecord(
                    user_id=user_id,
                    user_kind=kind,
                    image_id=image_id,
                    condition="adversarial",
                    predicted_class=predicted,
                    confidence=confidence,
                )
            )
        for user_id, kind, predicted, confidence in _clean_labels(i):
            records.append(
                LabelRecord(
                    user_id=user_id,
                    user_kind=kind,
                    image_id=image_id,
                    condition="clean",
                    predicted_class=predicted,
                    confidence=confidence,
                )
            )
    return records


def write_study_fixture(out_dir: str | Path) -> dict[str, Path]:
    """Write labels.jsonl, images.jsonl, and study.json into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images_path = out_dir / "images.jsonl"
    labels_path = out_dir / "labels.jsonl"
    study_path = out_dir / "study.json"
    with images_path.open("w") as handle:
        for meta in build_images():
            handle.write(
                json.dumps(
                    {
                        "image_id": meta.image_id,
                        "ground_truth": meta.ground_truth,
                        "sota_prediction": meta.sota_prediction,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    with labels_path.open("w") as handle:
        for record in build_labels():
            handle.write(
                json.dumps(
                    {
                        "user_id": record.user_id,
                        "user_kind": record.user_kind,
                        "image_id": record.image_id,
                        "condition": record.condition,
                        "predicted_class": record.predicted_class,
                        "confidence": record.confidence,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    study_path.write_text(
        json.dumps({"sota_correct": SOTA_CORRECT, "total_test": TOTAL_TEST}, indent=2) + "\n"
    )
    return {"images": images_path, "labels": labels_path, "study": study_path}
