import filecmp
import json

import pytest

from advscale.errors import CoverageError, InvariantError, ParseError, UsageError
from advscale.studydata import write_study_fixture
from advscale.validity import (
    ImageMeta,
    LabelRecord,
    ValidityReport,
    average_human_correct,
    classify_validity,
    load_images,
    load_labels,
    partition_invalid,
    revised_benchmark,
    user_accuracy,
)


def image(image_id, truth="dog", sota="cat"):
    return ImageMeta(image_id=image_id, ground_truth=truth, sota_prediction=sota)


def label(user_id, image_id, predicted, confidence="low", kind=None, condition="adversarial"):
    if kind is None:
        kind = "machine" if user_id.startswith("m") else "human"
    return LabelRecord(
        user_id=user_id,
        user_kind=kind,
        image_id=image_id,
        condition=condition,
        predicted_class=predicted,
        confidence=confidence,
    )


def labels_for(image_id, h1, h2, h3, machine, confidences=("low", "low", "low", "low")):
    return [
        label("h1", image_id, h1, confidences[0]),
        label("h2", image_id, h2, confidences[1]),
        label("h3", image_id, h3, confidences[2]),
        label("m1", image_id, machine, confidences[3]),
    ]


def classify_one(h1, h2, h3, machine, confidences=("low", "low", "low", "low")):
    images = {"img": image("img")}
    report = classify_validity(labels_for("img", h1, h2, h3, machine, confidences), images)
    return report


def test_image_is_valid_when_two_users_recognize_it():
    report = classify_one("dog", "dog", "bird", "frog")
    assert report.valid_ids == {"img"}

    # Human plus machine also counts as two users.
    report = classify_one("dog", "bird", "frog", "dog")
    assert report.valid_ids == {"img"}


def test_single_confident_human_is_enough():
    report = classify_one("dog", "bird", "frog", "cat", confidences=("high", "low", "low", "low"))
    assert report.valid_ids == {"img"}


def test_single_hesitant_human_is_not_enough():
    report = classify_one("dog", "bird", "frog", "cat")
    assert report.invalid_ids == {"img"}


def test_confident_machine_alone_does_not_validate():
    report = classify_one("bird", "frog", "ship", "dog", confidences=("low", "low", "low", "high"))
    assert report.invalid_ids == {"img"}


def test_invalid_image_with_human_majority_on_model_error_is_deceptive():
    report = classify_one("cat", "cat", "bird", "cat")
    assert report.invalid_ids == {"img"}
    assert report.deceptive_ids == {"img"}
    assert report.ambiguous_ids == frozenset()


def test_human_majority_off_the_model_error_is_ambiguous():
    # Two humans agree on "bird", but the model predicted "cat".
    report = classify_one("bird", "bird", "frog", "cat")
    assert report.ambiguous_ids == {"img"}
    assert report.deceptive_ids == frozenset()


def test_split_humans_are_ambiguous():
    report = classify_one("bird", "frog", "ship", "cat")
    assert report.ambiguous_ids == {"img"}


def test_machine_vote_does_not_create_a_deceptive_majority():
    # One human matches the model's error; the machine agreeing with it must
    # not be counted as the second human voice.
    report = classify_one("cat", "bird", "frog", "cat")
    assert report.ambiguous_ids == {"img"}


def test_repeat_records_from_one_user_count_once():
    images = {"img": image("img")}
    records = labels_for("img", "cat", "bird", "frog", "ship")
    records.append(label("h1", "img", "cat"))
    report = classify_validity(records, images)
    # h1 voting "cat" twice is still a single vote: no majority, ambiguous.
    assert report.ambiguous_ids == {"img"}

    records = labels_for("img", "dog", "bird", "frog", "ship")
    records.append(label("h1", "img", "dog"))
    report = classify_validity(records, images)
    # Nor do the duplicates count as two correct users.
    assert report.invalid_ids == {"img"}


def test_adding_a_correct_record_never_invalidates():
    images = {"img": image("img")}
    base = labels_for("img", "dog", "bird", "frog", "ship")
    assert classify_validity(base, images).invalid_ids == {"img"}
    upgraded = base + [label("h2", "img", "dog", "high")]
    assert classify_validity(upgraded, images).valid_ids == {"img"}
    second_user = base + [label("h4", "img", "dog")]
    assert classify_validity(second_user, images).valid_ids == {"img"}


def test_clean_condition_records_are_ignored_by_the_rule():
    images = {"img": image("img")}
    records = labels_for("img", "bird", "frog", "ship", "cat")
    records += [label("h1", "img", "dog", "high", condition="clean")]
    report = classify_validity(records, images)
    assert report.invalid_ids == {"img"}


def test_missing_coverage_is_reported_with_ids():
    images = {"a": image("a"), "b": image("b"), "c": image("c")}
    records = labels_for("a", "dog", "dog", "dog", "dog")
    records += labels_for("c", "dog", "dog", "dog", "dog")
    records += [
        label("h1", "b", "dog"),
        label("h2", "b", "dog"),
        label("m1", "b", "dog"),
    ]
    with pytest.raises(CoverageError) as info:
        classify_validity(records, images)
    assert info.value.image_ids == ["b"]


def test_labels_must_reference_known_images():
    images = {"img": image("img")}
    records = labels_for("img", "dog", "dog", "dog", "dog")
    records.append(label("h1", "ghost", "dog"))
    with pytest.raises(ParseError, match="ghost"):
        classify_validity(records, images)
    with pytest.raises(ParseError, match="ghost"):
        user_accuracy(records, images, "adversarial")


def test_report_construction_rejects_inconsistent_partitions():
    with pytest.raises(InvariantError):
        ValidityReport(
            valid_ids=frozenset({"a"}),
            invalid_ids=frozenset({"a"}),
            deceptive_ids=frozenset({"a"}),
            ambiguous_ids=frozenset(),
        )
    with pytest.raises(InvariantError):
        ValidityReport(
            valid_ids=frozenset({"a"}),
            invalid_ids=frozenset({"b"}),
            deceptive_ids=frozenset(),
            ambiguous_ids=frozenset(),
        )


def test_record_validation_names_the_bad_field():
    with pytest.raises(ParseError, match="user_kind"):
        LabelRecord("u", "bot", "img", "adversarial", "dog", "low")
    with pytest.raises(ParseError, match="condition"):
        LabelRecord("u", "human", "img", "noisy", "dog", "low")
    with pytest.raises(ParseError, match="zebra"):
        LabelRecord("u", "human", "img", "adversarial", "zebra", "low")
    with pytest.raises(ParseError, match="confidence"):
        LabelRecord("u", "human", "img", "adversarial", "dog", "medium")
    with pytest.raises(ParseError, match="sota_prediction"):
        ImageMeta("img", "dog", "zebra")


def test_user_accuracy_rejects_bad_selectors(study_labels, study_images):
    with pytest.raises(UsageError):
        user_accuracy(study_labels, study_images, "noisy")
    with pytest.raises(UsageError):
        user_accuracy(study_labels, study_images, "adversarial", confidence_filter="medium")


# The bundled study corpus: the aggregate numbers below were computed by hand
# from the block layout in studydata.py before being frozen here.


@pytest.fixture(scope="module")
def study_report(study_labels, study_images):
    return classify_validity(study_labels, study_images)


def test_study_corpus_partition_counts(study_report):
    assert study_report.counts == {
        "corpus": 2629,
        "valid": 1902,
        "invalid": 727,
        "deceptive": 284,
        "ambiguous": 443,
    }
    assert len(study_report.valid_ids | study_report.invalid_ids) == 2629


def test_partition_helper_agrees_with_report(study_report, study_labels, study_images):
    parts = partition_invalid(study_report, study_labels, study_images)
    assert parts["deceptive_ids"] == study_report.deceptive_ids
    assert parts["ambiguous_ids"] == study_report.ambiguous_ids


def test_study_adversarial_accuracy_table(study_labels, study_images):
    table = user_accuracy(study_labels, study_images, "adversarial")
    correct = {u: a.correct for u, a in table.items()}
    assert correct == {"human-1": 1571, "human-2": 1906, "human-3": 1548, "machine-1": 1160}
    assert all(a.total == 2629 for a in table.values())
    pct = {u: round(100 * a.accuracy, 2) for u, a in table.items()}
    assert pct == {"human-1": 59.76, "human-2": 72.5, "human-3": 58.88, "machine-1": 44.12}


def test_study_clean_accuracy_table(study_labels, study_images):
    table = user_accuracy(study_labels, study_images, "clean")
    assert set(table) == {"human-1", "human-2", "human-3"}
    correct = {u: a.correct for u, a in table.items()}
    assert correct == {"human-1": 2239, "human-2": 2429, "human-3": 2083}
    pct = {u: round(100 * a.accuracy, 2) for u, a in table.items()}
    assert pct == {"human-1": 85.17, "human-2": 92.39, "human-3": 79.23}


def test_high_confidence_restriction_raises_machine_accuracy(study_labels, study_images):
    table = user_accuracy(
        study_labels, study_images, "adversarial", confidence_filter="high"
    )
    machine = table["machine-1"]
    assert (machine.correct, machine.total) == (1160, 2581)
    assert round(100 * machine.accuracy, 2) == 44.94


def test_confidence_slices_partition_every_user(study_labels, study_images):
    for condition in ("adversarial", "clean"):
        full = user_accuracy(study_labels, study_images, condition)
        low = user_accuracy(study_labels, study_images, condition, "low")
        high = user_accuracy(study_labels, study_images, condition, "high")
        for user_id, acc in full.items():
            lo = low.get(user_id)
            hi = high.get(user_id)
            assert (lo.correct if lo else 0) + (hi.correct if hi else 0) == acc.correct
            assert (lo.total if lo else 0) + (hi.total if hi else 0) == acc.total


def test_average_correct_counts_on_study_subsets(study_report, study_labels, study_images):
    full = average_human_correct(study_labels, study_images)
    assert full == pytest.approx(1675.0, abs=1e-12)
    valid = average_human_correct(
        study_labels, study_images, image_ids=study_report.valid_ids
    )
    assert valid == pytest.approx(1574.0, abs=1e-12)
    with_machine = average_human_correct(
        study_labels, study_images, include_machine=True
    )
    assert with_machine == pytest.approx((1571 + 1906 + 1548 + 1160) / 4, abs=1e-12)


def test_average_correct_requires_matching_records(study_labels, study_images):
    with pytest.raises(UsageError):
        average_human_correct(
            study_labels, study_images, image_ids=frozenset({"no-such-image"})
        )


def test_revised_benchmark_reproduces_study_table(study_report, study_labels, study_images):
    table = revised_benchmark(
        study_report,
        sota_correct_count=7371,
        total_test=10_000,
        avg_human_correct_on_misclassified=average_human_correct(
            study_labels, study_images
        ),
        avg_human_correct_on_valid=average_human_correct(
            study_labels, study_images, image_ids=study_report.valid_ids
        ),
    )
    assert round(table.sota_all_pct, 2) == 73.71
    assert round(table.sota_valid_pct, 2) == 79.49
    assert round(table.human_augmented_all_pct, 2) == 90.46
    assert round(table.human_augmented_valid_pct, 2) == 96.46
    assert table.invalid_count == 727


def test_revised_benchmark_guards_the_corpus_identity(study_report):
    with pytest.raises(InvariantError):
        revised_benchmark(study_report, 7371, 9_999, 1675.0)
    table = revised_benchmark(study_report, 7371, 10_000, 1675.0)
    assert table.human_augmented_valid_pct is None


def test_fixture_regenerates_byte_identical(tmp_path, fixtures_dir):
    write_study_fixture(tmp_path)
    for name in ("images.jsonl", "labels.jsonl", "study.json"):
        assert filecmp.cmp(tmp_path / name, fixtures_dir / name, shallow=False), name


def test_load_labels_reports_line_numbers(tmp_path):
    path = tmp_path / "labels.jsonl"
    good = json.dumps(
        {
            "user_id": "h1",
            "user_kind": "human",
            "image_id": "img",
            "condition": "adversarial",
            "predicted_class": "dog",
            "confidence": "low",
        }
    )
    path.write_text(good + "\n{broken\n")
    with pytest.raises(ParseError, match=r"labels\.jsonl:2"):
        load_labels(path)


def test_load_images_rejects_duplicates(tmp_path):
    path = tmp_path / "images.jsonl"
    row = json.dumps({"image_id": "img", "ground_truth": "dog", "sota_prediction": "cat"})
    path.write_text(row + "\n" + row + "\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_images(path)
