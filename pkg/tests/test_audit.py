import json
import re

import pytest

from fracblow.audit import PUBLISHED, audit_example, audit_published_examples, flagged_examples

EXPECTED_FLAGS = ["kdv-x", "burgers-robin-x", "bbm-x4", "ostrovsky-x2", "mkdv-exp", "mkdv-x-1"]


@pytest.fixture(scope="module")
def rows():
    return audit_published_examples()


def test_exactly_the_known_conflicts_are_flagged(rows):
    assert flagged_examples(rows) == EXPECTED_FLAGS


def test_three_rows_per_example(rows):
    assert len(rows) == 3 * len(PUBLISHED)
    assert {r.quantity for r in rows} == {"theta1", "theta2", "F0-condition"}


def by(rows, key, q):
    return next(r for r in rows if r.key == key and r.quantity == q)


def test_first_three_examples_disagree_on_thetas(rows):
    for key in ("kdv-x", "burgers-robin-x", "bbm-x4"):
        assert not by(rows, key, "theta1").match
        assert float(by(rows, key, "theta1").computed) == pytest.approx(0.5)
    assert float(by(rows, "bbm-x4", "theta2").computed) == pytest.approx(397 / 12)


def test_specific_mismatches(rows):
    assert not by(rows, "mkdv-exp", "theta1").match
    assert by(rows, "mkdv-exp", "theta2").match
    r = by(rows, "mkdv-x-1", "F0-condition")
    assert not r.match and "no real u0" in r.note
    assert by(rows, "mkdv-x-1", "theta2").match
    assert not by(rows, "ostrovsky-x2", "F0-condition").match
    assert by(rows, "ostrovsky-x2", "theta1").match and by(rows, "ostrovsky-x2", "theta2").match


def test_clean_examples_match_everywhere(rows):
    for key in ("rosenau-x-1", "rosenau-burgers-x", "camassa-holm-x", "degasperis-procesi-x"):
        assert all(r.match for r in rows if r.key == key), key


def test_rows_serialise(rows):
    text = json.dumps([r.as_dict() for r in rows])
    assert not re.search(r"-0(?![.\d])", text)


def test_audit_is_deterministic():
    a = [r.as_dict() for r in audit_example(PUBLISHED[0])]
    b = [r.as_dict() for r in audit_example(PUBLISHED[0])]
    assert a == b
