from __future__ import annotations

import pytest

from loopwright.labels import (
    BinaryCWLabel,
    CWLabel,
    HSLabel,
    PromptMode,
    ProvenanceCategory,
    collapse_binary,
)


def test_cw_label_wire_names():
    assert CWLabel.CFS.value == "Check-worthy Factual"
    assert CWLabel.UFS.value == "Unimportant Factual"
    assert CWLabel.NFS.value == "Non-Factual"
    assert len(CWLabel) == 3


def test_hs_label_wire_names():
    assert HSLabel.HATEFUL.value == "hateful"
    assert HSLabel.NON_HATEFUL.value == "non-hateful"


def test_display_aliases_are_enum_names():
    assert CWLabel.CFS.name == "CFS"
    assert CWLabel("Non-Factual") is CWLabel.NFS


@pytest.mark.parametrize(
    ("label", "expected"),
    [
        (CWLabel.CFS, BinaryCWLabel.CHECK_WORTHY),
        (CWLabel.NFS, BinaryCWLabel.NON_CHECK_WORTHY),
        (CWLabel.UFS, BinaryCWLabel.NON_CHECK_WORTHY),
    ],
)
def test_collapse_binary(label, expected):
    assert collapse_binary(label) is expected


@pytest.mark.parametrize(
    "enum_type", [CWLabel, BinaryCWLabel, HSLabel, PromptMode, ProvenanceCategory]
)
def test_serialization_round_trip(enum_type):
    for member in enum_type:
        assert enum_type(member.value) is member
