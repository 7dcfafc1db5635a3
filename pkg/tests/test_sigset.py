import pytest

from crossiris.exceptions import DanglingReference, DuplicateComparison, MalformedSigSet
from crossiris.sigset import (
    Comparison,
    Entry,
    Label,
    SigSet,
    derive_labels,
    parse_sigset,
    parse_sigset_text,
    serialize_sigset,
    write_sigset,
)

TEXT = """[ENROLL]
e1,alice,enroll/e1.pgm
e2,bob,enroll/e2.pgm

[PROBE]
p1,alice,probe/p1.pgm
[COMPARE]
p1,e1,G
p1,e2,I
"""


def test_parse_and_serialise_round_trip():
    s = parse_sigset_text(TEXT)
    assert [e.template_id for e in s.enrollment_entries] == ["e1", "e2"]
    assert s.probe_entries[0] == Entry("p1", "alice", "probe/p1.pgm")
    assert derive_labels(s) == {("p1", "e1"): Label.GENUINE, ("p1", "e2"): Label.IMPOSTER}
    assert parse_sigset_text(serialize_sigset(s)) == s
    assert s.identities() == {"alice": ["e1"], "bob": ["e2"]}


def test_file_round_trip(tmp_path):
    s = parse_sigset_text(TEXT)
    write_sigset(s, tmp_path / "s.csv")
    assert parse_sigset(tmp_path / "s.csv") == s


@pytest.mark.parametrize(
    "text, error",
    [
        (TEXT.replace("p1,e2,I", "p1,e2,X"), MalformedSigSet),
        (TEXT.replace("p1,e2,I", "p1,e9,I"), DanglingReference),
        (TEXT.replace("p1,e2,I", "p9,e2,I"), DanglingReference),
        (TEXT + "p1,e1,I\n", DuplicateComparison),
        (TEXT.replace("e2,bob", "e1,bob"), MalformedSigSet),
        (TEXT.replace("e2,bob,enroll/e2.pgm", "e2,bob"), MalformedSigSet),
        (TEXT.replace("e2,bob,enroll/e2.pgm", "e2,,enroll/e2.pgm"), MalformedSigSet),
        ("e1,alice,x.pgm\n" + TEXT, MalformedSigSet),
        (TEXT.replace("[PROBE]", "[PROBES]"), MalformedSigSet),
    ],
)
def test_rejects_bad_sigsets(text, error):
    with pytest.raises(error):
        parse_sigset_text(text)


def test_ids_cannot_hold_separators():
    with pytest.raises(MalformedSigSet):
        SigSet([Entry("a,b", "x", "p.pgm")], [], [])
    with pytest.raises(MalformedSigSet):
        SigSet([Entry("a", "x\ny", "p.pgm")], [], [])


def test_non_utf8_file(tmp_path):
    path = tmp_path / "s.csv"
    path.write_bytes(b"[ENROLL]\ne1,\xff,x.pgm\n")
    with pytest.raises(MalformedSigSet):
        parse_sigset(path)


def test_same_id_may_appear_in_both_sections():
    s = SigSet([Entry("t", "a", "x.pgm")], [Entry("t", "a", "y.pgm")], [Comparison("t", "t", Label.GENUINE)])
    assert len(s.comparisons) == 1
