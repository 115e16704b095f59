"""Tests for detection records and the event-stream file format."""

import pytest

from src.core.errors import EventParseError, StatisticsError
from src.sim.events import (
    DetectionRecord,
    EventStream,
    combine_streams,
    read_events,
    write_events,
)

RECORDS = [
    DetectionRecord(7, "DW+", "E"),
    DetectionRecord(7, "DR+", "E"),
    DetectionRecord(12, "DW-", "C"),
]


def _write(path, body):
    path.write_text(body, encoding="utf-8")
    return str(path)


def test_write_then_read(tmp_path):
    path = tmp_path / "events.csv"
    n = write_events(str(path), RECORDS, "abc123", seed=4, trials=100)
    stream = read_events(str(path))

    assert n == 3
    assert stream.config_hash == "abc123"
    assert stream.seed == 4
    assert stream.trials == 100
    assert stream.records == RECORDS


def test_file_layout(tmp_path):
    path = tmp_path / "events.csv"
    write_events(str(path), RECORDS[:1], "h", seed=1, trials=10)

    assert path.read_text().splitlines() == [
        "# spinbin events config_hash=h seed=1 trials=10",
        "trial_id,detector,peak",
        "7,DW+,E",
    ]


@pytest.mark.parametrize(
    "line, message",
    [
        ("7,DW+", "expected 3 fields"),
        ("x,DW+,E", "not an integer"),
        ("-1,DW+,E", "non-negative"),
        ("7,DX+,E", "unknown detector"),
        ("7,DW+,M", "unknown peak"),
    ],
)
def test_malformed_record_reports_line_number(tmp_path, line, message):
    path = _write(tmp_path / "bad.csv", f"# spinbin events config_hash=h seed=1 trials=10\ntrial_id,detector,peak\n7,DW+,E\n{line}\n")

    with pytest.raises(EventParseError, match=message) as excinfo:
        read_events(path)
    assert excinfo.value.line_number == 4


def test_missing_header(tmp_path):
    path = _write(tmp_path / "bad.csv", "trial_id,detector,peak\n7,DW+,E\n")

    with pytest.raises(EventParseError, match="header"):
        read_events(path)


def test_missing_column_line(tmp_path):
    path = _write(tmp_path / "bad.csv", "# spinbin events config_hash=h seed=1 trials=10\n7,DW+,E\n")

    with pytest.raises(EventParseError) as excinfo:
        read_events(path)
    assert excinfo.value.line_number == 2


def test_blank_lines_are_skipped(tmp_path):
    path = _write(tmp_path / "ok.csv", "# spinbin events config_hash=h seed=None trials=5\ntrial_id,detector,peak\n\n3,DR-,L\n")
    stream = read_events(path)

    assert stream.seed is None
    assert stream.records == [DetectionRecord(3, "DR-", "L")]


def test_parse_error_is_a_statistics_error():
    assert issubclass(EventParseError, StatisticsError)
    assert EventParseError.exit_code == 4


def test_missing_file_is_a_statistics_error(tmp_path):
    with pytest.raises(StatisticsError, match="nope.csv"):
        read_events(str(tmp_path / "nope.csv"))


def test_directory_is_a_statistics_error(tmp_path):
    with pytest.raises(StatisticsError):
        read_events(str(tmp_path))


def test_invalid_utf8_reports_line_number(tmp_path):
    path = tmp_path / "bin.csv"
    path.write_bytes(b"# spinbin events config_hash=h seed=1 trials=10\ntrial_id,detector,peak\n7,DW\xff,E\n")

    with pytest.raises(EventParseError, match="UTF-8") as excinfo:
        read_events(str(path))
    assert excinfo.value.line_number == 3


def test_record_properties():
    record = DetectionRecord(0, "DR-", "C")

    assert record.arm == "read"
    assert record.sign == "-"
    with pytest.raises(ValueError):
        DetectionRecord(0, "DQ+", "C")


def test_combine_offsets_trial_ids():
    a = EventStream("h", 1, 10, [DetectionRecord(3, "DW+", "E")])
    b = EventStream("h", 2, 5, [DetectionRecord(3, "DR+", "E")])
    merged = combine_streams([a, b])

    assert merged.trials == 15
    assert [r.trial_id for r in merged.records] == [3, 13]


def test_combine_rejects_mixed_configs():
    with pytest.raises(StatisticsError, match="different configs"):
        combine_streams([EventStream("h1", 1, 10), EventStream("h2", 1, 10)])


def test_combine_requires_streams():
    with pytest.raises(StatisticsError):
        combine_streams([])
