"""Detector click records and the event-stream file format.

File layout:

    # spinbin events config_hash=<hash> seed=<seed> trials=<n>
    trial_id,detector,peak
    7,DW+,E
    7,DR+,E
"""

from dataclasses import dataclass, field
import os

from ..core.errors import EventParseError, StatisticsError

DETECTORS = ("DW+", "DW-", "DR+", "DR-")
PEAKS = ("E", "C", "L")
COLUMNS = "trial_id,detector,peak"
HEADER_PREFIX = "# spinbin events"


@dataclass(frozen=True, order=True)
class DetectionRecord:
    trial_id: int
    detector: str
    peak: str

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector '{self.detector}'")
        if self.peak not in PEAKS:
            raise ValueError(f"unknown peak '{self.peak}'")

    @property
    def arm(self):
        return "write" if self.detector.startswith("DW") else "read"

    @property
    def sign(self):
        return self.detector[-1]


@dataclass
class EventStream:
    config_hash: str
    seed: int | None
    trials: int | None
    records: list = field(default_factory=list)


def format_header(config_hash, seed, trials):
    return f"{HEADER_PREFIX} config_hash={config_hash} seed={seed} trials={trials}"


def write_events(path, records, config_hash, seed, trials):
    """Write records to an event-stream file. Returns the number written."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_header(config_hash, seed, trials) + "\n")
        f.write(COLUMNS + "\n")
        for record in records:
            f.write(f"{record.trial_id},{record.detector},{record.peak}\n")
            n += 1
    return n


def _parse_header(line, line_number):
    if not line.startswith(HEADER_PREFIX):
        raise EventParseError(line_number, "missing '# spinbin events' header")
    fields = {}
    for token in line[len(HEADER_PREFIX):].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise EventParseError(line_number, f"malformed header token '{token}'")
        fields[key] = value
    if "config_hash" not in fields:
        raise EventParseError(line_number, "header has no config_hash")
    try:
        seed = int(fields["seed"]) if fields.get("seed", "None") != "None" else None
        trials = int(fields["trials"]) if fields.get("trials", "None") != "None" else None
    except ValueError as e:
        raise EventParseError(line_number, f"bad header value ({e})") from e
    return fields["config_hash"], seed, trials


def parse_record(line, line_number):
    parts = line.strip().split(",")
    if len(parts) != 3:
        raise EventParseError(line_number, f"expected 3 fields, got {len(parts)}")
    trial, detector, peak = parts
    try:
        trial_id = int(trial)
    except ValueError:
        raise EventParseError(line_number, f"trial_id '{trial}' is not an integer") from None
    if trial_id < 0:
        raise EventParseError(line_number, "trial_id must be non-negative")
    if detector not in DETECTORS:
        raise EventParseError(line_number, f"unknown detector '{detector}'")
    if peak not in PEAKS:
        raise EventParseError(line_number, f"unknown peak '{peak}'")
    return DetectionRecord(trial_id, detector, peak)


def _read_lines(path):
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise StatisticsError(f"{path}: {e.strerror or e}") from e
    lines = []
    for number, line in enumerate(raw.splitlines(), start=1):
        try:
            lines.append(line.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise EventParseError(number, f"invalid UTF-8 at byte {e.start}") from None
    return lines


def read_events(path):
    """Parse an event-stream file into an EventStream."""
    lines = _read_lines(path)
    if not lines:
        raise EventParseError(1, "empty event file")
    config_hash, seed, trials = _parse_header(lines[0], 1)
    if len(lines) < 2 or lines[1].strip() != COLUMNS:
        raise EventParseError(2, f"expected column line '{COLUMNS}'")
    records = [
        parse_record(line, number)
        for number, line in enumerate(lines[2:], start=3)
        if line.strip()
    ]
    return EventStream(config_hash, seed, trials, records)


def combine_streams(streams):
    """Concatenate streams recorded under the same config hash.

    Trial ids of later streams are offset by the trial counts before them.
    """
    if not streams:
        raise StatisticsError("no event streams given")
    hashes = {s.config_hash for s in streams}
    if len(hashes) != 1:
        raise StatisticsError(f"event streams come from different configs: {', '.join(sorted(hashes))}")
    records = []
    offset = 0
    for stream in streams:
        if stream.trials is None and len(streams) > 1:
            raise StatisticsError("cannot combine streams without trial counts")
        records.extend(DetectionRecord(r.trial_id + offset, r.detector, r.peak) for r in stream.records)
        offset += stream.trials or 0
    trials = offset if all(s.trials is not None for s in streams) else None
    return EventStream(streams[0].config_hash, streams[0].seed, trials, records)
