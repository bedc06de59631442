import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashcast.errors import (
    BadCode,
    BadTimestamp,
    EmptyCorpus,
    MalformedRecord,
    RecordError,
)
from crashcast.ingest import (
    RawLogRecord,
    build_corpus,
    canonical_code,
    default_catalog,
    default_catalog_path,
    filter_critical,
    format_timestamp,
    load_catalog,
    normalize_cause,
    parse_lines,
    parse_record,
    parse_timestamp,
    record_to_line,
    records_digest,
)

UTC = timezone.utc

FULL_LINE = (
    '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":41,'
    '"bugcheck":"0x9F","params":["0x3","0x0","0x0","0x0"],'
    '"cause":"DRIVER_POWER_STATE_FAILURE"}'
)


def make_record(system_id="A1", day=1, hour=0, event_id=41, **kwargs):
    return RawLogRecord(
        system_id=system_id,
        timestamp=datetime(2021, 3, day, hour, tzinfo=UTC),
        event_id=event_id,
        **kwargs,
    )


class TestParseRecord:
    def test_full_record_maps_every_field(self):
        record = parse_record(FULL_LINE)
        assert record.system_id == "A1"
        assert record.timestamp == datetime(2021, 3, 1, 8, 0, 0, tzinfo=UTC)
        assert record.event_id == 41
        assert record.bugcheck_code == "0x9F"
        assert record.params == ("0x3", "0x0", "0x0", "0x0")
        assert record.cause == "DRIVER_POWER_STATE_FAILURE"

    def test_date_without_time_is_a_bad_timestamp(self):
        with pytest.raises(BadTimestamp):
            parse_record('{"guid":"A1","ts":"2021-03-01","event_id":41}')

    def test_code_without_prefix_is_bad(self):
        with pytest.raises(BadCode):
            parse_record('{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":41,"bugcheck":"9F"}')

    def test_unknown_fields_are_ignored(self):
        record = parse_record(
            '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":41,"model":"x99"}'
        )
        assert record.system_id == "A1"

    def test_line_number_lands_in_the_message(self):
        with pytest.raises(MalformedRecord, match="line 7"):
            parse_record("{", line_no=7)

    @pytest.mark.parametrize(
        "line",
        [
            "",
            "not json",
            "[1, 2]",
            '{"ts":"2021-03-01T08:00:00Z","event_id":41}',
            '{"guid":"","ts":"2021-03-01T08:00:00Z","event_id":41}',
            '{"guid":"A1","event_id":41}',
            '{"guid":"A1","ts":"2021-03-01T08:00:00Z"}',
            '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":-1}',
            '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":true}',
            '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":41,"params":["a","b","c","d","e"]}',
            '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":41,"params":"x"}',
            '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":41,"cause":3}',
        ],
    )
    def test_structural_problems_are_malformed(self, line):
        with pytest.raises(MalformedRecord):
            parse_record(line)

    def test_bugcheck_longer_than_eight_digits_is_bad(self):
        with pytest.raises(BadCode):
            parse_record(
                '{"guid":"A1","ts":"2021-03-01T08:00:00Z","event_id":41,"bugcheck":"0x123456789"}'
            )

    @given(st.text(max_size=200))
    @settings(max_examples=300)
    def test_arbitrary_text_never_escapes_the_error_taxonomy(self, line):
        try:
            record = parse_record(line)
        except RecordError:
            return
        assert isinstance(record, RawLogRecord)


class TestTimestamps:
    def test_both_utc_suffixes_parse(self):
        assert parse_timestamp("2021-03-01T08:00:00Z") == parse_timestamp(
            "2021-03-01T08:00:00+00:00"
        )

    @pytest.mark.parametrize(
        "text",
        ["2021-03-01", "2021-03-01T08:00:00", "2021-03-01T08:00:00+02:00", "2021-03-01 08:00:00Z"],
    )
    def test_non_utc_or_partial_instants_are_rejected(self, text):
        with pytest.raises(ValueError):
            parse_timestamp(text)

    def test_format_round_trips(self):
        ts = datetime(2021, 12, 31, 23, 59, 59, tzinfo=UTC)
        assert parse_timestamp(format_timestamp(ts)) == ts


_record_strategy = st.builds(
    RawLogRecord,
    system_id=st.text(
        alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=12
    ),
    timestamp=st.datetimes(
        min_value=datetime(2000, 1, 1),
        max_value=datetime(2099, 12, 31),
    ).map(lambda d: d.replace(microsecond=0, tzinfo=UTC)),
    event_id=st.integers(min_value=0, max_value=9999),
    bugcheck_code=st.none() | st.from_regex(r"0x[0-9A-Fa-f]{1,8}", fullmatch=True),
    params=st.lists(
        st.from_regex(r"0x[0-9A-Fa-f]{1,8}", fullmatch=True), max_size=4
    ).map(tuple),
    cause=st.none() | st.text(min_size=1, max_size=30),
)


@given(_record_strategy)
@settings(max_examples=200)
def test_serialization_round_trips(record):
    assert parse_record(record_to_line(record)) == record


class TestFilterCritical:
    def test_keeps_only_event_41_in_order(self):
        records = [make_record(event_id=41), make_record(event_id=12), make_record(event_id=41, hour=1)]
        kept = filter_critical(records)
        assert [r.event_id for r in kept] == [41, 41]
        assert kept == [records[0], records[2]]

    def test_empty_and_no_critical(self):
        assert filter_critical([]) == []
        assert filter_critical([make_record(event_id=12)]) == []

    def test_idempotent(self):
        records = [make_record(event_id=41), make_record(event_id=12)]
        once = filter_critical(records)
        assert filter_critical(once) == once


class TestBuildCorpus:
    def test_cause_is_normalized(self):
        corpus = build_corpus([make_record(cause="DRIVER_POWER_STATE_FAILURE")])
        assert corpus.events[0].kind == "driver power state failure"

    def test_exact_duplicates_collapse_and_count(self):
        record = make_record(bugcheck_code="0x9F")
        corpus = build_corpus([record, record])
        assert len(corpus.events) == 1
        assert corpus.duplicates == 1

    def test_dedup_key_ignores_params(self):
        first = make_record(bugcheck_code="0x9F", params=("0x1",))
        second = make_record(bugcheck_code="0x9F", params=("0x2",))
        corpus = build_corpus([first, second])
        assert len(corpus.events) == 1

    def test_dedup_key_spans_code_spellings(self):
        first = make_record(bugcheck_code="0x9F")
        second = make_record(bugcheck_code="0x0000009f")
        corpus = build_corpus([first, second])
        assert len(corpus.events) == 1

    def test_missing_cause_falls_back_to_the_catalog(self):
        catalog_label = default_catalog()["0x9F"]
        corpus = build_corpus([make_record(bugcheck_code="0x9F")])
        assert corpus.events[0].kind == catalog_label
        raw = dict(
            line.split(None, 1)
            for line in default_catalog_path().read_text().splitlines()
            if line.strip() and not line.startswith("#")
        )
        assert normalize_cause(raw["0x9F"]) == catalog_label

    def test_event_plus_duplicate_counts_add_up(self):
        records = [
            make_record(day=d, bugcheck_code="0x9F") for d in (1, 1, 2, 3, 3, 3)
        ]
        corpus = build_corpus(records)
        assert len(corpus.events) + corpus.duplicates == len(records)

    def test_epoch_floor_drops_and_counts(self):
        ancient = RawLogRecord(
            system_id="A1", timestamp=datetime(1999, 1, 1, tzinfo=UTC), event_id=41
        )
        corpus = build_corpus([ancient, make_record()])
        assert corpus.dropped_before_floor == 1
        assert len(corpus.events) == 1

    def test_empty_corpus_raises(self):
        with pytest.raises(EmptyCorpus):
            build_corpus([])

    def test_events_sorted_by_system_then_time(self):
        records = [
            make_record(system_id="B", day=1),
            make_record(system_id="A", day=2),
            make_record(system_id="A", day=1),
        ]
        corpus = build_corpus(records)
        assert [(e.system_id, e.time.day) for e in corpus.events] == [
            ("A", 1),
            ("A", 2),
            ("B", 1),
        ]

    def test_digest_tracks_content(self):
        records = [make_record()]
        assert build_corpus(records).source_digest == records_digest(records)
        assert records_digest(records) != records_digest([make_record(day=2)])


class TestCatalog:
    def test_comments_and_spacing(self, tmp_path):
        path = tmp_path / "catalog.txt"
        path.write_text("# header\n0x0000009f   DRIVER_POWER_STATE_FAILURE\n\n0xA IRQL\n")
        catalog = load_catalog(path)
        assert catalog["0x9F"] == "driver power state failure"
        assert catalog["0xA"] == "irql"

    def test_canonical_code_strips_padding(self):
        assert canonical_code("0x0000009f") == "0x9F"
        assert canonical_code("0xa") == "0xA"


def test_parse_lines_skips_blanks_and_numbers_errors():
    lines = [FULL_LINE, "", "   ", FULL_LINE]
    assert len(parse_lines(lines)) == 2
    with pytest.raises(MalformedRecord, match="line 2"):
        parse_lines([FULL_LINE, "{broken"])


def test_normalize_cause_collapses_whitespace():
    assert normalize_cause("  A_B   c\t d ") == "a b c d"
