import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustengine import ExecutionOutcome, Mode, TrustLevel
from trustengine.errors import CorruptRecord, SequenceGap
from trustengine.history import ExecutionRecord, HistoryLog, read_records

O = ExecutionOutcome


def record(seq, code="a", outcome=O.SUCCESS):
    return ExecutionRecord(seq, code, outcome, Mode.STANDARD, 0.5, TrustLevel.VERIFIABLE)


def naive_count(records, code):
    s = f = 0
    for r in records:
        if r.code_id == code:
            if r.outcome.value in ("Success", "HandledError"):
                s += 1
            else:
                f += 1
    return s, f


def test_append_and_read_your_writes(tmp_path):
    log = HistoryLog(tmp_path / "history.jsonl")
    assert log.load_aggregate("a").total == 0
    log.append(record(1, outcome=O.UNHANDLED_ERROR))
    agg = log.load_aggregate("a")
    assert (agg.successes, agg.failures, agg.last_outcome) == (0, 1, O.UNHANDLED_ERROR)
    assert log.aggregate("a") == agg


def test_sequence_gap(tmp_path):
    log = HistoryLog(tmp_path / "history.jsonl")
    log.append(record(1))
    with pytest.raises(SequenceGap):
        log.append(record(3))
    with pytest.raises(SequenceGap):
        log.append(record(1))


def test_fold_example(tmp_path):
    log = HistoryLog(tmp_path / "history.jsonl")
    for i, outcome in enumerate([O.SUCCESS, O.HANDLED_ERROR, O.UNHANDLED_ERROR], start=1):
        log.append(record(i, outcome=outcome))
    agg = log.load_aggregate("a")
    assert (agg.successes, agg.failures, agg.total) == (2, 1, 3)


def test_line_format_is_fixed(tmp_path):
    line = record(1).to_line()
    assert line == ('{"seq":1,"code_id":"a","outcome":"Success","mode":"Standard",'
                    '"score_after":0.5,"level_after":"Verifiable"}\n')
    assert ExecutionRecord.from_line(line) == record(1)


def test_thousand_random_records_match_naive_recount(tmp_path):
    rnd = random.Random(11)
    log = HistoryLog(tmp_path / "history.jsonl")
    written = []
    sizes = [log.size()]
    for seq in range(1, 1001):
        r = record(seq, rnd.choice("abcde"), rnd.choice(list(O)))
        log.append(r)
        written.append(r)
        sizes.append(log.size())
    assert sizes == sorted(sizes) and len(set(sizes)) == len(sizes)
    replayed = log.replay()
    for code in "abcdez":
        agg = log.load_aggregate(code)
        assert (agg.successes, agg.failures) == naive_count(written, code)
        assert log.aggregate(code) == agg
        if agg.total:
            assert replayed[code] == agg
    assert log.replay() == replayed
    assert HistoryLog(log.path).aggregates() == log.aggregates()


def test_empty_log_replays_empty(tmp_path):
    assert HistoryLog(tmp_path / "history.jsonl").replay() == {}


def test_truncated_final_line_is_corrupt(tmp_path):
    path = tmp_path / "history.jsonl"
    log = HistoryLog(path)
    log.append(record(1))
    log.append(record(2))
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(CorruptRecord) as info:
        list(read_records(path))
    assert info.value.line_no == 2


@pytest.mark.parametrize("line", [
    "not json",
    '{"seq":1}',
    '{"seq":"1","code_id":"a","outcome":"Success","mode":"Standard","score_after":0.5,"level_after":"Verifiable"}',
    '{"seq":1,"code_id":"a","outcome":"Nope","mode":"Standard","score_after":0.5,"level_after":"Verifiable"}',
    '{"seq":1,"code_id":"a","outcome":"Success","mode":"Standard","score_after":1.5,"level_after":"Verifiable"}',
    '{"code_id":"a","seq":1,"outcome":"Success","mode":"Standard","score_after":0.5,"level_after":"Verifiable"}',
])
def test_malformed_lines_report_location(tmp_path, line):
    path = tmp_path / "history.jsonl"
    path.write_text(record(1).to_line() + line + "\n")
    with pytest.raises(CorruptRecord) as info:
        list(read_records(path))
    assert info.value.line_no == 2


def test_rollback_restores_prefix(tmp_path):
    log = HistoryLog(tmp_path / "history.jsonl")
    log.append(record(1))
    size = log.size()
    log.append(record(2, outcome=O.ACCESS_VIOLATION))
    log.rollback(size)
    assert log.last_seq == 1
    assert log.load_aggregate("a").failures == 0
    log.append(record(2))


@settings(max_examples=30)
@given(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from(list(O))), max_size=40))
def test_replay_is_deterministic(tmp_path_factory, events):
    path = tmp_path_factory.mktemp("h") / "history.jsonl"
    log = HistoryLog(path)
    for seq, (code, outcome) in enumerate(events, start=1):
        log.append(record(seq, code, outcome))
    first = log.replay()
    assert first == log.replay() == log.aggregates()
    for code, agg in first.items():
        assert agg == log.load_aggregate(code)
