import pytest

from kernelforge.errors import LogFormatError
from kernelforge.metrics import make_perf_report
from kernelforge.optlog import (
    AgentTranscript,
    LogWriter,
    OptimizationLog,
    RoundRecord,
    load_log,
    save_log,
)


def perf(base=10.0, cand=8.0):
    return make_perf_report({"s": [base] * 3}, {"s": [cand] * 3})


def sample_log(n_rounds=5):
    log = OptimizationLog(task_name="demo", config_snapshot={"rounds": n_rounds})
    log.meta = {"created_at": "2026-08-09T00:00:00+00:00"}
    log.records.append(RoundRecord(0, "// base\n", True, perf(10.0, 10.0)))
    log.agent_transcripts.append(
        AgentTranscript(role="testing", round=0, prompt="p", response="r")
    )
    for r in range(1, n_rounds + 1):
        log.agent_transcripts.append(
            AgentTranscript(role="planning", round=r, prompt=f"p{r}", response=f"s{r}")
        )
        log.agent_transcripts.append(
            AgentTranscript(role="coding", round=r, prompt=f"c{r}", response=f"k{r}")
        )
        log.records.append(RoundRecord(r, f"// cand {r}\n", r % 3 != 2, perf(10.0, 10.0 - r)))
    return log


def test_roundtrip_six_records(tmp_path):
    log = sample_log(5)
    path = tmp_path / "run.jsonl"
    save_log(log, path)
    back = load_log(path)
    assert back.task_name == "demo"
    assert len(back.records) == 6
    assert [r.round for r in back.records] == list(range(6))
    assert back.records[3].performance.geo_mean == log.records[3].performance.geo_mean
    assert len(back.agent_transcripts) == 11


def test_save_load_save_is_byte_identical(tmp_path):
    log = sample_log(3)
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    save_log(log, first)
    save_log(load_log(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_absent_performance_preserved(tmp_path):
    log = sample_log(1)
    log.records.append(RoundRecord(2, "// failed\n", False, None, note="execution timeout"))
    path = tmp_path / "run.jsonl"
    save_log(log, path)
    back = load_log(path)
    assert back.records[2].performance is None
    assert back.records[2].note == "execution timeout"


def test_empty_records_rejected_on_save(tmp_path):
    log = OptimizationLog(task_name="demo")
    with pytest.raises(LogFormatError):
        save_log(log, tmp_path / "x.jsonl")


def test_malformed_line_identifies_line_number(tmp_path):
    log = sample_log(1)
    path = tmp_path / "run.jsonl"
    save_log(log, path)
    lines = path.read_text().splitlines()
    lines[3] = '{"t": "record", "round":'  # truncated JSON
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(LogFormatError, match="line 4"):
        load_log(path)


def test_nonconsecutive_rounds_rejected(tmp_path):
    log = sample_log(2)
    log.records[2] = RoundRecord(5, "// x\n", True, perf())
    with pytest.raises(LogFormatError, match="consecutive"):
        save_log(log, tmp_path / "x.jsonl")


def test_round0_must_be_correct(tmp_path):
    log = sample_log(1)
    log.records[0] = RoundRecord(0, "// base\n", False, perf())
    with pytest.raises(LogFormatError, match="round-0"):
        save_log(log, tmp_path / "x.jsonl")


def test_error_marker_roundtrip(tmp_path):
    log = sample_log(2)
    log.error = {"round": 3, "stage": "agents", "message": "missing entry"}
    path = tmp_path / "run.jsonl"
    save_log(log, path)
    back = load_log(path)
    assert back.error == log.error


def test_writer_streams_and_flushes(tmp_path):
    path = tmp_path / "run.jsonl"
    with LogWriter(path, "demo", {"rounds": 2}) as writer:
        writer.add_record(RoundRecord(0, "// base\n", True, perf(10, 10)))
        # partially written log is already loadable
        partial = load_log(path)
        assert len(partial.records) == 1
        writer.add_record(RoundRecord(1, "// c1\n", True, perf(10, 9)))
    final = load_log(path)
    assert len(final.records) == 2


def test_writer_output_equals_save_log(tmp_path):
    stream_path = tmp_path / "stream.jsonl"
    with LogWriter(stream_path, "demo", {"rounds": 1},
                   meta={"created_at": "2026-08-09T00:00:00+00:00"}) as writer:
        writer.add_transcript(AgentTranscript(role="testing", round=0, prompt="p", response="r"))
        writer.add_record(RoundRecord(0, "// base\n", True, perf(10, 10)))
        writer.add_transcript(AgentTranscript(role="planning", round=1, prompt="q", response="s"))
        writer.add_record(RoundRecord(1, "// c\n", True, perf(10, 8)))
        log = writer.log
    resaved = tmp_path / "resaved.jsonl"
    save_log(log, resaved)
    assert stream_path.read_bytes() == resaved.read_bytes()


def test_header_required_first(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"t":"record","round":0,"code":"x","correct":true,"perf":null}\n')
    with pytest.raises(LogFormatError, match="header"):
        load_log(path)


def test_error_marked_log_without_records_is_loadable(tmp_path):
    # a run that aborts before round 0 leaves header + meta + error marker
    path = tmp_path / "aborted.jsonl"
    with LogWriter(path, "demo", {"rounds": 5}) as writer:
        writer.add_error(0, "testing", "scripted transcript has no entry")
    log = load_log(path)
    assert log.records == []
    assert log.error["stage"] == "testing"
    # but a plain record-less log is still rejected on save
    with pytest.raises(LogFormatError):
        save_log(OptimizationLog(task_name="demo"), tmp_path / "plain.jsonl")
