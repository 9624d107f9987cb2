import json
import threading

import pytest

from kerrsight.core.errors import ConfigParseError, ErrorType, NoContractionError
from kerrsight.core.tracer import RunTracer, StepType, classify_error


def test_steps_are_recorded_in_order():
    tracer = RunTracer()
    tracer.start_run("forward", {"config": "scene.toml"})
    tracer.log_step(StepType.FIXED_POINT_SWEEP, output_data={"sweep": 1, "increment": 1.0})
    tracer.log_step(StepType.FORWARD_SOLVE, output_data={"iterations": 1})
    tracer.end_run("success")
    types = [s.step_type for s in tracer.steps]
    assert types == [StepType.RUN_START, StepType.FIXED_POINT_SWEEP, StepType.FORWARD_SOLVE, StepType.RUN_END]
    summary = tracer.summary()
    assert summary["status"] == "success"
    assert summary["step_counts"]["fixed_point_sweep"] == 1


def test_no_run_means_no_steps():
    tracer = RunTracer()
    tracer.log_step(StepType.LINEAR_SOLVE)
    assert tracer.steps == []
    assert tracer.summary() == {}


def test_failed_run_keeps_the_increment_history():
    tracer = RunTracer()
    tracer.start_run("forward")
    tracer.end_run("failed", NoContractionError("diverged", [1.0, 2.0, 4.0]))
    error_step = next(s for s in tracer.steps if s.step_type is StepType.RUN_ERROR)
    assert error_step.error["increment_history"] == [1.0, 2.0, 4.0]
    assert error_step.error["type"] == "solver_error"
    assert tracer.current_run.error_type is ErrorType.SOLVER_ERROR


def test_timed_records_duration_and_errors():
    tracer = RunTracer()
    tracer.start_run("check")
    with tracer.timed(StepType.ACCEPTANCE_CHECK, check="appendix") as step:
        step.output_data = {"passed": True}
    with pytest.raises(ConfigParseError):
        with tracer.timed(StepType.ACCEPTANCE_CHECK, check="broken"):
            raise ConfigParseError("bad file")
    ok, failed = [s for s in tracer.steps if s.step_type is StepType.ACCEPTANCE_CHECK]
    assert ok.duration_ms >= 0 and ok.output_data == {"passed": True} and ok.error is None
    assert failed.error["type"] == "parse_error"
    assert failed.input_data == {"check": "broken"}


def test_jsonl_file(tmp_path):
    tracer = RunTracer()
    tracer.start_run("reconstruct")
    tracer.log_step(StepType.POINT_OPTIMIZATION, output_data={"value": 0.5})
    tracer.end_run()
    path = tracer.write_jsonl(tmp_path / "logs" / "run_log.jsonl")
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert lines[0]["run"]["command"] == "reconstruct"
    assert [line["step_type"] for line in lines[1:]] == ["run_start", "point_optimization", "run_end"]


def test_concurrent_logging():
    tracer = RunTracer()
    tracer.start_run("reconstruct")

    def work():
        for _ in range(100):
            tracer.log_step(StepType.POINT_OPTIMIZATION)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(tracer.steps) == 801


def test_classify_error():
    assert classify_error(ConfigParseError("x")) is ErrorType.PARSE_ERROR
    assert classify_error(NoContractionError("x")) is ErrorType.SOLVER_ERROR
    assert classify_error(RuntimeError("x")) is ErrorType.UNKNOWN_ERROR
