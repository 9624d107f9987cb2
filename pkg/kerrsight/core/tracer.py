"""
Run tracer capturing solver steps, per-point reconstruction timing and errors
as a JSON-lines log.
"""

import json
import threading
import time
import traceback
import uuid
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from kerrsight.core.errors import ErrorType, KerrsightError


class StepType(Enum):
    """Types of steps in a run"""
    RUN_START = "run_start"
    LINEAR_SOLVE = "linear_solve"
    FIXED_POINT_SWEEP = "fixed_point_sweep"
    FORWARD_SOLVE = "forward_solve"
    CANDIDATE_SEARCH = "candidate_search"
    POINT_OPTIMIZATION = "point_optimization"
    ACCEPTANCE_CHECK = "acceptance_check"
    RUN_ERROR = "run_error"
    RUN_END = "run_end"


@dataclass
class RunStep:
    """A single recorded step"""
    step_id: str
    run_id: str
    timestamp: datetime
    step_type: StepType
    input_data: Optional[Dict[str, Any]] = None
    output_data: Optional[Dict[str, Any]] = None
    error: Optional[Dict[str, Any]] = None
    duration_ms: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['timestamp'] = self.timestamp.isoformat()
        data['step_type'] = self.step_type.value
        return data


@dataclass
class Run:
    """One CLI command invocation"""
    run_id: str
    start_time: datetime
    command: str = ""
    end_time: Optional[datetime] = None
    status: str = "running"  # running, success, failed
    error_type: Optional[ErrorType] = None
    error_message: Optional[str] = None
    steps: List[RunStep] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def header(self) -> Dict[str, Any]:
        return {
            'run_id': self.run_id,
            'command': self.command,
            'start_time': self.start_time.isoformat(),
            'end_time': self.end_time.isoformat() if self.end_time else None,
            'status': self.status,
            'error_type': self.error_type.value if self.error_type else None,
            'error_message': self.error_message,
            'metadata': self.metadata,
        }


def classify_error(error: BaseException) -> ErrorType:
    """Map an exception onto the exit-code taxonomy"""
    if isinstance(error, KerrsightError):
        return error.error_type
    return ErrorType.UNKNOWN_ERROR


class RunTracer:
    """Collects the steps of one run; safe to share between worker threads"""

    def __init__(self):
        self.current_run: Optional[Run] = None
        self._lock = threading.Lock()

    def start_run(self, command: str, metadata: Optional[Dict[str, Any]] = None) -> str:
        run_id = str(uuid.uuid4())
        self.current_run = Run(
            run_id=run_id,
            start_time=datetime.now(),
            command=command,
            metadata=metadata or {},
        )
        self.log_step(StepType.RUN_START, input_data={"command": command, **(metadata or {})})
        return run_id

    def end_run(self, status: str = "success", error: Optional[BaseException] = None):
        if not self.current_run:
            return
        run = self.current_run
        run.end_time = datetime.now()
        run.status = status
        if error is not None:
            run.error_type = classify_error(error)
            run.error_message = str(error)
            details = {
                "type": run.error_type.value,
                "message": str(error),
                "traceback": "".join(traceback.format_exception(type(error), error, error.__traceback__)),
            }
            history = getattr(error, "increment_history", None)
            if history:
                details["increment_history"] = history
            self.log_step(StepType.RUN_ERROR, error=details)
        self.log_step(StepType.RUN_END, output_data={"status": status})

    def log_step(self,
                 step_type: StepType,
                 input_data: Optional[Dict[str, Any]] = None,
                 output_data: Optional[Dict[str, Any]] = None,
                 error: Optional[Dict[str, Any]] = None,
                 duration_ms: Optional[float] = None):
        if not self.current_run:
            return
        step = RunStep(
            step_id=str(uuid.uuid4()),
            run_id=self.current_run.run_id,
            timestamp=datetime.now(),
            step_type=step_type,
            input_data=input_data,
            output_data=output_data,
            error=error,
            duration_ms=duration_ms,
        )
        with self._lock:
            self.current_run.steps.append(step)

    def timed(self, step_type: StepType, **input_data) -> "TimedStep":
        """Context manager recording the duration and outcome of a block"""
        return TimedStep(self, step_type, input_data)

    @property
    def steps(self) -> List[RunStep]:
        if not self.current_run:
            return []
        with self._lock:
            return list(self.current_run.steps)

    def summary(self) -> Dict[str, Any]:
        if not self.current_run:
            return {}
        run = self.current_run
        end = run.end_time or datetime.now()
        counts = Counter(step.step_type.value for step in self.steps)
        return {
            "run_id": run.run_id,
            "command": run.command,
            "status": run.status,
            "error_type": run.error_type.value if run.error_type else None,
            "duration_s": (end - run.start_time).total_seconds(),
            "step_counts": dict(sorted(counts.items())),
        }

    def write_jsonl(self, path: Union[str, Path]) -> Path:
        """First line is the run header, then one line per step in record order."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if not self.current_run:
            raise RuntimeError("no run to write")
        with open(path, "w") as f:
            f.write(json.dumps({"run": self.current_run.header()}, default=str) + "\n")
            for step in self.steps:
                f.write(json.dumps(step.to_dict(), default=str) + "\n")
        return path


class TimedStep:
    """Context manager behind RunTracer.timed"""

    def __init__(self, tracer: RunTracer, step_type: StepType, input_data: Dict[str, Any]):
        self.tracer = tracer
        self.step_type = step_type
        self.input_data = input_data
        self.output_data: Optional[Dict[str, Any]] = None
        self.start_time = 0.0

    def __enter__(self):
        self.start_time = time.time()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        duration_ms = (time.time() - self.start_time) * 1000
        error = None
        if exc_type:
            error = {
                'type': classify_error(exc_val).value,
                'exception': exc_type.__name__,
                'message': str(exc_val),
            }
        self.tracer.log_step(
            self.step_type,
            input_data=self.input_data,
            output_data=self.output_data,
            error=error,
            duration_ms=duration_ms,
        )
        return False
