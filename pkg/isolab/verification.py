"""
Verification Reports
====================

Machine-readable results of identity checks and numerical diagnostics,
with a rich table rendering for the console and a process pool runner for
independent sweeps.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Sequence, Tuple

from rich.console import Console
from rich.table import Table

from .logging_utils import get_logger

logger = get_logger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    defect: float = 0.0
    seconds: float = 0.0
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": "pass" if self.passed else "fail",
            "defect": self.defect,
            "seconds": round(self.seconds, 6),
            "details": {key: _jsonable(value) for key, value in sorted(self.details.items())},
        }


@dataclass
class VerificationReport:
    suite: str
    checks: List[CheckResult] = field(default_factory=list)

    def record(self, name: str, passed: bool, defect: float = 0.0, seconds: float = 0.0,
               **details: Any) -> CheckResult:
        check = CheckResult(name=name, passed=bool(passed), defect=float(defect),
                            seconds=seconds, details=details)
        self.checks.append(check)
        if not check.passed:
            logger.warning("check_failed", suite=self.suite, check=name, defect=check.defect)
        return check

    @contextmanager
    def timed(self, name: str) -> Iterator[Dict[str, Any]]:
        """Record a check whose outcome the body writes into the yielded dict"""
        outcome: Dict[str, Any] = {"passed": True, "defect": 0.0}
        started = time.perf_counter()
        yield outcome
        passed = outcome.pop("passed")
        defect = outcome.pop("defect")
        self.record(name, passed, defect, time.perf_counter() - started, **outcome)

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        for check in other.checks:
            self.checks.append(CheckResult(f"{other.suite}/{check.name}", check.passed,
                                           check.defect, check.seconds, check.details))
        return self

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    @property
    def max_defect(self) -> float:
        return max((check.defect for check in self.checks), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }

    def render(self, console: Console = None) -> None:
        console = console or Console()
        table = Table(title=f"isolab verification: {self.suite}")
        table.add_column("check")
        table.add_column("status")
        table.add_column("defect", justify="right")
        table.add_column("seconds", justify="right")
        for check in self.checks:
            status = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
            table.add_row(check.name, status, f"{check.defect:.3e}", f"{check.seconds:.3f}")
        console.print(table)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return str(value)


Task = Tuple[Callable[..., VerificationReport], Dict[str, Any]]


def _run_task(task: Task) -> VerificationReport:
    func, kwargs = task
    return func(**kwargs)


def run_sweep(tasks: Sequence[Task], threads: int = 1) -> List[VerificationReport]:
    """Run independent report-producing tasks, in a process pool when threads > 1"""
    if threads <= 1 or len(tasks) <= 1:
        return [_run_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(_run_task, tasks))
