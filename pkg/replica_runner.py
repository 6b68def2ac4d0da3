import os
import threading
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from dotenv import load_dotenv

from models.errors import ConfigError, ConvergenceError


class ReplicaStatus(Enum):
    PENDING = "pending"
    PROCESSING = "processing"
    COMPLETED = "completed"
    ERROR = "error"


@dataclass
class ReplicaTask:
    """One Monte Carlo replica"""

    index: int
    status: ReplicaStatus = ReplicaStatus.PENDING
    result: Any = None
    error: Exception | None = None
    started_at: float | None = None
    completed_at: float | None = None

    @property
    def duration(self) -> float:
        if self.started_at is None or self.completed_at is None:
            return 0.0
        return self.completed_at - self.started_at


@dataclass
class ReplicaBatch:
    """All replicas of one estimator, kept in replica order"""

    label: str
    seed: int
    tasks: list[ReplicaTask] = field(default_factory=list)

    @property
    def results(self) -> list[Any]:
        return [task.result for task in self.tasks]

    @property
    def completed(self) -> int:
        return sum(task.status == ReplicaStatus.COMPLETED for task in self.tasks)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count from the argument, else MATCHLAB_THREADS, else 1"""
    if threads is None:
        load_dotenv()
        raw = os.getenv("MATCHLAB_THREADS", "1")
        try:
            threads = int(raw)
        except ValueError as e:
            raise ConfigError(f"MATCHLAB_THREADS must be an integer, got {raw!r}", key="threads") from e
    if threads < 1:
        raise ConfigError(f"threads must be at least 1, got {threads}", key="threads")
    return threads


class ReplicaRunner:
    """Runs independent replicas on a thread pool and returns them ordered by replica index"""

    def __init__(self, threads: int = 1, quiet: bool = False):
        self.threads = threads
        self.quiet = quiet
        self._lock = threading.Lock()

    def run(
        self,
        label: str,
        func: Callable[[int], Any],
        replicas: int,
        seed: int,
        progress_callback: Callable[[str, int, int], None] | None = None,
    ) -> ReplicaBatch:
        """
        Evaluate func(replica_index) for every replica

        Args:
            label: Name shown in status lines
            func: Replica body; must depend only on its index (and captured constants)
            replicas: Number of replicas R
            seed: Base seed, attached to errors
            progress_callback: Called as (label, completed, total) after each replica

        Returns:
            ReplicaBatch with results in replica order, independent of the worker count

        Raises:
            ConvergenceError: Tagged with (seed, replica) of the lowest failing replica
        """
        batch = ReplicaBatch(label=label, seed=seed, tasks=[ReplicaTask(i) for i in range(replicas)])

        def run_task(task: ReplicaTask) -> None:
            with self._lock:
                task.status = ReplicaStatus.PROCESSING
                task.started_at = time.time()
            try:
                result = func(task.index)
                with self._lock:
                    task.result = result
                    task.status = ReplicaStatus.COMPLETED
            except Exception as e:
                with self._lock:
                    task.error = e
                    task.status = ReplicaStatus.ERROR
            finally:
                with self._lock:
                    task.completed_at = time.time()
                    done = sum(t.completed_at is not None for t in batch.tasks)
                if progress_callback is not None:
                    try:
                        progress_callback(label, done, replicas)
                    except Exception as e:
                        print(f"Progress callback error for {label}: {e}")

        if self.threads == 1:
            for task in batch.tasks:
                run_task(task)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(run_task, batch.tasks))

        failed = [task for task in batch.tasks if task.status == ReplicaStatus.ERROR]
        if failed:
            first = failed[0]
            if not self.quiet:
                print(f"✗ {label}: replica {first.index} failed ({first.error})")
            if isinstance(first.error, ConvergenceError):
                raise first.error.with_replica(seed, first.index) from first.error
            raise first.error

        if not self.quiet:
            elapsed = sum(task.duration for task in batch.tasks)
            print(f"✓ {label}: {replicas} replicas ({elapsed:.1f}s of replica time)")
        return batch


def create_replica_runner(threads: int | None = None, quiet: bool = False) -> ReplicaRunner:
    """Factory function to create a runner with the resolved worker count"""
    return ReplicaRunner(threads=resolve_threads(threads), quiet=quiet)
