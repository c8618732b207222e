"""Control service: session lifecycle, starter commands, event access.

This is the in-process boundary that the CLI, the test suite and the wire
layer all call. Per-session command serialization is a lock; event access
is cursor-based over the session's retained event list, so any number of
subscribers replay identical, gapless sequences without back-pressure on
trial execution.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from tempfile import mkdtemp
from typing import Optional

from .errors import SessionClosedError, UnknownSessionError
from .persistence import SessionConfig, SessionLogWriter
from .session import SessionRuntime


@dataclass
class SessionHandle:
    id: str
    runtime: SessionRuntime
    log_path: Path
    lock: threading.Lock = field(default_factory=threading.Lock)


class ControlService:
    """Registry of live sessions behind the five control operations."""

    def __init__(self, log_dir: Optional[str | Path] = None) -> None:
        self._log_dir = Path(log_dir) if log_dir else Path(mkdtemp(prefix="startlab-"))
        self._log_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionHandle] = {}
        self._counter = 0
        self._lock = threading.Lock()

    @property
    def log_dir(self) -> Path:
        return self._log_dir

    def create_session(self, config_dict: dict) -> str:
        """Validate the config, open the log, register the session."""
        config = SessionConfig.from_dict(config_dict)
        with self._lock:
            self._counter += 1
            session_id = f"s{self._counter:04d}"
        log_path = self._log_dir / f"{session_id}.jsonl"
        writer = SessionLogWriter(log_path, config)
        runtime = SessionRuntime(config, log_writer=writer)
        handle = SessionHandle(id=session_id, runtime=runtime, log_path=log_path)
        with self._lock:
            self._sessions[session_id] = handle
        return session_id

    def _handle(self, session_id: str) -> SessionHandle:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"unknown session {session_id!r}") from None

    def issue_command(self, session_id: str, command: str) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            return handle.runtime.issue_command(command)

    def fire_armed_start(self, session_id: str) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            return handle.runtime.fire_armed_start()

    def mark_retry(self, session_id: str, record_seq: Optional[int] = None) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            return handle.runtime.mark_retry(record_seq)

    def submit_likert(
        self, session_id: str, participant_id: str, block_index: int, answers: dict
    ) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            return handle.runtime.submit_likert(participant_id, block_index, answers)

    def get_summary(self, session_id: str) -> dict:
        handle = self._handle(session_id)
        with handle.lock:
            return handle.runtime.summary()

    def events_since(self, session_id: str, from_seq: int = 0) -> list[dict]:
        handle = self._handle(session_id)
        with handle.lock:
            return handle.runtime.events_since(from_seq)

    def session_closed(self, session_id: str) -> bool:
        return self._handle(session_id).runtime.closed

    def run_all(self, session_id: str) -> dict:
        """Headless completion of the whole plan (CLI simulate path).

        The log stays open: the end-of-session questionnaire arrives after
        the last trial. Call close_log once the session is fully wrapped up.
        """
        handle = self._handle(session_id)
        with handle.lock:
            if handle.runtime.closed:
                raise SessionClosedError("session already completed")
            return handle.runtime.run_all()

    def close_log(self, session_id: str) -> None:
        handle = self._handle(session_id)
        with handle.lock:
            if handle.runtime.log is not None:
                handle.runtime.log.close()

    def log_path(self, session_id: str) -> Path:
        return self._handle(session_id).log_path
