"""In-process progress events with per-session gapless sequence numbers.

The bus keeps the full per-session history for the life of the process, so
a subscriber can join (or rejoin) at any point and replay everything after
the last seq it saw before blocking for new messages. Multiple concurrent
subscribers see identical ordered streams.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator


class EventKind(str, Enum):
    REFINEMENT_DONE = "RefinementDone"
    CANDIDATES_READY = "CandidatesReady"
    SEGMENTATION_READY = "SegmentationReady"
    CHART_READY = "ChartReady"
    EDIT_APPLIED = "EditApplied"
    EDIT_REJECTED = "EditRejected"
    PROVIDER_ERROR = "ProviderError"


@dataclass(frozen=True)
class EventMessage:
    session_id: str
    seq: int  # 1-based, gapless within a session
    kind: EventKind
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "kind": self.kind.value,
            "payload": self.payload,
        }


class EventBus:
    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._log: dict[str, list[EventMessage]] = {}

    def publish(self, session_id: str, kind: EventKind, payload: dict | None = None) -> EventMessage:
        with self._cond:
            log = self._log.setdefault(session_id, [])
            message = EventMessage(
                session_id=session_id,
                seq=len(log) + 1,
                kind=kind,
                payload=payload or {},
            )
            log.append(message)
            self._cond.notify_all()
        return message

    def history(self, session_id: str, after_seq: int = 0) -> list[EventMessage]:
        with self._cond:
            return [m for m in self._log.get(session_id, ()) if m.seq > after_seq]

    def latest_seq(self, session_id: str) -> int:
        with self._cond:
            return len(self._log.get(session_id, ()))

    def wait_for(
        self,
        session_id: str,
        predicate: Callable[[EventMessage], bool],
        timeout: float = 5.0,
    ) -> EventMessage | None:
        """Earliest event satisfying the predicate, blocking until timeout."""
        seen = 0
        stop_at = time.monotonic() + timeout
        with self._cond:
            while True:
                for message in self._log.get(session_id, ())[seen:]:
                    seen += 1
                    if predicate(message):
                        return message
                remaining = stop_at - time.monotonic()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)

    def stream(
        self,
        session_id: str,
        after_seq: int = 0,
        *,
        stop: threading.Event | None = None,
        poll_s: float = 0.25,
    ) -> Iterator[EventMessage]:
        """Yield history after after_seq, then new events as they arrive.

        Runs until ``stop`` is set; with no stop event it blocks forever, so
        callers owning a connection should always pass one.
        """
        cursor = after_seq
        while stop is None or not stop.is_set():
            with self._cond:
                pending = [
                    m for m in self._log.get(session_id, ()) if m.seq > cursor
                ]
                if not pending:
                    self._cond.wait(poll_s)
                    pending = [
                        m for m in self._log.get(session_id, ()) if m.seq > cursor
                    ]
            for message in pending:
                cursor = message.seq
                yield message
