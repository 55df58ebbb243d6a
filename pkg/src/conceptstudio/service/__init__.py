"""HTTP service: persistence, progress events, and workflow orchestration."""

from conceptstudio.service.events import EventBus, EventKind, EventMessage
from conceptstudio.service.storage import SessionDocument, SessionStore
from conceptstudio.service.workflow import SessionManager

__all__ = [
    "EventBus",
    "EventKind",
    "EventMessage",
    "SessionDocument",
    "SessionStore",
    "SessionManager",
]
