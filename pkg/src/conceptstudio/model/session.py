"""The design-session state machine.

A session walks Drafting -> Generated -> Decomposed -> Editing and then
self-loops in Editing, one transition per edit outcome. Two extra rows keep
the table honest for real interaction patterns: regenerating concepts while
still in Generated (the sketch is editable until decomposition), and a failed
first edit leaving the session in Decomposed.

The table is the single source of truth for which API calls are legal; the
HTTP layer mirrors it rather than inventing its own rules.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from enum import Enum

from conceptstudio.errors import InvalidTransition, PreconditionError


class SessionState(str, Enum):
    DRAFTING = "Drafting"
    GENERATED = "Generated"
    DECOMPOSED = "Decomposed"
    EDITING = "Editing"


_STATE_ORDER = {
    SessionState.DRAFTING: 0,
    SessionState.GENERATED: 1,
    SessionState.DECOMPOSED: 2,
    SessionState.EDITING: 3,
}


class SessionEvent(str, Enum):
    CONCEPTS_GENERATED = "ConceptsGenerated"
    DECOMPOSITION_COMPLETED = "DecompositionCompleted"
    EDIT_ACCEPTED = "EditAccepted"
    EDIT_REJECTED = "EditRejected"


# (state, event) -> next state. Anything absent is illegal.
TRANSITIONS: dict[tuple[SessionState, SessionEvent], SessionState] = {
    (SessionState.DRAFTING, SessionEvent.CONCEPTS_GENERATED): SessionState.GENERATED,
    (SessionState.GENERATED, SessionEvent.CONCEPTS_GENERATED): SessionState.GENERATED,
    (SessionState.GENERATED, SessionEvent.DECOMPOSITION_COMPLETED): SessionState.DECOMPOSED,
    (SessionState.DECOMPOSED, SessionEvent.EDIT_ACCEPTED): SessionState.EDITING,
    (SessionState.DECOMPOSED, SessionEvent.EDIT_REJECTED): SessionState.DECOMPOSED,
    (SessionState.EDITING, SessionEvent.EDIT_ACCEPTED): SessionState.EDITING,
    (SessionState.EDITING, SessionEvent.EDIT_REJECTED): SessionState.EDITING,
}

# Events that append the transaction reference to the session history.
_HISTORY_EVENTS = frozenset({SessionEvent.EDIT_ACCEPTED})


@dataclass(frozen=True)
class SessionRecord:
    """Immutable session snapshot: state, provisional selection, edit history.

    ``selected_index`` is set the moment concepts exist (the first candidate
    is the provisional selection) so that "a selection exists" is equivalent
    to "state is at least Generated".
    """

    session_id: str
    state: SessionState = SessionState.DRAFTING
    candidate_count: int = 0
    selected_index: int | None = None
    history: tuple[str, ...] = ()  # EditTransaction ids, append-only

    @classmethod
    def new(cls, session_id: str | None = None) -> "SessionRecord":
        return cls(session_id=session_id or uuid.uuid4().hex)

    @property
    def has_selection(self) -> bool:
        return self.selected_index is not None

    def at_least(self, state: SessionState) -> bool:
        return _STATE_ORDER[self.state] >= _STATE_ORDER[state]

    def select(self, index: int) -> "SessionRecord":
        if not self.at_least(SessionState.GENERATED):
            raise InvalidTransition(self.state.value, f"select({index})")
        if not 0 <= index < self.candidate_count:
            raise PreconditionError(
                f"candidate index {index} out of range 0..{self.candidate_count - 1}"
            )
        return replace(self, selected_index=index)


def transition(
    session: SessionRecord,
    event: SessionEvent,
    *,
    candidate_count: int | None = None,
    transaction_id: str | None = None,
) -> SessionRecord:
    """Apply one event, returning the next session snapshot.

    CONCEPTS_GENERATED carries the new candidate count and provisionally
    selects index 0; EDIT_ACCEPTED appends its transaction id to the history.
    Illegal (state, event) rows raise InvalidTransition and leave the input
    untouched (it is immutable anyway).
    """
    key = (session.state, event)
    if key not in TRANSITIONS:
        raise InvalidTransition(session.state.value, event.value)
    next_state = TRANSITIONS[key]

    updates: dict = {"state": next_state}
    if event is SessionEvent.CONCEPTS_GENERATED:
        count = candidate_count if candidate_count is not None else session.candidate_count
        if count < 1:
            raise InvalidTransition(session.state.value, f"{event.value}(count={count})")
        updates["candidate_count"] = count
        updates["selected_index"] = 0
    if event in _HISTORY_EVENTS:
        if transaction_id is None:
            raise InvalidTransition(session.state.value, f"{event.value}(no transaction)")
        updates["history"] = session.history + (transaction_id,)
    return replace(session, **updates)


def legal_events(state: SessionState) -> frozenset[SessionEvent]:
    return frozenset(ev for (st, ev) in TRANSITIONS if st == state)
