"""Session orchestration: briefs to candidates, selection to chart, edits.

One SessionManager per process. Writes to a session are serialized by a
per-session lock, and at most one edit may be in flight per session (a
second submission is refused, not queued). Every pending edit transaction is
persisted before any provider work starts, so a crash can only ever leave a
Pending record behind; restart recovery marks those Failed.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import replace
from pathlib import Path
from typing import Protocol, Sequence

from conceptstudio.editor import (
    EditKind,
    EditStatus,
    EditTransaction,
    edit_by_recommendation,
    edit_by_sketch,
    update_chart_after_edit,
)
from conceptstudio.errors import (
    ConceptStudioError,
    EditInFlight,
    GenerationFailed,
    IllegalState,
    InvalidTransition,
    PreconditionError,
    ProviderError,
)
from conceptstudio.generation import (
    DEFAULT_CANDIDATES,
    extract_pairs,
    generate_candidates,
    refine,
)
from conceptstudio.mapping import ComponentRegion, build_chart, build_overlay, map_functions
from conceptstudio.model.documents import ConceptCandidate
from conceptstudio.model.raster import RasterImage, SketchDocument, rasterize
from conceptstudio.model.session import SessionEvent, SessionRecord, SessionState, transition
from conceptstudio.providers.base import Capability, ProviderRequest
from conceptstudio.providers.gateway import Gateway
from conceptstudio.segmentation.inference import ColorRuleBackend, regions, segment
from conceptstudio.segmentation.schema import LabelMask, schema_for
from conceptstudio.segmentation.training import load_artifact
from conceptstudio.service.events import EventBus, EventKind
from conceptstudio.service.storage import SessionDocument, SessionStore

# When set, the process exits hard right after persisting a Pending edit
# transaction; used to exercise restart recovery.
CRASH_AFTER_PENDING_ENV = "CONCEPT_CRASH_AFTER_PENDING"


class SegmenterBackend(Protocol):
    def segment(self, image: RasterImage) -> LabelMask: ...


class ModelBackend:
    """Trained-model segmentation wrapped to the backend protocol."""

    def __init__(self, model) -> None:
        self._model = model

    def segment(self, image: RasterImage) -> LabelMask:
        return segment(self._model, image)


class SessionManager:
    def __init__(
        self,
        store: SessionStore,
        gateway: Gateway,
        bus: EventBus,
        *,
        model_dir: str | Path | None = None,
        candidates: int = DEFAULT_CANDIDATES,
    ) -> None:
        self.store = store
        self.gateway = gateway
        self.bus = bus
        self.candidates = candidates
        self._model_dir = Path(model_dir) if model_dir else None
        self._backends: dict[str, SegmenterBackend] = {}
        self._registry = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._edits_in_flight: set[str] = set()
        # inputs an edit needs between begin and finish but the transaction
        # record does not persist (stroke lists, raw transcripts)
        self._pending_inputs: dict[str, tuple[str | None, tuple, str]] = {}
        self.recover_all()

    # -- plumbing -----------------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry:
            return self._locks.setdefault(session_id, threading.Lock())

    def _backend_for(self, category: str) -> SegmenterBackend:
        if category not in self._backends:
            if self._model_dir is not None:
                model, _, _ = load_artifact(self._model_dir / category)
                self._backends[category] = ModelBackend(model)
            else:
                self._backends[category] = ColorRuleBackend.for_category(category)
        return self._backends[category]

    def recover_all(self) -> list[str]:
        """Mark edits left Pending by a dead process as Failed."""
        recovered = []
        for session_id in self.store.list_ids():
            doc = self.store.load(session_id)
            fixed = tuple(
                replace(
                    txn,
                    status=EditStatus.FAILED,
                    error="interrupted before completion",
                )
                if txn.status is EditStatus.PENDING
                else txn
                for txn in doc.transactions
            )
            if fixed != doc.transactions:
                self.store.save(replace(doc, transactions=fixed))
                recovered.append(session_id)
        return recovered

    # -- session lifecycle ---------------------------------------------------

    def create(self) -> SessionDocument:
        doc = SessionDocument(record=SessionRecord.new())
        self.store.save(doc)
        return doc

    def get(self, session_id: str) -> SessionDocument:
        return self.store.load(session_id)

    def put_sketch(self, session_id: str, sketch: SketchDocument) -> SessionDocument:
        with self._lock_for(session_id):
            doc = self.store.load(session_id)
            if doc.record.at_least(SessionState.DECOMPOSED):
                raise IllegalState(
                    f"sketch is frozen once decomposition ran "
                    f"(state {doc.record.state.value})"
                )
            doc = replace(doc, sketch=sketch)
            self.store.save(doc)
            return doc

    def _transcribe(self, audio: bytes) -> str:
        request = ProviderRequest(
            capability=Capability.TRANSCRIBE, prompt="", audio=audio
        )
        return self.gateway.invoke(request).text

    def run_brief(
        self,
        session_id: str,
        transcript: str = "",
        audio: bytes | None = None,
    ) -> SessionDocument:
        """Refine the sketch+brief and generate candidate concepts."""
        with self._lock_for(session_id):
            doc = self.store.load(session_id)
            if doc.record.at_least(SessionState.DECOMPOSED):
                raise InvalidTransition(doc.record.state.value, "brief")
            try:
                if audio is not None:
                    transcript = self._transcribe(audio)
                sketch_image = rasterize(doc.sketch) if doc.sketch else None
                refinement = refine(self.gateway, sketch_image, transcript)
                self.bus.publish(
                    session_id,
                    EventKind.REFINEMENT_DONE,
                    {
                        "refined_description": refinement.refined_description,
                        "style": refinement.style_constraints,
                        "placement": refinement.placement_constraints,
                    },
                )
                concepts = generate_candidates(
                    self.gateway, refinement, self.candidates, transcript=transcript
                )
            except (ProviderError, GenerationFailed) as exc:
                self.bus.publish(
                    session_id, EventKind.PROVIDER_ERROR, {"error": str(exc)}
                )
                raise
            hashes = tuple(self.store.put_image(c.image) for c in concepts)
            record = transition(
                doc.record,
                SessionEvent.CONCEPTS_GENERATED,
                candidate_count=len(concepts),
            )
            doc = replace(
                doc,
                record=record,
                brief=concepts[0].brief,
                category=concepts[0].brief.category,
                candidate_hashes=hashes,
            )
            self.store.save(doc)
            self.bus.publish(
                session_id,
                EventKind.CANDIDATES_READY,
                {"candidates": list(hashes), "count": len(hashes)},
            )
            return doc

    def select(self, session_id: str, index: int) -> SessionDocument:
        """Decompose the chosen candidate into regions and a function chart."""
        with self._lock_for(session_id):
            doc = self.store.load(session_id)
            record = doc.record.select(index)
            if doc.record.state is not SessionState.GENERATED:
                # selectable but already decomposed: re-decomposition is not a row
                raise InvalidTransition(doc.record.state.value, "select")
            if doc.brief is None:
                raise IllegalState("session has no brief to decompose against")
            image = self.store.get_image(doc.candidate_hashes[index])
            try:
                candidate = ConceptCandidate(image=image, brief=doc.brief)
                pairs = tuple(extract_pairs(self.gateway, candidate))
                backend = self._backend_for(doc.category)
                mask = backend.segment(image)
                mask_hash = self.store.put_mask(mask)
                self.bus.publish(
                    session_id,
                    EventKind.SEGMENTATION_READY,
                    {"mask": mask_hash},
                )
                region_list = regions(mask, schema_for(doc.category))
                overlay, legend = build_overlay(image, region_list)
                overlay_hash = self.store.put_image(overlay)
                mapping = map_functions(
                    self.gateway, overlay, legend, list(pairs), category=doc.category
                )
                chart = build_chart(self.gateway, mapping, list(pairs))
            except (ProviderError, ConceptStudioError) as exc:
                if isinstance(exc, (InvalidTransition, PreconditionError)):
                    raise
                self.bus.publish(
                    session_id, EventKind.PROVIDER_ERROR, {"error": str(exc)}
                )
                raise
            record = transition(record, SessionEvent.DECOMPOSITION_COMPLETED)
            doc = replace(
                doc,
                record=record,
                pairs=pairs,
                mask_hash=mask_hash,
                overlay_hash=overlay_hash,
                legend=dict(legend),
                chart=chart,
                versions=(doc.candidate_hashes[index],),
            )
            self.store.save(doc)
            self.bus.publish(
                session_id,
                EventKind.CHART_READY,
                {"chart": chart.to_dict(), "overlay": overlay_hash},
            )
            return doc

    # -- edits ----------------------------------------------------------------

    def _region_for(self, doc: SessionDocument, component: str) -> ComponentRegion:
        if doc.mask_hash is None:
            raise IllegalState("session has no segmentation mask")
        mask = self.store.get_mask(doc.mask_hash)
        for region in regions(mask, schema_for(doc.category)):
            if region.class_label == component:
                return region
        raise PreconditionError(f"component {component!r} has no usable region")

    def begin_edit(
        self,
        session_id: str,
        *,
        kind: EditKind,
        function: str,
        chosen: str | None = None,
        strokes: Sequence | None = None,
        transcript: str = "",
        edit_id: str | None = None,
    ) -> EditTransaction:
        """Validate and persist a Pending transaction, claiming the edit slot.

        Raises before persisting anything when the request is malformed or a
        prior edit is still running; on success the caller owes a matching
        finish_edit (or the restart recovery will mark the edit Failed).
        """
        with self._registry:
            if session_id in self._edits_in_flight:
                raise EditInFlight(f"session {session_id} already has an edit running")
            self._edits_in_flight.add(session_id)
        try:
            with self._lock_for(session_id):
                doc = self.store.load(session_id)
                if not doc.record.at_least(SessionState.DECOMPOSED):
                    raise InvalidTransition(doc.record.state.value, "edit")
                if doc.chart is None:
                    raise IllegalState("decomposed session is missing its chart")
                component, entry = doc.chart.entry_for(function)
                if kind is EditKind.RECOMMENDATION:
                    if not chosen:
                        raise PreconditionError("a recommendation edit names its choice")
                    if chosen not in entry.alternatives:
                        raise PreconditionError(
                            f"{chosen!r} is not an offered alternative for {function!r}"
                        )
                else:
                    if not strokes:
                        raise PreconditionError("a sketch edit carries strokes")
                self._region_for(doc, component)  # fail fast on unusable regions

                pending = EditTransaction(
                    edit_id=edit_id or uuid.uuid4().hex,
                    kind=kind,
                    component=component,
                    function=function,
                    from_solution=entry.current,
                    to_solution=chosen or "",
                )
                doc = replace(doc, transactions=doc.transactions + (pending,))
                self.store.save(doc)
                if os.environ.get(CRASH_AFTER_PENDING_ENV):
                    os._exit(70)
                self._pending_inputs[pending.edit_id] = (
                    chosen,
                    tuple(strokes or ()),
                    transcript,
                )
                return pending
        except BaseException:
            with self._registry:
                self._edits_in_flight.discard(session_id)
            raise

    def finish_edit(
        self, session_id: str, pending: EditTransaction
    ) -> tuple[SessionDocument, EditTransaction]:
        """Run the provider work for a claimed edit and commit the outcome."""
        try:
            return self._finish_edit_locked(session_id, pending)
        finally:
            with self._registry:
                self._edits_in_flight.discard(session_id)
            self._pending_inputs.pop(pending.edit_id, None)

    def run_edit(
        self,
        session_id: str,
        *,
        kind: EditKind,
        function: str,
        chosen: str | None = None,
        strokes: Sequence | None = None,
        transcript: str = "",
        edit_id: str | None = None,
    ) -> tuple[SessionDocument, EditTransaction]:
        """Run one edit end to end; a second concurrent edit is refused."""
        pending = self.begin_edit(
            session_id,
            kind=kind,
            function=function,
            chosen=chosen,
            strokes=strokes,
            transcript=transcript,
            edit_id=edit_id,
        )
        return self.finish_edit(session_id, pending)

    def _finish_edit_locked(
        self, session_id: str, pending: EditTransaction
    ) -> tuple[SessionDocument, EditTransaction]:
        chosen, strokes, transcript = self._pending_inputs.get(
            pending.edit_id, (pending.to_solution or None, (), "")
        )
        with self._lock_for(session_id):
            doc = self.store.load(session_id)
            region = self._region_for(doc, pending.component)
            image = self.store.get_image(doc.image_hash())
            if pending.kind is EditKind.RECOMMENDATION:
                outcome = edit_by_recommendation(
                    self.gateway,
                    image,
                    region,
                    doc.chart,
                    pending.function,
                    chosen,
                    category=doc.category,
                    edit_id=pending.edit_id,
                )
            else:
                outcome = edit_by_sketch(
                    self.gateway,
                    image,
                    region,
                    doc.chart,
                    pending.function,
                    list(strokes),
                    transcript,
                    category=doc.category,
                    edit_id=pending.edit_id,
                )
            txn = outcome.transaction

            versions = doc.versions
            if txn.status is EditStatus.APPLIED:
                new_hash = self.store.put_image(outcome.image)
                versions = versions + (new_hash,)
                txn = replace(txn, result_version=len(versions))

            if txn.status is EditStatus.FAILED:
                record = transition(doc.record, SessionEvent.EDIT_REJECTED)
                chart = doc.chart
            else:
                record = transition(
                    doc.record,
                    SessionEvent.EDIT_ACCEPTED,
                    transaction_id=txn.edit_id,
                )
                chart = update_chart_after_edit(doc.chart, txn)

            transactions = tuple(
                txn if t.edit_id == pending.edit_id else t for t in doc.transactions
            )
            doc = replace(
                doc,
                record=record,
                chart=chart,
                versions=versions,
                transactions=transactions,
            )
            self.store.save(doc)

            if txn.status is EditStatus.FAILED:
                self.bus.publish(
                    session_id,
                    EventKind.EDIT_REJECTED,
                    {"edit_id": txn.edit_id, "error": txn.error},
                )
            else:
                self.bus.publish(
                    session_id,
                    EventKind.EDIT_APPLIED,
                    {
                        "edit_id": txn.edit_id,
                        "status": txn.status.value,
                        "version": doc.current_version,
                        "image": doc.image_hash(),
                        "chart": chart.to_dict(),
                    },
                )
            return doc, txn
