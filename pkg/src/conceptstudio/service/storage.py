"""Session persistence: one JSON document per session, blobs by content hash.

Images and label masks live under ``store/blobs/<sha256>.png`` and are
immutable once written, so the document only ever references them by hash.
Document writes go through a temp file and an atomic rename, and every blob
a document mentions is written before the document itself; a crash can leave
an orphaned blob but never a document pointing at missing bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from conceptstudio.editor import EditTransaction
from conceptstudio.errors import PreconditionError, UnknownSession
from conceptstudio.mapping import FunctionChart
from conceptstudio.model.documents import DesignBrief, FunctionSolutionPair
from conceptstudio.model.raster import RasterImage, SketchDocument
from conceptstudio.model.session import SessionRecord, SessionState
from conceptstudio.segmentation.schema import LabelMask


@dataclass(frozen=True)
class SessionDocument:
    """Everything the service knows about one session, ready to serialize.

    ``versions`` holds image content hashes; index i is version i+1, so
    version 1 is the selected concept as generated and the latest version is
    the current image. ``candidate_hashes`` keeps the generated candidates
    addressable before and after selection.
    """

    record: SessionRecord
    brief: DesignBrief | None = None
    sketch: SketchDocument | None = None
    category: str = ""
    candidate_hashes: tuple[str, ...] = ()
    pairs: tuple[FunctionSolutionPair, ...] = ()
    mask_hash: str | None = None
    overlay_hash: str | None = None
    legend: dict[str, str] = field(default_factory=dict)
    chart: FunctionChart | None = None
    versions: tuple[str, ...] = ()
    transactions: tuple[EditTransaction, ...] = ()

    def __post_init__(self) -> None:
        if self.record.state is not SessionState.DRAFTING and not self.candidate_hashes:
            raise PreconditionError(
                f"state {self.record.state.value} requires generated candidates"
            )
        if self.versions and not self.record.at_least(SessionState.DECOMPOSED):
            raise PreconditionError("image versions appear at decomposition")

    @property
    def session_id(self) -> str:
        return self.record.session_id

    @property
    def current_version(self) -> int:
        return len(self.versions)

    def image_hash(self, version: int | None = None) -> str:
        """Hash for a 1-based version, or the latest when version is None."""
        if not self.versions:
            raise PreconditionError("no committed image versions yet")
        if version is None:
            return self.versions[-1]
        if not 1 <= version <= len(self.versions):
            raise PreconditionError(
                f"version {version} out of range 1..{len(self.versions)}"
            )
        return self.versions[version - 1]

    def to_dict(self) -> dict:
        return {
            "record": {
                "session_id": self.record.session_id,
                "state": self.record.state.value,
                "candidate_count": self.record.candidate_count,
                "selected_index": self.record.selected_index,
                "history": list(self.record.history),
            },
            "brief": self.brief.to_dict() if self.brief else None,
            "sketch": self.sketch.to_dict() if self.sketch else None,
            "category": self.category,
            "candidate_hashes": list(self.candidate_hashes),
            "pairs": [pair.to_dict() for pair in self.pairs],
            "mask_hash": self.mask_hash,
            "overlay_hash": self.overlay_hash,
            "legend": dict(self.legend),
            "chart": self.chart.to_dict() if self.chart else None,
            "versions": list(self.versions),
            "transactions": [txn.to_dict() for txn in self.transactions],
        }

    @staticmethod
    def from_dict(data: dict) -> "SessionDocument":
        rec = data["record"]
        record = SessionRecord(
            session_id=rec["session_id"],
            state=SessionState(rec["state"]),
            candidate_count=rec["candidate_count"],
            selected_index=rec["selected_index"],
            history=tuple(rec["history"]),
        )
        return SessionDocument(
            record=record,
            brief=DesignBrief.from_dict(data["brief"]) if data.get("brief") else None,
            sketch=(
                SketchDocument.from_dict(data["sketch"]) if data.get("sketch") else None
            ),
            category=data.get("category", ""),
            candidate_hashes=tuple(data.get("candidate_hashes", ())),
            pairs=tuple(
                FunctionSolutionPair.from_dict(p) for p in data.get("pairs", ())
            ),
            mask_hash=data.get("mask_hash"),
            overlay_hash=data.get("overlay_hash"),
            legend=dict(data.get("legend", {})),
            chart=FunctionChart.from_dict(data["chart"]) if data.get("chart") else None,
            versions=tuple(data.get("versions", ())),
            transactions=tuple(
                EditTransaction.from_dict(t) for t in data.get("transactions", ())
            ),
        )


class SessionStore:
    """Filesystem layout: sessions/<id>.json plus blobs/<hash>.png."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.blobs_dir = self.root / "blobs"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.blobs_dir.mkdir(parents=True, exist_ok=True)

    # -- blobs ------------------------------------------------------------

    def _blob_path(self, content_hash: str) -> Path:
        return self.blobs_dir / f"{content_hash}.png"

    def _write_blob(self, content_hash: str, data: bytes) -> None:
        path = self._blob_path(content_hash)
        if path.exists():  # content-addressed: identical bytes, skip rewrite
            return
        self._atomic_write(path, data)

    def put_image(self, image: RasterImage) -> str:
        content_hash = image.content_hash
        self._write_blob(content_hash, image.to_png_bytes())
        return content_hash

    def get_image(self, content_hash: str) -> RasterImage:
        return RasterImage.from_png_bytes(self._read_blob(content_hash))

    def put_mask(self, mask: LabelMask) -> str:
        # hashed over raw label bytes, mirroring RasterImage.content_hash
        content_hash = hashlib.sha256(mask.labels).hexdigest()
        self._write_blob(content_hash, mask.to_png_bytes())
        return content_hash

    def get_mask(self, content_hash: str) -> LabelMask:
        return LabelMask.from_png_bytes(self._read_blob(content_hash))

    def get_blob_bytes(self, content_hash: str) -> bytes:
        return self._read_blob(content_hash)

    def _read_blob(self, content_hash: str) -> bytes:
        path = self._blob_path(content_hash)
        if not path.exists():
            raise PreconditionError(f"blob {content_hash} not found")
        return path.read_bytes()

    # -- documents ---------------------------------------------------------

    def save(self, doc: SessionDocument) -> None:
        payload = json.dumps(doc.to_dict(), indent=2, sort_keys=True) + "\n"
        self._atomic_write(
            self.sessions_dir / f"{doc.session_id}.json", payload.encode()
        )

    def load(self, session_id: str) -> SessionDocument:
        path = self.sessions_dir / f"{session_id}.json"
        if not path.exists():
            raise UnknownSession(session_id)
        return SessionDocument.from_dict(json.loads(path.read_text()))

    def exists(self, session_id: str) -> bool:
        return (self.sessions_dir / f"{session_id}.json").exists()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.sessions_dir.glob("*.json"))

    def _atomic_write(self, path: Path, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
