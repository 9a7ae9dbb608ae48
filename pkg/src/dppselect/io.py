"""Line-delimited ingestion and deterministic serialization.

Embeddings, labels, and selections travel as JSON lines; models and fusion
weights use one versioned JSON format whose floats are written with the
shortest representation that reads back bit for bit. All writers emit
records in input order so equal runs produce equal bytes.
"""

from __future__ import annotations

import json
from typing import Optional, Sequence

import numpy as np

from .errors import IngestError, InvalidInput
from .records import ArticleRecord, DppLabels, ImageRecord, unit_normalize

ARRAY_FORMAT = "dppselect-arrays"
ARRAY_VERSION = 1


def _require(obj: dict, key: str, line_no: int):
    if key not in obj:
        raise IngestError(line_no, f"missing field {key!r}")
    return obj[key]


def _as_vector(value, line_no: int, what: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise IngestError(line_no, f"{what} must be a nonempty list of numbers")
    return np.asarray(value, dtype=np.float64)


def ingest(path: str, pool_cap: int = 5) -> list:
    """Read article records from a JSON-lines embedding file.

    Every embedding is renormalized to unit length, the candidate pool is
    truncated to the first ``pool_cap`` images in file order, and any
    malformed line raises :class:`IngestError` carrying its 1-based line
    number. Blank lines are skipped.
    """
    if pool_cap < 1:
        raise InvalidInput("pool_cap must be a positive integer")
    articles = []
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(line_no, f"invalid JSON ({exc.msg})")
            if not isinstance(obj, dict):
                raise IngestError(line_no, "expected a JSON object")
            art_id = _require(obj, "id", line_no)
            if not isinstance(art_id, str) or not art_id:
                raise IngestError(line_no, "id must be a nonempty string")
            if art_id in seen_ids:
                raise IngestError(line_no, f"duplicate article id {art_id!r}")
            seen_ids.add(art_id)
            text = _as_vector(_require(obj, "text_embedding", line_no), line_no,
                              "text_embedding")
            raw_images = _require(obj, "images", line_no)
            if not isinstance(raw_images, list) or not raw_images:
                raise IngestError(line_no, "images must be a nonempty list")
            images = []
            for k, img in enumerate(raw_images[:pool_cap]):
                if not isinstance(img, dict):
                    raise IngestError(line_no, f"image {k} must be an object")
                img_id = _require(img, "id", line_no)
                emb = _as_vector(_require(img, "embedding", line_no), line_no,
                                 f"image {img_id} embedding")
                if emb.size != text.size:
                    raise IngestError(
                        line_no,
                        f"image {img_id} has dimension {emb.size}, text has {text.size}",
                    )
                gold = img.get("gold")
                if gold is not None and not isinstance(gold, bool):
                    raise IngestError(line_no, f"image {img_id} gold flag must be boolean")
                try:
                    emb = unit_normalize(emb)
                except InvalidInput as exc:
                    raise IngestError(line_no, f"image {img_id}: {exc}")
                images.append(ImageRecord(id=str(img_id), embedding=emb, gold=gold))
            try:
                text = unit_normalize(text)
                articles.append(ArticleRecord(id=art_id, text_embedding=text,
                                              images=tuple(images)))
            except InvalidInput as exc:
                raise IngestError(line_no, str(exc))
    return articles


def _jsonline(obj: dict) -> str:
    # json writes floats with repr, the shortest form that round-trips
    # exactly, so equal values always serialize to equal bytes.
    return json.dumps(obj, ensure_ascii=True) + "\n"


def write_labels(path: str, rows: Sequence[dict]) -> None:
    """Write label rows ({id, t_star, pi} or {id, error}) as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(_jsonline(row))


def read_labels(path: str) -> list:
    """Read (article_id, DppLabels) pairs from a label file.

    Rows carrying an ``error`` field (from articles the teacher could not
    label) are skipped. Malformed rows raise :class:`IngestError`.
    """
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(line_no, f"invalid JSON ({exc.msg})")
            if not isinstance(obj, dict):
                raise IngestError(line_no, "expected a JSON object")
            art_id = _require(obj, "id", line_no)
            if "error" in obj:
                continue
            t_star = _require(obj, "t_star", line_no)
            pi = _as_vector(_require(obj, "pi", line_no), line_no, "pi")
            if not isinstance(t_star, (int, float)) or isinstance(t_star, bool):
                raise IngestError(line_no, "t_star must be a number")
            try:
                labels = DppLabels(t_star=float(t_star), pi=pi)
            except InvalidInput as exc:
                raise IngestError(line_no, str(exc))
            out.append((str(art_id), labels))
    return out


def write_selections(path: str, rows: Sequence[dict]) -> None:
    """Write selection rows {id, rule, image_ids, probabilities}."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(_jsonline(row))


def read_selections(path: str) -> list:
    """Read selection rows back as dictionaries, preserving order."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(line_no, f"invalid JSON ({exc.msg})")
            for key in ("id", "rule", "image_ids", "probabilities"):
                _require(obj, key, line_no)
            if not isinstance(obj["image_ids"], list):
                raise IngestError(line_no, "image_ids must be a list")
            out.append(obj)
    return out


def save_arrays(path: str, kind: str, meta: dict, arrays: Sequence) -> None:
    """Write named float64 arrays plus metadata as versioned JSON.

    ``arrays`` holds (name, ndarray) pairs; data is flattened row-major.
    """
    payload = {
        "format": ARRAY_FORMAT,
        "version": ARRAY_VERSION,
        "kind": kind,
        "meta": meta,
        "arrays": [
            {
                "name": name,
                "shape": list(np.asarray(arr).shape),
                "data": [float(x) for x in np.asarray(arr, dtype=np.float64).ravel()],
            }
            for name, arr in arrays
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_arrays(path: str, kind: str):
    """Read (meta, {name: ndarray}) written by :func:`save_arrays`.

    The format marker, version, and kind must all match exactly.
    """
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != ARRAY_FORMAT:
        raise InvalidInput(f"{path} is not a {ARRAY_FORMAT} file")
    if payload.get("version") != ARRAY_VERSION:
        raise InvalidInput(f"unsupported version {payload.get('version')!r}")
    if payload.get("kind") != kind:
        raise InvalidInput(f"expected kind {kind!r}, found {payload.get('kind')!r}")
    arrays = {}
    for entry in payload["arrays"]:
        arrays[entry["name"]] = np.asarray(
            entry["data"], dtype=np.float64
        ).reshape(entry["shape"])
    return payload["meta"], arrays
