"""Vote and label records, orientation handling, and JSONL files.

Wire formats (one JSON object per line, UTF-8, labels as integers -1/0/1):

* votes: ``{"item_id", "order", "label", "confidence"?, "sample_index"}``
* labels: ``{"item_id", "label", "rater_id"?}``
* predictions: ``{"item_id", "label", "p_minus"?, "p_tie"?, "p_plus"?}``

Unknown fields are ignored on read.
"""

from __future__ import annotations

import json
import os
import tempfile
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .baselines import ConfidentVote
from .core import LABELS, TernaryDistribution, VoteCounts
from .errors import (DuplicateLabel, EmptyInput, InsufficientData, MissingConfidence,
                     MixedItems, ParseError)

ORDERS = ("AB", "BA")


@dataclass(frozen=True)
class VoteRecord:
    item_id: str
    order: str
    raw_label: int
    confidence: Optional[float] = None
    sample_index: int = 0

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be AB or BA, got {self.order!r}")
        if self.raw_label not in LABELS:
            raise ValueError(f"label must be -1, 0 or 1, got {self.raw_label!r}")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")


@dataclass(frozen=True)
class ItemLabel:
    item_id: str
    truth: int
    rater_id: Optional[str] = None

    def __post_init__(self):
        if self.truth not in LABELS:
            raise ValueError(f"label must be -1, 0 or 1, got {self.truth!r}")


@dataclass(frozen=True)
class Prediction:
    item_id: str
    label: int
    dist: Optional[TernaryDistribution] = None


def canonicalize(record: VoteRecord) -> int:
    """Label in the fixed (t1, t2) orientation: BA votes are sign-flipped."""
    return record.raw_label if record.order == "AB" else -record.raw_label


def tally(records: Sequence[VoteRecord]) -> VoteCounts:
    if len(records) == 0:
        raise EmptyInput("cannot tally an empty record list")
    ids = {r.item_id for r in records}
    if len(ids) > 1:
        raise MixedItems(f"records span several items: {sorted(ids)}")
    c = Counter(canonicalize(r) for r in records)
    return VoteCounts(c_plus=c[1], c_minus=c[-1], c_tie=c[0])


def confident_votes(records: Sequence[VoteRecord]) -> List[ConfidentVote]:
    missing = [r for r in records if r.confidence is None]
    if missing:
        r = missing[0]
        raise MissingConfidence(f"item {r.item_id!r} sample {r.sample_index} has no confidence")
    return [ConfidentVote(canonicalize(r), r.confidence) for r in records]


# ---------------------------------------------------------------------------
# JSONL


def _iter_json_lines(path) -> Iterator[Tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(path), lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(str(path), lineno, "expected a JSON object")
            yield lineno, obj


def _field(obj: dict, key: str, path, lineno: int, required: bool = True):
    if key not in obj:
        if required:
            raise ParseError(str(path), lineno, f"missing field {key!r}")
        return None
    return obj[key]


def _label(value, path, lineno: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value not in LABELS:
        raise ParseError(str(path), lineno, f"label must be -1, 0 or 1, got {value!r}")
    return value


def _item_id(value, path, lineno: int) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError(str(path), lineno, f"item_id must be a non-empty string, got {value!r}")
    return value


def read_votes(path) -> Dict[str, List[VoteRecord]]:
    """Records grouped by item; items and records keep file order."""
    grouped: Dict[str, List[VoteRecord]] = {}
    for lineno, obj in _iter_json_lines(path):
        item_id = _item_id(_field(obj, "item_id", path, lineno), path, lineno)
        order = _field(obj, "order", path, lineno)
        if order not in ORDERS:
            raise ParseError(str(path), lineno, f"order must be AB or BA, got {order!r}")
        label = _label(_field(obj, "label", path, lineno), path, lineno)
        conf = _field(obj, "confidence", path, lineno, required=False)
        if conf is not None:
            if isinstance(conf, bool) or not isinstance(conf, (int, float)) or not 0 <= conf <= 1:
                raise ParseError(str(path), lineno, f"confidence must be in [0, 1], got {conf!r}")
            conf = float(conf)
        idx = _field(obj, "sample_index", path, lineno)
        if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
            raise ParseError(str(path), lineno, f"sample_index must be a non-negative integer, got {idx!r}")
        grouped.setdefault(item_id, []).append(VoteRecord(item_id, order, label, conf, idx))
    return grouped


def read_labels(path) -> List[ItemLabel]:
    labels: List[ItemLabel] = []
    seen = set()
    for lineno, obj in _iter_json_lines(path):
        item_id = _item_id(_field(obj, "item_id", path, lineno), path, lineno)
        label = _label(_field(obj, "label", path, lineno), path, lineno)
        rater = _field(obj, "rater_id", path, lineno, required=False)
        if rater is not None:
            rater = str(rater)
        key = (item_id, rater)
        if key in seen:
            who = f"rater {rater!r}" if rater is not None else "an unnamed rater"
            raise DuplicateLabel(f"{path}:{lineno}: second label for item {item_id!r} from {who}")
        seen.add(key)
        labels.append(ItemLabel(item_id, label, rater))
    return labels


def read_predictions(path) -> List[Prediction]:
    preds = []
    for lineno, obj in _iter_json_lines(path):
        item_id = _item_id(_field(obj, "item_id", path, lineno), path, lineno)
        label = _label(_field(obj, "label", path, lineno), path, lineno)
        dist = None
        if all(k in obj for k in ("p_minus", "p_tie", "p_plus")):
            try:
                dist = TernaryDistribution(obj["p_minus"], obj["p_tie"], obj["p_plus"])
            except (TypeError, ValueError) as exc:
                raise ParseError(str(path), lineno, str(exc)) from None
        preds.append(Prediction(item_id, label, dist))
    return preds


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)


def write_votes(path, records: Iterable[VoteRecord]) -> None:
    rows = []
    for r in records:
        row = {"item_id": r.item_id, "order": r.order, "label": r.raw_label}
        if r.confidence is not None:
            row["confidence"] = r.confidence
        row["sample_index"] = r.sample_index
        rows.append(row)
    atomic_write_text(path, _jsonl(rows))


def write_labels(path, labels: Iterable[ItemLabel]) -> None:
    rows = []
    for lab in labels:
        row = {"item_id": lab.item_id, "label": lab.truth}
        if lab.rater_id is not None:
            row["rater_id"] = lab.rater_id
        rows.append(row)
    atomic_write_text(path, _jsonl(rows))


def write_predictions(path, preds: Iterable[Prediction]) -> None:
    rows = []
    for p in preds:
        row = {"item_id": p.item_id, "label": int(p.label)}
        if p.dist is not None:
            row.update(p_minus=p.dist.p_minus, p_tie=p.dist.p_tie, p_plus=p.dist.p_plus)
        rows.append(row)
    atomic_write_text(path, _jsonl(rows))


# ---------------------------------------------------------------------------
# datasets


def gold_labels(labels: Sequence[ItemLabel]) -> Dict[str, int]:
    """One gold label per item; several raters are merged by majority vote (ties -> 0)."""
    by_item: Dict[str, List[int]] = {}
    for lab in labels:
        by_item.setdefault(lab.item_id, []).append(lab.truth)
    gold = {}
    for item_id, values in by_item.items():
        c = Counter(values)
        scores = [c[lab] for lab in LABELS]
        top = max(scores)
        gold[item_id] = LABELS[scores.index(top)] if scores.count(top) == 1 else 0
    return gold


@dataclass(frozen=True)
class Dataset:
    """Items ready for evaluation.

    ``counts`` is ``(N, 3)`` in ``(minus, tie, plus)`` order and ``truth`` is
    ``(N,)``. ``votes`` holds each item's canonical ``(label, confidence)``
    sequence in file order, where confidence may be None.
    """

    item_ids: Tuple[str, ...]
    counts: np.ndarray
    truth: np.ndarray
    votes: Optional[Tuple[Tuple[Tuple[int, Optional[float]], ...], ...]] = None

    def __len__(self) -> int:
        return len(self.item_ids)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        votes = None if self.votes is None else tuple(self.votes[i] for i in idx)
        return Dataset(tuple(self.item_ids[i] for i in idx), self.counts[idx], self.truth[idx], votes)

    def confident_votes(self, i: int) -> List[ConfidentVote]:
        if self.votes is None:
            raise MissingConfidence("dataset carries no per-vote records")
        out = []
        for label, conf in self.votes[i]:
            if conf is None:
                raise MissingConfidence(f"item {self.item_ids[i]!r} has a vote without confidence")
            out.append(ConfidentVote(label, conf))
        return out


def dataset_from_counts(counts, truth, item_ids: Optional[Sequence[str]] = None) -> Dataset:
    counts = np.asarray(counts, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[1] != 3 or len(truth) != len(counts):
        raise ValueError("counts must be (N, 3) and truth (N,)")
    if item_ids is None:
        item_ids = [f"item-{i}" for i in range(len(counts))]
    return Dataset(tuple(item_ids), counts, truth)


def build_dataset(votes: Mapping[str, Sequence[VoteRecord]],
                  gold: Optional[Mapping[str, int]] = None) -> Dataset:
    """Join grouped votes with gold labels, in vote-file item order.

    Every voted item must have a label. Labeled items without votes are
    ignored. With ``gold=None`` all truths are set to 0 (prediction only).
    """
    if not votes:
        raise EmptyInput("no votes")
    ids, counts, truth, per_item = [], [], [], []
    for item_id, records in votes.items():
        if gold is not None and item_id not in gold:
            raise InsufficientData(f"item {item_id!r} has votes but no label")
        c = tally(records)
        ids.append(item_id)
        counts.append(c.as_array())
        truth.append(0 if gold is None else gold[item_id])
        per_item.append(tuple((canonicalize(r), r.confidence) for r in records))
    return Dataset(tuple(ids), np.array(counts, dtype=np.int64),
                   np.array(truth, dtype=np.int64), tuple(per_item))
