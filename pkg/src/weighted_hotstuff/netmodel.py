"""Network topology: latency matrices, random topologies and per-message latency sampling.

A :class:`LatencyMatrix` stores one-way link latencies in milliseconds, with
``entries[sender, leader]`` the time for a message from ``sender`` to reach
``leader``. Message payload is modelled as a uniform offset added on top of
the link latency; new-view messages carry the block proposal and draw from a
wider range than the hash-only vote messages.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import InvalidParameter, IoFailure, MalformedInput

MIN_REPLICAS = 4
DIAGONAL_TOLERANCE = 1e-9

FIXTURE_CLOUDPING_5 = "cloudping-5.csv"


class MessageKind(enum.Enum):
    """Vote messages the leader waits on, one per quorum event of a view."""

    NEW_VIEW = "new-view"
    PREPARE = "prepare"
    PRECOMMIT = "pre-commit"
    COMMIT = "commit"

    @property
    def max_offset(self) -> float:
        return 5.0 if self is MessageKind.NEW_VIEW else 2.0


# Order in which a basic view consumes them.
PHASES: tuple[MessageKind, ...] = (
    MessageKind.NEW_VIEW,
    MessageKind.PREPARE,
    MessageKind.PRECOMMIT,
    MessageKind.COMMIT,
)


def make_rng(seed: int) -> np.random.Generator:
    """Return the seeded generator used for every stochastic operation."""
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class LatencyMatrix:
    entries: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float, copy=True)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise MalformedInput(f"latency matrix must be square, got shape {entries.shape}")
        n = entries.shape[0]
        if n < MIN_REPLICAS:
            raise MalformedInput(f"need at least {MIN_REPLICAS} replicas, got {n}")
        if not np.all(np.isfinite(entries)):
            raise MalformedInput("latency entries must be finite")
        if np.any(entries < 0):
            raise MalformedInput("latency entries must be non-negative")
        diag = np.diag(entries)
        if np.any(np.abs(diag) > DIAGONAL_TOLERANCE):
            raise MalformedInput("latency matrix diagonal must be zero")
        np.fill_diagonal(entries, 0.0)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.labels is not None:
            labels = tuple(str(label) for label in self.labels)
            if len(labels) != n:
                raise MalformedInput(f"expected {n} labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LatencyMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.labels, self.entries.tobytes()))

    def connectivity(self) -> np.ndarray:
        """Total distance from each replica to all others (row sums)."""
        return self.entries.sum(axis=1)


def _parse_cell(cell: str, row: int, col: int, diagonal: bool) -> float:
    text = cell.strip()
    if text == "":
        if diagonal:
            return 0.0
        raise MalformedInput(f"empty cell at row {row}, column {col}")
    try:
        return float(text)
    except ValueError:
        raise MalformedInput(f"non-numeric cell {text!r} at row {row}, column {col}") from None


def _read_csv(text: str) -> LatencyMatrix:
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise MalformedInput("empty CSV input")
    header, body = rows[0], rows[1:]
    n = len(body)
    if len(header) == n + 1:
        header = header[1:]
    if len(header) != n:
        raise MalformedInput(f"header has {len(header)} labels but there are {n} rows")
    labels = [h.strip() for h in header]
    values = []
    for i, row in enumerate(body):
        if len(row) != n + 1:
            raise MalformedInput(f"row {i} has {len(row) - 1} cells, expected {n}")
        if row[0].strip() != labels[i]:
            raise MalformedInput(f"row {i} label {row[0]!r} does not match header {labels[i]!r}")
        values.append([_parse_cell(c, i, j, i == j) for j, c in enumerate(row[1:])])
    return LatencyMatrix(np.array(values, dtype=float).reshape(n, n), tuple(labels))


def _read_json(text: str) -> LatencyMatrix:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "matrix" not in doc:
        raise MalformedInput('JSON matrix must be an object with a "matrix" field')
    matrix = doc["matrix"]
    labels = doc.get("labels")
    if not isinstance(matrix, list) or not all(isinstance(r, list) for r in matrix):
        raise MalformedInput('"matrix" must be an array of arrays')
    n = len(matrix)
    values = []
    for i, row in enumerate(matrix):
        if len(row) != n:
            raise MalformedInput(f"row {i} has {len(row)} cells, expected {n}")
        cells = []
        for j, cell in enumerate(row):
            if cell is None and i == j:
                cells.append(0.0)
            elif isinstance(cell, (int, float)) and not isinstance(cell, bool):
                cells.append(float(cell))
            else:
                raise MalformedInput(f"non-numeric cell {cell!r} at row {i}, column {j}")
        values.append(cells)
    if labels is not None and (
        not isinstance(labels, list) or not all(isinstance(x, str) for x in labels)
    ):
        raise MalformedInput('"labels" must be an array of strings')
    return LatencyMatrix(np.array(values, dtype=float).reshape(n, n),
                         None if labels is None else tuple(labels))


def load_latency_matrix(source: IO[bytes] | IO[str] | bytes | str | Path,
                        format: str | None = None) -> LatencyMatrix:
    """Parse a latency matrix from a stream, raw bytes, or a file path.

    ``format`` is ``"csv"`` or ``"json"``; for paths it defaults to the file
    suffix.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        format = format or path.suffix.lstrip(".").lower()
        try:
            data: bytes | str = path.read_bytes()
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    if format == "csv":
        return _read_csv(text)
    if format == "json":
        return _read_json(text)
    raise MalformedInput(f"unsupported matrix format {format!r}")


def save_latency_matrix(matrix: LatencyMatrix, destination: IO[str] | str | Path,
                        format: str | None = None) -> None:
    """Write ``matrix`` so that :func:`load_latency_matrix` reads it back exactly."""
    if isinstance(destination, (str, Path)):
        path = Path(destination)
        with path.open("w", newline="", encoding="utf-8") as fh:
            save_latency_matrix(matrix, fh, format or path.suffix.lstrip(".").lower())
        return
    labels = list(matrix.labels or (f"r{i}" for i in range(matrix.n)))
    rows = [[float(x) for x in row] for row in matrix.entries]
    if format == "json":
        json.dump({"labels": labels, "matrix": rows}, destination)
    elif format == "csv":
        writer = csv.writer(destination, lineterminator="\n")
        writer.writerow(["", *labels])
        for label, row in zip(labels, rows):
            writer.writerow([label, *(repr(x) for x in row)])
    else:
        raise MalformedInput(f"unsupported matrix format {format!r}")


def load_fixture(name: str = FIXTURE_CLOUDPING_5) -> LatencyMatrix:
    """Load a latency matrix bundled with the package."""
    data = resources.files(__package__).joinpath("fixtures").joinpath(name).read_bytes()
    return load_latency_matrix(data, Path(name).suffix.lstrip("."))


def generate_random_topology(n: int, max_latency: float,
                             rng: np.random.Generator) -> LatencyMatrix:
    """Draw every off-diagonal link latency independently from U(0, max_latency)."""
    if n < MIN_REPLICAS:
        raise InvalidParameter(f"n must be at least {MIN_REPLICAS}, got {n}")
    if not max_latency > 0:
        raise InvalidParameter(f"max_latency must be positive, got {max_latency}")
    entries = rng.uniform(0.0, max_latency, size=(n, n))
    np.fill_diagonal(entries, 0.0)
    return LatencyMatrix(entries)


def sample_message_latency(matrix: LatencyMatrix, leader: int, sender: int, kind: MessageKind,
                           rng: np.random.Generator, static: bool = False) -> float:
    """Arrival time at ``leader`` of one ``kind`` message sent by ``sender``."""
    n = matrix.n
    if not (0 <= leader < n and 0 <= sender < n):
        raise IndexError(f"replica index out of range for n={n}")
    if sender == leader:
        return 0.0
    link = float(matrix.entries[sender, leader])
    if static:
        return link
    return link + float(rng.uniform(0.0, kind.max_offset))


def sample_latency_vector(matrix: LatencyMatrix, leader: int, kind: MessageKind,
                          rng: np.random.Generator, static: bool = False) -> np.ndarray:
    """Arrival times at ``leader`` of one ``kind`` message from every replica.

    Draws one offset per sender in index order, so it consumes the generator
    exactly like ``n`` calls to :func:`sample_message_latency` minus the
    leader's own slot.
    """
    latencies = matrix.entries[:, leader].copy()
    if not static:
        offsets = rng.uniform(0.0, kind.max_offset, size=matrix.n - 1)
        latencies[np.arange(matrix.n) != leader] += offsets
    latencies[leader] = 0.0
    return latencies


def as_matrix(entries: Sequence[Sequence[float]] | np.ndarray,
              labels: Sequence[str] | None = None) -> LatencyMatrix:
    return LatencyMatrix(np.asarray(entries, dtype=float), None if labels is None else tuple(labels))
