"""Resource hierarchy model and canonical URI construction.

The archive exposes a fixed tree of keyword levels (projects, subjects,
experiments, ...).  This module is the static configuration that models
that tree: which level may appear under which, how a path serializes, and
how query options become a URI query string.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence
from urllib.parse import quote

from .errors import InvalidPath, ValidationError
from . import vocab

GLOB_CHAR = "*"


def has_glob(pattern: str) -> bool:
    return GLOB_CHAR in pattern


class Hierarchy:
    """The parent-child relation between hierarchy levels.

    The relation is a DAG; its roots are the levels that never appear as a
    child (``projects`` in the default configuration).  Instances are
    immutable and safe to share between threads.
    """

    def __init__(self, children: dict[str, Iterable[str]]):
        self._children = {name: tuple(kids) for name, kids in children.items()}
        for name, kids in self._children.items():
            for kid in kids:
                if kid not in self._children:
                    raise ValidationError(f"hierarchy child {kid!r} of {name!r} is not a level")
        as_child = {kid for kids in self._children.values() for kid in kids}
        self._roots = tuple(name for name in self._children if name not in as_child)
        if not self._roots:
            raise ValidationError("hierarchy has no root level")

    @classmethod
    def default(cls) -> "Hierarchy":
        return cls(vocab.DEFAULT_CHILDREN)

    @classmethod
    def from_file(cls, path) -> "Hierarchy":
        """Load a level -> children mapping from a JSON config file."""
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    @property
    def levels(self) -> tuple[str, ...]:
        return tuple(self._children)

    @property
    def roots(self) -> tuple[str, ...]:
        return self._roots

    def children(self, level: str) -> tuple[str, ...]:
        try:
            return self._children[level]
        except KeyError:
            raise InvalidPath(f"unknown hierarchy level {level!r}") from None

    def is_level(self, token: str) -> bool:
        return token in self._children or token in vocab.SINGULAR

    def normalize(self, token: str) -> str:
        """Map singular keyword spellings to the canonical plural form."""
        name = vocab.SINGULAR.get(token, token)
        if name not in self._children:
            raise InvalidPath(f"unknown hierarchy level {token!r}")
        return name

    def shortest_chains(self, start: str | None, target: str) -> list[list[str]]:
        """All shortest level chains from ``start`` down to ``target``.

        ``start=None`` searches from the hierarchy roots; the returned
        chains then include the root level itself.  Chains from a concrete
        start level exclude the start.
        """
        target = self.normalize(target)
        frontier = [[root] for root in self._roots] if start is None else [
            [kid] for kid in self.children(self.normalize(start))
        ]
        seen: set[str] = set()
        while frontier:
            hits = [chain for chain in frontier if chain[-1] == target]
            if hits:
                return hits
            seen.update(chain[-1] for chain in frontier)
            frontier = [
                chain + [kid]
                for chain in frontier
                for kid in self.children(chain[-1])
                if kid not in seen
            ]
        return []


DEFAULT_HIERARCHY = Hierarchy.default()


@dataclass(frozen=True)
class ResourcePath:
    """A validated alternating sequence of levels and id patterns.

    ``segments`` is a tuple of ``(level, pattern)`` pairs where only the
    final pattern may be ``None``.  ``kind`` is ``element`` when the final
    segment carries a glob-free pattern, ``collection`` otherwise.
    """

    segments: tuple[tuple[str, str | None], ...]

    @property
    def kind(self) -> str:
        if not self.segments:
            return "collection"
        pattern = self.segments[-1][1]
        if pattern is None or has_glob(pattern):
            return "collection"
        return "element"

    @property
    def is_empty(self) -> bool:
        return not self.segments

    @property
    def final_level(self) -> str | None:
        return self.segments[-1][0] if self.segments else None

    @property
    def final_pattern(self) -> str | None:
        return self.segments[-1][1] if self.segments else None

    def serialize(self) -> str:
        parts = []
        for level, pattern in self.segments:
            parts.append(level)
            if pattern is not None:
                parts.append(pattern)
        return "".join("/" + p for p in parts)

    def __str__(self) -> str:
        return self.serialize()

    def parent(self) -> "ResourcePath":
        return ResourcePath(self.segments[:-1])

    def replace_final_pattern(self, pattern: str | None) -> "ResourcePath":
        level = self.segments[-1][0]
        return ResourcePath(self.segments[:-1] + ((level, pattern),))


def validate_path(
    segments: Sequence[tuple[str, str | None] | str],
    hierarchy: Hierarchy = DEFAULT_HIERARCHY,
) -> ResourcePath:
    """Classify and validate a segment sequence against the hierarchy.

    Accepts ``(level, pattern)`` pairs or bare level names (pattern
    ``None``).  Raises :class:`InvalidPath` naming the offending pair when
    a level is not an allowed child of its predecessor, when the root level
    is wrong, or when a non-final segment omits its pattern.
    """
    normalized: list[tuple[str, str | None]] = []
    for seg in segments:
        if isinstance(seg, str):
            level, pattern = seg, None
        else:
            level, pattern = seg
        level = hierarchy.normalize(level)
        if pattern is not None and pattern == "":
            raise InvalidPath(f"empty id pattern for level {level!r}")
        normalized.append((level, pattern))

    for i, (level, pattern) in enumerate(normalized):
        if i == 0:
            if level not in hierarchy.roots:
                raise InvalidPath(f"{level!r} cannot start a path; paths are rooted at "
                                  + "/".join(hierarchy.roots))
        else:
            parent_level, parent_pattern = normalized[i - 1]
            if parent_pattern is None:
                raise InvalidPath(
                    f"level {parent_level!r} needs an id before child {level!r}"
                )
            if level not in hierarchy.children(parent_level):
                raise InvalidPath(f"{level!r} is not a child of {parent_level!r}")

    return ResourcePath(tuple(normalized))


def parse_path(raw: str, hierarchy: Hierarchy = DEFAULT_HIERARCHY) -> ResourcePath:
    """Parse an absolute ``/level/pattern/...`` string into a ResourcePath.

    Level keywords are reserved: a token in pattern position that names a
    level starts a new segment, so ids equal to level keywords cannot be
    addressed through path strings.
    """
    if raw in ("", "/"):
        return ResourcePath(())
    if not raw.startswith("/"):
        raise InvalidPath(f"path must be absolute: {raw!r}")
    tokens = [t for t in raw.split("/") if t != ""]
    segments: list[tuple[str, str | None]] = []
    i = 0
    while i < len(tokens):
        level = tokens[i]
        if not hierarchy.is_level(level):
            raise InvalidPath(f"expected a level keyword, got {level!r} in {raw!r}")
        pattern = None
        if i + 1 < len(tokens) and not hierarchy.is_level(tokens[i + 1]):
            pattern = tokens[i + 1]
            i += 1
        segments.append((level, pattern))
        i += 1
    return validate_path(segments, hierarchy)


@dataclass(frozen=True)
class QueryOptions:
    """Query-string options understood by the archive.

    ``format`` left as ``None`` means the server default (csv) and is
    omitted from the query string.
    """

    columns: tuple[str, ...] | None = None
    xsi_type_filter: str | None = None
    format: str | None = None

    def __post_init__(self):
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(self.columns))
        if self.format is not None and self.format not in vocab.FORMATS:
            raise ValidationError(f"format must be one of {vocab.FORMATS}, got {self.format!r}")

    def query_string(self) -> str:
        # Fixed key order keeps build_uri byte-deterministic.
        pairs = []
        if self.columns is not None:
            pairs.append((vocab.QUERY_COLUMNS, ",".join(self.columns)))
        if self.xsi_type_filter is not None:
            pairs.append((vocab.QUERY_XSI_TYPE, self.xsi_type_filter))
        if self.format is not None:
            pairs.append((vocab.QUERY_FORMAT, self.format))
        if not pairs:
            return ""
        return "?" + "&".join(f"{k}={quote(v, safe=',:')}" for k, v in pairs)


NO_OPTIONS = QueryOptions()


def normalize_base(base: str) -> str:
    if not (base.startswith("http://") or base.startswith("https://")):
        raise ValidationError(f"base URL must be http(s): {base!r}")
    return base[:-1] if base.endswith("/") else base


def build_uri(base: str, path: ResourcePath, opts: QueryOptions = NO_OPTIONS) -> str:
    """Absolute URI for a resource path: ``<base>/REST<path><query>``.

    Deterministic: identical inputs yield identical bytes.
    """
    return normalize_base(base) + vocab.REST_PREFIX + path.serialize() + opts.query_string()
