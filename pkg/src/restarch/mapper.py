"""Object mapper: element and collection handles over archive URIs.

Handles are cheap, immutable descriptions of a path; building or chaining
them never touches the network.  Collections behave like DB-API cursors:
``first()``/``fetchone()`` and ``get()``/``fetchall()`` drive a generator
that lists each hierarchy level only as consumption reaches it.  A
``where()`` clause runs the search engine once, then prunes the traversal
to matching subjects and sessions so search results turn into file URIs.
"""

from __future__ import annotations

import os
import shutil

from . import vocab
from .cache import canonical_key
from .errors import (
    Conflict,
    Forbidden,
    InvalidPath,
    NotFound,
    RestArchError,
    ValidationError,
)
from .hierarchy import (
    QueryOptions,
    ResourcePath,
    build_uri,
    has_glob,
    validate_path,
)
from .search import CriteriaSet, QuerySpec, ResultTable, parse_criteria
from .selector import extend, glob_match, parse
from .transport import Request

LISTING_OPTIONS = QueryOptions(format="csv")


def _check_write(response, what: str):
    if response.ok:
        return
    if response.status == 404:
        raise NotFound(f"{what}: not found")
    if response.status == 403:
        raise Forbidden(f"{what}: forbidden")
    if response.status == 409:
        raise Conflict(f"{what}: conflicting state")
    raise RestArchError(f"{what}: server answered {response.status}")


class _HandleBase:
    """Shared plumbing: URI building, chaining, listing reads."""

    def __init__(self, interface, path: ResourcePath, label: str | None = None):
        self._interface = interface
        self.path = path
        self._label = label

    def __repr__(self):
        return f"<{type(self).__name__} {self.path.serialize() or '/'}>"

    def __eq__(self, other):
        return type(self) is type(other) and self.path == other.path

    def __hash__(self):
        return hash((type(self).__name__, self.path))

    def uri(self, opts: QueryOptions | None = None) -> str:
        return build_uri(self._interface.base_url, self.path, opts or QueryOptions())

    def __getattr__(self, name: str):
        if name.startswith("_") or not self._interface.hierarchy.is_level(name):
            raise AttributeError(name)

        def chain_level(pattern: str | None = None):
            path = extend(self.path, name, pattern, self._interface.hierarchy)
            return make_handle(self._interface, path)

        chain_level.__name__ = name
        return chain_level

    def _list_level(self, prefix: tuple, level: str) -> list[tuple[str, str]]:
        """One collection listing: (id, label) pairs in server order."""
        path = validate_path(prefix + ((level, None),), self._interface.hierarchy)
        uri = build_uri(self._interface.base_url, path, LISTING_OPTIONS)
        result = self._interface.cache.fetch(Request("GET", uri))
        response = result.response
        if response.status == 404:
            raise NotFound(f"listing failed: {uri}")
        if not response.ok:
            raise RestArchError(f"listing {uri} answered {response.status}")
        table = ResultTable.from_csv(response.text())
        ids = table.column("ID")
        labels = table.column("label") if "label" in table.columns else ids
        return list(zip(ids, labels))


class ElementHandle(_HandleBase):
    """A single addressable entity; all operations are explicit calls."""

    @property
    def id(self) -> str:
        return self.path.final_pattern or ""

    @property
    def level(self) -> str:
        return self.path.final_level or ""

    def label(self) -> str:
        """Server-reported label, resolved through the parent listing."""
        if self._label is not None:
            return self._label
        parent = self.path.parent()
        for id_, label in self._list_level(parent.segments, self.level):
            if id_ == self.id or label == self.id:
                self._label = label
                return label
        raise NotFound(f"{self.path.serialize()} not present in its parent listing")

    def exists(self) -> bool:
        """Current server state; ignores the cache expiration window."""
        result = self._interface.cache.fetch(Request("GET", self.uri()), expiration_window=0.0)
        return result.response.status == 200

    def _require_concrete(self):
        for _, pattern in self.path.segments:
            if pattern is None or has_glob(pattern):
                raise InvalidPath(
                    f"write operations need a fully concrete path: {self.path.serialize()}"
                )

    def insert(self, **params) -> None:
        """Create this element, creating any missing ancestors first."""
        self._require_concrete()
        transport = self._interface.transport
        for upto in range(1, len(self.path.segments)):
            ancestor = ElementHandle(self._interface, ResourcePath(self.path.segments[:upto]))
            if transport.get(ancestor.uri()).status == 404:
                _check_write(transport.execute(Request("PUT", ancestor.uri())),
                             f"insert ancestor {ancestor.path.serialize()}")
        uri = self.uri()
        if params:
            pairs = "&".join(f"{k}={v}" for k, v in sorted(params.items()))
            uri = uri + "?" + pairs
        _check_write(transport.execute(Request("PUT", uri)),
                     f"insert {self.path.serialize()}")

    def delete(self) -> None:
        self._require_concrete()
        response = self._interface.transport.execute(Request("DELETE", self.uri()))
        _check_write(response, f"delete {self.path.serialize()}")
        self._interface.cache.clear(prefix=canonical_key(self.uri()))

    def get_file(self, dest: str | None = None) -> str:
        """Download this file through the cache; returns a local path.

        Without ``dest`` the path of the cached body is returned directly.
        A ``dest`` directory receives the file under its label.
        """
        if self.level != "files":
            raise ValidationError(f"get_file applies to files, not {self.level}")
        uri = self.uri()
        result = self._interface.cache.fetch(Request("GET", uri))
        if result.response.status == 404:
            raise NotFound(f"no such file: {self.path.serialize()}")
        if not result.response.ok:
            raise RestArchError(f"download failed with {result.response.status}")
        if dest is None:
            cached = self._interface.cache.body_path(uri)
            if cached:
                return cached
            raise RestArchError(f"no cached body for {uri}")
        target = os.path.join(dest, self._label or self.id) if os.path.isdir(dest) else dest
        os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
        with open(target, "wb") as fh:
            fh.write(result.response.body)
        return target

    # Appendix-style alias: file_handle.get() downloads and returns the path.
    def get(self, dest: str | None = None) -> str:
        return self.get_file(dest)

    def put_file(self, src: str) -> None:
        """Upload a local file as this element's body."""
        if self.level != "files":
            raise ValidationError(f"put_file applies to files, not {self.level}")
        self._require_concrete()
        with open(src, "rb") as fh:
            body = fh.read()
        transport = self._interface.transport
        for upto in range(1, len(self.path.segments)):
            ancestor = ElementHandle(self._interface, ResourcePath(self.path.segments[:upto]))
            if transport.get(ancestor.uri()).status == 404:
                _check_write(transport.execute(Request("PUT", ancestor.uri())),
                             f"insert ancestor {ancestor.path.serialize()}")
        _check_write(transport.execute(Request("PUT", self.uri(), body=body)),
                     f"upload {self.path.serialize()}")
        self._interface.cache.clear(prefix=canonical_key(self.uri()))


class CollectionHandle(_HandleBase):
    """Lazy cursor over the elements a collection path matches."""

    def __init__(self, interface, path: ResourcePath,
                 pending_filter: CriteriaSet | None = None):
        super().__init__(interface, path)
        self.pending_filter = pending_filter

    def __iter__(self):
        pruned = None
        if self.pending_filter is not None:
            pruned = _filter_sets(self._interface, self.pending_filter)
        yield from self._walk((), 0, pruned)

    def _walk(self, prefix: tuple, idx: int, pruned: dict | None):
        level, pattern = self.path.segments[idx]
        last = idx == len(self.path.segments) - 1
        keep = pruned.get(level) if pruned else None
        if keep is not None and not keep:
            return  # nothing can match; skip the listing entirely

        if pattern is not None and not has_glob(pattern):
            # Concrete id: address it directly, no listing required.
            if keep is not None and pattern not in keep:
                return
            candidates = [(pattern, None)]
        else:
            candidates = []
            for id_, label in self._list_level(prefix, level):
                if pattern is not None and not (
                    glob_match(pattern, id_) or glob_match(pattern, label)
                ):
                    continue
                if keep is not None and id_ not in keep and label not in keep:
                    continue
                candidates.append((id_, label))

        for id_, label in candidates:
            child = prefix + ((level, id_),)
            if last:
                yield ElementHandle(self._interface, ResourcePath(child), label=label)
            else:
                yield from self._walk(child, idx + 1, pruned)

    def first(self) -> ElementHandle | None:
        return next(iter(self), None)

    fetchone = first

    def get(self) -> list[str]:
        """All matching identifiers, in server listing order."""
        return [handle.id for handle in self]

    fetchall = get

    def where(self, criteria) -> "CollectionHandle":
        """Constrain traversal by a search; evaluation stays lazy."""
        return CollectionHandle(self._interface, self.path, parse_criteria(criteria))


def make_handle(interface, path: ResourcePath):
    if path.kind == "element":
        return ElementHandle(interface, path)
    return CollectionHandle(interface, path)


def _filter_sets(interface, criteria: CriteriaSet) -> dict[str, set[str]]:
    """Run the pending search and map filter levels to matching ids/labels."""
    constraints = list(criteria.constraints())
    levels = []
    for constraint in constraints:
        level = vocab.datatype_level(constraint.datatype)
        if level is None:
            raise ValidationError(
                f"cannot infer a filter level for datatype {constraint.datatype!r}"
            )
        levels.append(level)
    filter_level = max(levels, key=lambda lv: vocab.LEVEL_DEPTH[lv])
    primary = next(
        c.datatype for c, lv in zip(constraints, levels) if lv == filter_level
    )

    columns = [
        f"{primary}/{vocab.ID_FIELDS[filter_level]}",
        f"{primary}/LABEL",
    ]
    want_subjects = vocab.LEVEL_DEPTH[filter_level] > vocab.LEVEL_DEPTH["subjects"]
    if want_subjects:
        columns += [vocab.SUBJECT_ID_FIELD, f"{vocab.SUBJECT_DATATYPE}/LABEL"]
    rows = interface.search.run(QuerySpec(primary, tuple(columns), criteria)).as_dicts()

    sets: dict[str, set[str]] = {
        filter_level: {v for row in rows for v in (row[columns[0]], row[columns[1]]) if v}
    }
    if want_subjects:
        subject_values = {
            v for row in rows for v in (row[columns[2]], row[columns[3]]) if v
        }
        # Prune the subject level too, unless matches exist but their subject
        # ids could not be resolved (then pruning would drop real matches).
        if subject_values or not rows:
            sets["subjects"] = subject_values
    return sets


class SearchRunner:
    """The tabular form of select: a row type and columns awaiting criteria."""

    def __init__(self, interface, root_element: str, columns):
        self._interface = interface
        self.root_element = root_element
        self.columns = tuple(columns)

    def where(self, criteria, format: str = "csv") -> ResultTable:
        spec = QuerySpec(self.root_element, self.columns, parse_criteria(criteria))
        return self._interface.search.run(spec, format=format)


class Select:
    """Entry point: callable with a selector string, or chained by level."""

    def __init__(self, interface):
        self._interface = interface

    def __call__(self, target, columns=None):
        if columns is not None:
            return SearchRunner(self._interface, target, columns)
        sel = parse(target, self._interface.hierarchy)
        return make_handle(self._interface, sel.expanded)

    def __getattr__(self, name: str):
        if name.startswith("_") or not self._interface.hierarchy.is_level(name):
            raise AttributeError(name)

        def start_level(pattern: str | None = None):
            path = extend(ResourcePath(()), name, pattern, self._interface.hierarchy)
            return make_handle(self._interface, path)

        start_level.__name__ = name
        return start_level
