"""Search engine client: criteria trees, XML query documents, result tables.

Queries are expressed as nested lists of ``(schema_field, operator,
value)`` tuples terminated by a combinator, compiled into an XML document,
POSTed to the search endpoint, and parsed back from CSV (the default) or
JSON.  Saved searches and reusable templates ride the same document
format through server-side storage.
"""

from __future__ import annotations

import csv
import io
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from . import vocab
from .errors import (
    CriteriaError,
    MissingBinding,
    NotFound,
    ParseError,
    SearchError,
    ValidationError,
)
from .hierarchy import normalize_base
from .transport import Request


@dataclass(frozen=True)
class Constraint:
    """A single comparison: ``datatype/FIELD <op> value``."""

    schema_field: str
    op: str
    value: str

    def __post_init__(self):
        if self.schema_field.count("/") != 1:
            raise CriteriaError(
                f"schema field must be 'datatype/FIELD', got {self.schema_field!r}"
            )
        if self.op not in vocab.OPERATORS:
            raise CriteriaError(f"unknown operator {self.op!r}")
        object.__setattr__(self, "value", str(self.value))

    @property
    def datatype(self) -> str:
        return self.schema_field.split("/", 1)[0]

    @property
    def field(self) -> str:
        return self.schema_field.split("/", 1)[1]


@dataclass(frozen=True)
class CriteriaSet:
    """Boolean tree of constraints combined with AND or OR."""

    method: str
    items: tuple

    def __post_init__(self):
        if self.method not in vocab.COMBINATORS:
            raise CriteriaError(f"combinator must be AND or OR, got {self.method!r}")
        if not self.items:
            raise CriteriaError("criteria set cannot be empty")
        for item in self.items:
            if not isinstance(item, (Constraint, CriteriaSet)):
                raise CriteriaError(f"criteria item has wrong type: {item!r}")
        object.__setattr__(self, "items", tuple(self.items))

    def constraints(self):
        """All leaf constraints, depth-first."""
        for item in self.items:
            if isinstance(item, Constraint):
                yield item
            else:
                yield from item.constraints()

    def map_values(self, fn) -> "CriteriaSet":
        """A copy with every leaf value passed through ``fn``."""
        items = []
        for item in self.items:
            if isinstance(item, Constraint):
                items.append(Constraint(item.schema_field, item.op, fn(item.value)))
            else:
                items.append(item.map_values(fn))
        return CriteriaSet(self.method, tuple(items))


def parse_criteria(node) -> CriteriaSet:
    """Build a CriteriaSet from the nested-list form.

    The list's last element names the combinator; every other element is a
    3-tuple constraint or a nested list.  A CriteriaSet passes through.
    """
    if isinstance(node, CriteriaSet):
        return node
    if not isinstance(node, (list, tuple)):
        raise CriteriaError(f"criteria must be a list, got {type(node).__name__}")
    if len(node) < 2:
        raise CriteriaError("criteria list needs at least one constraint and a combinator")
    *items, combinator = node
    if not isinstance(combinator, str) or combinator.upper() not in vocab.COMBINATORS:
        raise CriteriaError(f"criteria list must end with 'AND' or 'OR', got {combinator!r}")
    parsed = []
    for item in items:
        if isinstance(item, (list, tuple)) and len(item) == 3 and all(
            isinstance(part, str) for part in item
        ):
            parsed.append(Constraint(*item))
        elif isinstance(item, (list, tuple)):
            parsed.append(parse_criteria(item))
        else:
            raise CriteriaError(f"criteria item must be a 3-tuple or nested list: {item!r}")
    return CriteriaSet(combinator.upper(), tuple(parsed))


def criteria_to_lists(criteria: CriteriaSet) -> list:
    """Inverse of parse_criteria, useful for JSON round trips."""
    out: list = []
    for item in criteria.items:
        if isinstance(item, Constraint):
            out.append([item.schema_field, item.op, item.value])
        else:
            out.append(criteria_to_lists(item))
    out.append(criteria.method)
    return out


@dataclass(frozen=True)
class QuerySpec:
    """A complete search: row datatype, column fields, criteria tree."""

    root_element: str
    columns: tuple[str, ...]
    criteria: CriteriaSet

    def __post_init__(self):
        if not self.columns:
            raise ValidationError("a query needs at least one column")
        object.__setattr__(self, "columns", tuple(self.columns))
        for column in self.columns:
            if column.count("/") != 1:
                raise ValidationError(f"column must be 'datatype/FIELD', got {column!r}")


# -- XML document ------------------------------------------------------------

def _criteria_element(tag: str, node: CriteriaSet) -> ET.Element:
    elem = ET.Element(tag, {vocab.XML_METHOD_ATTR: node.method})
    for item in node.items:
        if isinstance(item, Constraint):
            cons = ET.SubElement(elem, vocab.XML_CONSTRAINT)
            ET.SubElement(cons, vocab.XML_SCHEMA_FIELD).text = item.schema_field
            ET.SubElement(cons, vocab.XML_COMPARISON).text = item.op
            ET.SubElement(cons, vocab.XML_VALUE).text = item.value
        else:
            elem.append(_criteria_element(vocab.XML_CHILD_SET, item))
    return elem


def to_xml(spec: QuerySpec) -> bytes:
    """Serialize a QuerySpec to the XML wire document, byte-deterministic."""
    root = ET.Element(vocab.XML_DOCUMENT_ROOT)
    ET.SubElement(root, vocab.XML_ROOT_ELEMENT).text = spec.root_element
    for column in spec.columns:
        ET.SubElement(root, vocab.XML_SEARCH_FIELD).text = column
    root.append(_criteria_element(vocab.XML_CRITERIA_SET, spec.criteria))
    return ET.tostring(root, encoding="UTF-8", xml_declaration=True)


def _parse_criteria_element(elem: ET.Element) -> CriteriaSet:
    method = elem.get(vocab.XML_METHOD_ATTR, "")
    items = []
    for child in elem:
        if child.tag == vocab.XML_CONSTRAINT:
            items.append(Constraint(
                (child.findtext(vocab.XML_SCHEMA_FIELD) or "").strip(),
                (child.findtext(vocab.XML_COMPARISON) or "").strip(),
                child.findtext(vocab.XML_VALUE) or "",
            ))
        elif child.tag == vocab.XML_CHILD_SET:
            items.append(_parse_criteria_element(child))
        else:
            raise ParseError(f"unexpected element {child.tag!r} in criteria set")
    try:
        return CriteriaSet(method, tuple(items))
    except CriteriaError as exc:
        raise ParseError(f"bad criteria document: {exc}") from exc


def parse_xml(data: bytes) -> QuerySpec:
    """Parse an XML query document back into a QuerySpec."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ParseError(f"malformed search document: {exc}") from exc
    if root.tag != vocab.XML_DOCUMENT_ROOT:
        raise ParseError(f"unexpected document root {root.tag!r}")
    row = (root.findtext(vocab.XML_ROOT_ELEMENT) or "").strip()
    columns = tuple(
        (elem.text or "").strip() for elem in root.findall(vocab.XML_SEARCH_FIELD)
    )
    criteria_elem = root.find(vocab.XML_CRITERIA_SET)
    if not row or criteria_elem is None:
        raise ParseError("search document is missing its row type or criteria")
    return QuerySpec(row, columns, _parse_criteria_element(criteria_elem))


# -- result tables -----------------------------------------------------------

@dataclass
class ResultTable:
    """Rectangular tabular payload with uniquely named columns."""

    columns: list[str]
    rows: list[tuple[str, ...]]

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ParseError(f"duplicate column names: {self.columns}")
        width = len(self.columns)
        for row in self.rows:
            if len(row) != width:
                raise ParseError(
                    f"row width {len(row)} does not match {width} columns: {row!r}"
                )

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def column(self, name: str) -> list[str]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def as_dicts(self) -> list[dict[str, str]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def select_columns(self, order: list[str] | tuple[str, ...]) -> "ResultTable":
        indexes = []
        for name in order:
            if name not in self.columns:
                raise ParseError(f"result is missing column {name!r}")
            indexes.append(self.columns.index(name))
        return ResultTable(list(order), [tuple(row[i] for i in indexes) for row in self.rows])

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV payload, expected a header row") from None
        return cls(header, [tuple(row) for row in reader])

    def to_json(self) -> str:
        return json.dumps({
            "columns": self.columns,
            vocab.JSON_RESULT_KEY: self.as_dicts(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        try:
            payload = json.loads(text)
            rows = payload[vocab.JSON_RESULT_KEY]
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"malformed JSON result payload: {exc}") from exc
        columns = payload.get("columns")
        if columns is None:
            columns = list(rows[0]) if rows else []
        return cls(list(columns), [tuple(str(row[c]) for c in columns) for row in rows])


# -- engine -------------------------------------------------------------------

class SearchEngine:
    """Runs queries and manages saved searches over one connection."""

    def __init__(self, base_url: str, transport):
        self.base_url = normalize_base(base_url)
        self.transport = transport

    def _endpoint(self, suffix: str) -> str:
        return self.base_url + vocab.REST_PREFIX + suffix

    def run(self, spec: QuerySpec, format: str = "csv") -> ResultTable:
        """POST the query document and parse the tabular response."""
        if format not in vocab.FORMATS:
            raise ValidationError(f"format must be one of {vocab.FORMATS}")
        uri = self._endpoint(vocab.SEARCH_PATH) + f"?format={format}"
        response = self.transport.execute(Request(
            "POST", uri, body=to_xml(spec), headers={"Content-Type": "text/xml"},
        ))
        if not response.ok:
            raise SearchError(
                f"search failed with status {response.status}: {response.text()[:200]}"
            )
        text = response.text()
        table = ResultTable.from_json(text) if format == "json" else ResultTable.from_csv(text)
        return table.select_columns(spec.columns)

    # -- saved searches and templates -------------------------------------

    def _store(self, prefix: str, name: str, spec: QuerySpec, shared_with) -> None:
        headers = {"Content-Type": "text/xml"}
        if shared_with:
            headers[vocab.SHARE_HEADER] = ",".join(shared_with)
        response = self.transport.execute(Request(
            "PUT", self._endpoint(prefix) + "/" + name, body=to_xml(spec), headers=headers,
        ))
        if not response.ok:
            raise SearchError(f"storing {name!r} failed with status {response.status}")

    def _retrieve(self, prefix: str, name: str) -> QuerySpec:
        response = self.transport.get(self._endpoint(prefix) + "/" + name)
        if response.status == 404:
            raise NotFound(f"no stored search named {name!r}")
        if not response.ok:
            raise SearchError(f"loading {name!r} failed with status {response.status}")
        return parse_xml(response.body)

    def save(self, name: str, row: str, columns, criteria, shared_with=()) -> None:
        spec = QuerySpec(row, tuple(columns), parse_criteria(criteria))
        self._store(vocab.SAVED_SEARCH_PATH, name, spec, shared_with)

    def get(self, name: str) -> QuerySpec:
        return self._retrieve(vocab.SAVED_SEARCH_PATH, name)

    def save_template(self, name: str, row: str, columns, criteria, shared_with=()) -> None:
        """Store a search whose constraint values are placeholder keys."""
        spec = QuerySpec(row, tuple(columns), parse_criteria(criteria))
        self._store(vocab.TEMPLATE_PATH, name, spec, shared_with)

    def get_template(self, name: str) -> QuerySpec:
        return self._retrieve(vocab.TEMPLATE_PATH, name)

    def template_keys(self, name: str) -> set[str]:
        spec = self.get_template(name)
        return {c.value for c in spec.criteria.constraints()}

    def use_template(self, name: str, bindings: dict[str, str],
                     format: str = "csv") -> ResultTable:
        """Substitute placeholder values and run the resulting query."""
        spec = self.get_template(name)
        keys = {c.value for c in spec.criteria.constraints()}
        missing = keys - set(bindings)
        if missing:
            raise MissingBinding(missing)
        bound = QuerySpec(
            spec.root_element,
            spec.columns,
            spec.criteria.map_values(lambda key: bindings[key]),
        )
        return self.run(bound, format=format)
