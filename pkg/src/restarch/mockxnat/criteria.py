"""Server-side query document parsing and boolean evaluation.

Deliberately independent of the client's query builder: only the element
names in :mod:`restarch.vocab` are shared, so client/server agreement in
tests means the documents themselves are compatible, not that one parser
checked itself.
"""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from decimal import Decimal, InvalidOperation

from .. import vocab

log = logging.getLogger(__name__)


class BadQueryDocument(Exception):
    """The POSTed search document is not usable; the server answers 400."""


def parse_document(body: bytes):
    """Extract (root_element, columns, criteria tree) from a query document.

    The criteria tree is represented as nested ``(method, items)`` tuples
    with ``(schema_field, op, value)`` leaves.
    """
    try:
        root = ET.fromstring(body)
    except ET.ParseError as exc:
        raise BadQueryDocument(f"unparseable XML: {exc}") from exc
    if root.tag != vocab.XML_DOCUMENT_ROOT:
        raise BadQueryDocument(f"unexpected document root {root.tag!r}")
    row_type = (root.findtext(vocab.XML_ROOT_ELEMENT) or "").strip()
    if not row_type:
        raise BadQueryDocument("missing root element name")
    columns = [
        (elem.text or "").strip() for elem in root.findall(vocab.XML_SEARCH_FIELD)
    ]
    if not columns:
        raise BadQueryDocument("query document defines no columns")
    criteria_elem = root.find(vocab.XML_CRITERIA_SET)
    if criteria_elem is None:
        raise BadQueryDocument("query document has no criteria set")
    return row_type, columns, _parse_set(criteria_elem)


def _parse_set(elem: ET.Element):
    method = (elem.get(vocab.XML_METHOD_ATTR) or "").upper()
    if method not in vocab.COMBINATORS:
        raise BadQueryDocument(f"criteria set has bad method {method!r}")
    items = []
    for child in elem:
        if child.tag == vocab.XML_CHILD_SET:
            items.append(_parse_set(child))
        elif child.tag == vocab.XML_CONSTRAINT:
            field = (child.findtext(vocab.XML_SCHEMA_FIELD) or "").strip()
            op = (child.findtext(vocab.XML_COMPARISON) or "").strip()
            value = child.findtext(vocab.XML_VALUE) or ""
            if not field or op not in vocab.OPERATORS:
                raise BadQueryDocument(f"bad constraint {field!r} {op!r}")
            items.append((field, op, value))
        else:
            raise BadQueryDocument(f"unexpected element {child.tag!r}")
    if not items:
        raise BadQueryDocument("empty criteria set")
    return (method, items)


def _as_number(text: str):
    try:
        return Decimal(text)
    except (InvalidOperation, ValueError):
        return None


def compare(left: str, op: str, right: str) -> bool:
    """Compare numerically when both sides parse as decimals, else as text."""
    if op == "LIKE":
        parts = [re.escape(p) for p in right.split("%")]
        return re.fullmatch(".*".join(parts), left) is not None
    ln, rn = _as_number(left), _as_number(right)
    if ln is not None and rn is not None:
        left_key, right_key = ln, rn
    else:
        left_key, right_key = left, right
    if op == "=":
        return left_key == right_key
    if op == "!=":
        return left_key != right_key
    if op == "<":
        return left_key < right_key
    if op == ">":
        return left_key > right_key
    if op == "<=":
        return left_key <= right_key
    if op == ">=":
        return left_key >= right_key
    raise BadQueryDocument(f"unknown operator {op!r}")


def evaluate(criteria, resolver) -> bool:
    """Recursive boolean evaluation of a parsed criteria tree.

    ``resolver(schema_field)`` returns the entity's value for the field or
    None when unknown; unknown fields make their constraint false (logged)
    so queries stay total.
    """
    method, items = criteria
    results = []
    for item in items:
        if isinstance(item, tuple) and len(item) == 2:
            results.append(evaluate(item, resolver))
        else:
            field, op, value = item
            actual = resolver(field)
            if actual is None:
                log.debug("unknown schema field %r evaluates false", field)
                results.append(False)
            else:
                results.append(compare(str(actual), op, value))
    return all(results) if method == "AND" else any(results)
