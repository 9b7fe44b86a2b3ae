"""Database introspection: datatypes, their fields, and observed values."""

from __future__ import annotations

from . import vocab
from .errors import RestArchError, UnknownDatatype, UnknownField
from .search import Constraint, CriteriaSet, QuerySpec, ResultTable
from .transport import Request


class Inspector:
    """Exposes what the archive's schema defines and what values it holds."""

    def __init__(self, interface):
        self._interface = interface

    def _listing(self, suffix: str) -> ResultTable:
        uri = self._interface.base_url + vocab.REST_PREFIX + suffix + "?format=csv"
        result = self._interface.cache.fetch(Request("GET", uri))
        if result.response.status == 404:
            raise UnknownDatatype(f"schema listing not found: {suffix}")
        if not result.response.ok:
            raise RestArchError(f"schema listing answered {result.response.status}")
        return ResultTable.from_csv(result.response.text())

    def datatypes(self, datatype: str | None = None) -> list[str]:
        """All datatype names; with an argument, that datatype's fields."""
        if datatype is not None:
            return self.fields(datatype)
        table = self._listing(vocab.SCHEMA_PATH)
        return sorted({row[0] for row in table.rows})

    def fields(self, datatype: str) -> list[str]:
        """Fully qualified 'datatype/FIELD' names for one datatype."""
        table = self._listing(vocab.SCHEMA_PATH + "/" + datatype)
        return [row[0] for row in table.rows]

    def field_values(self, field: str) -> list[str]:
        """Distinct values a field takes, via a match-everything search."""
        if field.count("/") != 1:
            raise UnknownField(f"field must be 'datatype/FIELD', got {field!r}")
        datatype = field.split("/", 1)[0]
        try:
            known = self.fields(datatype)
        except UnknownDatatype:
            raise UnknownField(f"unknown datatype in field {field!r}") from None
        if field not in known:
            raise UnknownField(f"{field!r} is not a field of {datatype!r}")
        everything = CriteriaSet("AND", (Constraint(field, "LIKE", "%"),))
        table = self._interface.search.run(QuerySpec(datatype, (field,), everything))
        return sorted(set(table.column(field)))
