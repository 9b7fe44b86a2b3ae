"""Selector language: absolute paths, ``//`` shortcuts, and chaining.

Grammar (EBNF)::

    selector = segment+
    segment  = "/" level [ "/" pattern ] | "//" level [ "/" pattern ]
    level    = hierarchy keyword, plural or singular
    pattern  = any token that is not a level keyword; "*" matches any run
               of characters

A ``//LEVEL`` segment expands along the unique shortest hierarchy chain
from the previous anchor level (or from the hierarchy root at the start),
inserting a ``*`` pattern for every level crossed.  All three user-facing
syntaxes (chained calls, full wildcard paths, shortcuts) reduce to the
same canonical :class:`~restarch.hierarchy.ResourcePath`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import AmbiguousShortcut, InvalidPath, ParseError
from .hierarchy import DEFAULT_HIERARCHY, Hierarchy, ResourcePath, validate_path

_TOKEN = re.compile(r"(//|/)([^/]+)")


@dataclass(frozen=True)
class Selector:
    """A parsed selector: the raw text, its form, and the canonical path."""

    raw: str
    form: str  # "absolute" or "shortcut"
    expanded: ResourcePath

    @property
    def kind(self) -> str:
        return self.expanded.kind

    def serialize(self) -> str:
        return self.expanded.serialize()


def _expand_shortcut(segments, anchor, target, hierarchy):
    chains = hierarchy.shortest_chains(anchor, target)
    if not chains:
        where = f"below {anchor!r}" if anchor else "from the root"
        raise InvalidPath(f"no hierarchy chain to {target!r} {where}")
    if len(chains) > 1:
        raise AmbiguousShortcut(
            f"//{target} is ambiguous: " + " vs ".join("/".join(c) for c in chains)
        )
    if segments and segments[-1][1] is None:
        segments[-1] = (segments[-1][0], "*")
    chain = chains[0]
    for level in chain[:-1]:
        segments.append((level, "*"))
    segments.append((chain[-1], None))


def parse(raw: str, hierarchy: Hierarchy = DEFAULT_HIERARCHY) -> Selector:
    """Parse a selector string into a Selector with a canonical path.

    Raises ParseError on bad tokens, AmbiguousShortcut when a shortcut has
    two equally short expansions, and InvalidPath for hierarchy violations.
    """
    if not raw:
        raise ParseError("empty selector")
    if raw == "/":
        return Selector(raw, "absolute", ResourcePath(()))

    matches = list(_TOKEN.finditer(raw))
    if not matches or matches[0].start() != 0:
        raise ParseError(f"selector must start with '/': {raw!r}")
    covered = 0
    for m in matches:
        if m.start() != covered:
            raise ParseError(f"bad token at offset {covered} in {raw!r}")
        covered = m.end()
    if covered != len(raw):
        raise ParseError(f"trailing junk in selector: {raw!r}")

    segments: list[tuple[str, str | None]] = []
    form = "absolute"
    for m in matches:
        sep, token = m.group(1), m.group(2)
        if sep == "//":
            form = "shortcut"
            if not hierarchy.is_level(token):
                raise ParseError(f"'//' must name a level, got {token!r}")
            anchor = segments[-1][0] if segments else None
            _expand_shortcut(segments, anchor, hierarchy.normalize(token), hierarchy)
        elif hierarchy.is_level(token):
            segments.append((hierarchy.normalize(token), None))
        else:
            if not segments:
                raise ParseError(f"selector must start with a level, got {token!r}")
            if segments[-1][1] is not None:
                raise ParseError(f"two consecutive id patterns near {token!r} in {raw!r}")
            segments[-1] = (segments[-1][0], token)

    return Selector(raw, form, validate_path(segments, hierarchy))


def extend(
    path: ResourcePath,
    level: str,
    pattern: str | None = None,
    hierarchy: Hierarchy = DEFAULT_HIERARCHY,
) -> ResourcePath:
    """Append a level to a path, filling an omitted final pattern with '*'."""
    segments = list(path.segments)
    if segments and segments[-1][1] is None:
        segments[-1] = (segments[-1][0], "*")
    segments.append((hierarchy.normalize(level), pattern))
    return validate_path(segments, hierarchy)


def chain(
    sel: Selector,
    level: str,
    pattern: str | None = None,
    hierarchy: Hierarchy = DEFAULT_HIERARCHY,
) -> Selector:
    """A new Selector with one more level; the original is unchanged."""
    path = extend(sel.expanded, level, pattern, hierarchy)
    return Selector(path.serialize(), sel.form, path)


def glob_match(pattern: str, value: str) -> bool:
    """Match with '*' as the only metacharacter (any run of characters)."""
    if "*" not in pattern:
        return pattern == value
    parts = [re.escape(p) for p in pattern.split("*")]
    return re.fullmatch(".*".join(parts), value) is not None
