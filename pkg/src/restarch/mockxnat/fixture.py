"""Declarative archive fixtures for the mock server.

A fixture is one JSON document (see ``fixture.schema.json`` in the repo
root) describing the datatype schema, the entity tree with per-entity
metadata, file blobs, and optional user accounts.  The packaged
``default_fixture.json`` reproduces a small two-project archive whose MR
sessions span ages 14 to 85.
"""

from __future__ import annotations

import base64
import copy
import json
from email.utils import parsedate_to_datetime
from importlib import resources

from .. import vocab
from ..errors import FixtureError
from ..hierarchy import DEFAULT_HIERARCHY, Hierarchy

# Levels whose entities carry an implicit datatype.
LEVEL_DATATYPE = {
    "projects": "xnat:projectData",
    "subjects": "xnat:subjectData",
}


class Entity:
    """One node of the archive tree."""

    def __init__(self, level: str, id: str, label: str | None = None,
                 xsi_type: str | None = None, metadata: dict | None = None):
        self.level = level
        self.id = id
        self.label = label if label is not None else id
        self.xsi_type = xsi_type
        self.metadata = dict(metadata or {})
        self.children: dict[str, list[Entity]] = {}
        self.content: bytes = b""
        self.last_modified: str | None = None
        # Project administration state, only meaningful at the projects level.
        self.accessibility: str = "protected"
        self.members: dict[str, str] = {}

    @property
    def datatype(self) -> str | None:
        return self.xsi_type or LEVEL_DATATYPE.get(self.level)

    def child_list(self, level: str) -> list["Entity"]:
        return self.children.setdefault(level, [])

    def find_child(self, level: str, ident: str) -> "Entity | None":
        for child in self.children.get(level, []):
            if child.id == ident or child.label == ident:
                return child
        return None


class ArchiveFixture:
    """Schema plus entity tree plus user and saved-search stores."""

    def __init__(self, schema: dict[str, list[str]], projects: list[Entity],
                 users: dict[str, str] | None = None, admin: str | None = None):
        self.schema = {dt: list(fields) for dt, fields in schema.items()}
        self.projects = projects
        self.users = dict(users or {})
        self.admin = admin
        self.saved_searches: dict[str, dict] = {}
        self.templates: dict[str, dict] = {}

    # -- traversal ----------------------------------------------------------

    def walk(self):
        """Yield (entity, ancestors) over the whole tree, ancestors outermost first."""
        stack = [(project, []) for project in self.projects]
        while stack:
            entity, ancestors = stack.pop(0)
            yield entity, ancestors
            for level in entity.children:
                for child in entity.children[level]:
                    stack.append((child, ancestors + [entity]))

    def entities_of_type(self, datatype: str):
        for entity, ancestors in self.walk():
            if entity.datatype == datatype:
                yield entity, ancestors

    def find_project(self, ident: str) -> Entity | None:
        for project in self.projects:
            if project.id == ident or project.label == ident:
                return project
        return None

    # -- (de)serialization ----------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict, hierarchy: Hierarchy = DEFAULT_HIERARCHY) -> "ArchiveFixture":
        if not isinstance(doc, dict) or "schema" not in doc:
            raise FixtureError("fixture document must be an object with a 'schema' key")
        projects = [
            _entity_from_dict("projects", raw, hierarchy)
            for raw in doc.get("projects", [])
        ]
        fixture = cls(
            schema=doc["schema"],
            projects=projects,
            users=doc.get("users"),
            admin=doc.get("admin"),
        )
        fixture.validate(hierarchy)
        return fixture

    def to_dict(self) -> dict:
        doc = {"schema": copy.deepcopy(self.schema), "projects": [
            _entity_to_dict(project) for project in self.projects
        ]}
        if self.users:
            doc["users"] = dict(self.users)
        if self.admin:
            doc["admin"] = self.admin
        return doc

    def validate(self, hierarchy: Hierarchy = DEFAULT_HIERARCHY) -> None:
        """Check hierarchy conformance, metadata keys, and file dates."""
        def check_sibling_names(pool, where):
            ids = [e.id for e in pool]
            labels = [e.label for e in pool]
            if len(set(ids)) != len(ids) or len(set(labels)) != len(labels):
                raise FixtureError(f"duplicate sibling id or label under {where}")

        check_sibling_names(self.projects, "the archive root")
        for entity, ancestors in self.walk():
            if not ancestors and entity.level not in hierarchy.roots:
                raise FixtureError(f"top-level entities must be projects, got {entity.level!r}")
            for level in entity.children:
                if level not in hierarchy.children(entity.level):
                    raise FixtureError(
                        f"{level!r} is not a child level of {entity.level!r} "
                        f"(entity {entity.id!r})"
                    )
                check_sibling_names(entity.children[level], f"{entity.level}/{entity.id}")
            datatype = entity.datatype
            if entity.metadata:
                if datatype is None:
                    raise FixtureError(
                        f"entity {entity.id!r} at level {entity.level!r} carries metadata "
                        "but no datatype"
                    )
                if datatype not in self.schema:
                    raise FixtureError(f"datatype {datatype!r} of {entity.id!r} not in schema")
                for key in entity.metadata:
                    if key not in self.schema[datatype]:
                        raise FixtureError(
                            f"metadata key {key!r} of {entity.id!r} not declared "
                            f"for {datatype!r}"
                        )
            if entity.level == "files" and entity.last_modified is not None:
                try:
                    parsedate_to_datetime(entity.last_modified)
                except (TypeError, ValueError):
                    raise FixtureError(
                        f"file {entity.id!r} has a bad Last-Modified date: "
                        f"{entity.last_modified!r}"
                    ) from None
            if entity.level == "projects" and entity.accessibility not in vocab.ACCESSIBILITY_LEVELS:
                raise FixtureError(
                    f"project {entity.id!r} has unknown accessibility "
                    f"{entity.accessibility!r}"
                )


def _entity_from_dict(level: str, raw: dict, hierarchy: Hierarchy) -> Entity:
    if "id" not in raw:
        raise FixtureError(f"entity at level {level!r} is missing an 'id'")
    entity = Entity(
        level,
        str(raw["id"]),
        label=raw.get("label"),
        xsi_type=raw.get("xsi_type"),
        metadata=raw.get("metadata"),
    )
    if level == "files":
        if "content_b64" in raw:
            entity.content = base64.b64decode(raw["content_b64"])
        else:
            entity.content = str(raw.get("content", "")).encode("utf-8")
        entity.last_modified = raw.get("last_modified")
    if level == "projects":
        entity.accessibility = raw.get("accessibility", "protected")
        entity.members = dict(raw.get("members", {}))
    for key, value in raw.items():
        if key in hierarchy.levels:
            entity.children[key] = [
                _entity_from_dict(key, child, hierarchy) for child in value
            ]
    return entity


def _entity_to_dict(entity: Entity) -> dict:
    raw: dict = {"id": entity.id}
    if entity.label != entity.id:
        raw["label"] = entity.label
    if entity.xsi_type:
        raw["xsi_type"] = entity.xsi_type
    if entity.metadata:
        raw["metadata"] = dict(entity.metadata)
    if entity.level == "files":
        try:
            raw["content"] = entity.content.decode("utf-8")
        except UnicodeDecodeError:
            raw["content_b64"] = base64.b64encode(entity.content).decode("ascii")
        if entity.last_modified:
            raw["last_modified"] = entity.last_modified
    if entity.level == "projects":
        raw["accessibility"] = entity.accessibility
        if entity.members:
            raw["members"] = dict(entity.members)
    for level, children in entity.children.items():
        raw[level] = [_entity_to_dict(child) for child in children]
    return raw


def load_fixture(path: str, hierarchy: Hierarchy = DEFAULT_HIERARCHY) -> ArchiveFixture:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return ArchiveFixture.from_dict(json.load(fh), hierarchy)
    except OSError as exc:
        raise FixtureError(f"cannot read fixture {path}: {exc}") from exc
    except ValueError as exc:
        raise FixtureError(f"fixture {path} is not valid JSON: {exc}") from exc


def default_fixture() -> ArchiveFixture:
    """The packaged desk-scale archive: 2 projects, 5 subjects, 5 MR sessions."""
    data = resources.files(__package__).joinpath("default_fixture.json").read_text("utf-8")
    return ArchiveFixture.from_dict(json.loads(data))
