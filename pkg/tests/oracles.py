"""Independent brute-force oracles used by search and acceptance tests.

Everything here works on raw fixture dictionaries and nested-list criteria,
sharing no parsing or evaluation code with either the client or the mock
server, so agreement between the three is meaningful.
"""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation

LEVEL_ORDER = ("projects", "subjects", "experiments", "scans", "assessors",
               "reconstructions", "resources", "files")

IMPLICIT_DATATYPE = {"projects": "xnat:projectData", "subjects": "xnat:subjectData"}


# -- walking raw fixture documents ----------------------------------------------

def walk_entities(fixture_doc: dict):
    """Yield (level, entity_dict, ancestors) over a fixture document."""
    stack = [("projects", project, []) for project in fixture_doc.get("projects", [])]
    while stack:
        level, entity, ancestors = stack.pop(0)
        yield level, entity, ancestors
        for child_level in LEVEL_ORDER:
            for child in entity.get(child_level, []):
                stack.append((child_level, child, ancestors + [(level, entity)]))


def entity_datatype(level: str, entity: dict) -> str | None:
    return entity.get("xsi_type") or IMPLICIT_DATATYPE.get(level)


def resolve_field(level: str, entity: dict, ancestors, schema_field: str):
    """Value of 'datatype/FIELD' for an entity, walking ancestors if needed."""
    if "/" not in schema_field:
        return None
    datatype, field = schema_field.split("/", 1)
    if entity_datatype(level, entity) == datatype:
        return entity.get("metadata", {}).get(field)
    for anc_level, anc in reversed(ancestors):
        if entity_datatype(anc_level, anc) == datatype:
            return anc.get("metadata", {}).get(field)
    return None


# -- criteria evaluation -----------------------------------------------------------

def _number(text: str):
    try:
        return Decimal(text)
    except (InvalidOperation, ValueError):
        return None


def compare_values(left: str, op: str, right: str) -> bool:
    if op == "LIKE":
        regex = ".*".join(re.escape(part) for part in right.split("%"))
        return re.fullmatch(regex, left) is not None
    ln, rn = _number(left), _number(right)
    lk, rk = (ln, rn) if ln is not None and rn is not None else (left, right)
    return {
        "=": lk == rk,
        "!=": lk != rk,
        "<": lk < rk,
        ">": lk > rk,
        "<=": lk <= rk,
        ">=": lk >= rk,
    }[op]


def eval_nested(criteria: list, resolver) -> bool:
    """Evaluate the nested-list criteria form against a field resolver."""
    *items, combinator = criteria
    results = []
    for item in items:
        if isinstance(item, (list, tuple)) and len(item) == 3 and isinstance(item[0], str) \
                and item[1] in ("=", "!=", "<", ">", "<=", ">=", "LIKE"):
            field, op, value = item
            actual = resolver(field)
            results.append(False if actual is None else compare_values(str(actual), op, value))
        else:
            results.append(eval_nested(list(item), resolver))
    return all(results) if combinator.upper() == "AND" else any(results)


def expected_rows(fixture_doc: dict, root_element: str, columns, criteria) -> list[tuple]:
    """All (column values) rows a search over the fixture should return."""
    rows = []
    for level, entity, ancestors in walk_entities(fixture_doc):
        if entity_datatype(level, entity) != root_element:
            continue
        resolver = lambda f: resolve_field(level, entity, ancestors, f)  # noqa: E731
        if eval_nested(criteria, resolver):
            rows.append(tuple(str(resolver(c) or "") for c in columns))
    return rows


def expected_file_paths(fixture_doc: dict) -> dict[str, bytes]:
    """Archive-layout relative path -> content for every file in a fixture."""
    out = {}
    for level, entity, ancestors in walk_entities(fixture_doc):
        if level != "files":
            continue
        parts = [a[1]["id"] for a in ancestors] + [entity["id"]]
        out["/".join(parts)] = entity.get("content", "").encode("utf-8")
    return out


# -- randomized generation -----------------------------------------------------------

SCHEMA = {
    "xnat:projectData": ["ID", "NAME"],
    "xnat:subjectData": ["SUBJECT_ID", "LABEL", "GENDER", "HANDEDNESS", "PROJECT"],
    "xnat:mrSessionData": ["SESSION_ID", "LABEL", "AGE", "PROJECT"],
    "xnat:petSessionData": ["SESSION_ID", "LABEL", "AGE", "PROJECT", "TRACER"],
}

FIELD_POOL = [
    "xnat:subjectData/GENDER",
    "xnat:subjectData/HANDEDNESS",
    "xnat:subjectData/LABEL",
    "xnat:mrSessionData/AGE",
    "xnat:mrSessionData/PROJECT",
    "xnat:mrSessionData/LABEL",
    "xnat:petSessionData/TRACER",
]

VALUE_POOL = {
    "xnat:subjectData/GENDER": ["male", "female"],
    "xnat:subjectData/HANDEDNESS": ["left", "right"],
    "xnat:subjectData/LABEL": ["SUBJ_%", "%_7", "SUBJ_3"],
    "xnat:mrSessionData/AGE": ["20", "45", "80", "81"],
    "xnat:mrSessionData/PROJECT": ["RP0", "RP1", "NOPE"],
    "xnat:mrSessionData/LABEL": ["%_MR1", "SUBJ_%"],
    "xnat:petSessionData/TRACER": ["FDG", "PIB"],
}

OPERATORS = ["=", "!=", "<", ">", "<=", ">=", "LIKE"]


def random_fixture(rng) -> dict:
    projects = []
    counter = [0]
    for p in range(rng.randint(1, 2)):
        project_id = f"RP{p}"
        subjects = []
        for _ in range(rng.randint(1, 4)):
            counter[0] += 1
            n = counter[0]
            sessions = []
            for _ in range(rng.randint(0, 2)):
                session_type = rng.choice(["xnat:mrSessionData", "xnat:petSessionData"])
                meta = {
                    "SESSION_ID": f"E{n}{len(sessions)}",
                    "LABEL": f"SUBJ_{n}_MR{len(sessions) + 1}",
                    "AGE": str(rng.choice([14, 20, 45, 80, 81, 85])),
                    "PROJECT": project_id,
                }
                if session_type == "xnat:petSessionData":
                    meta["TRACER"] = rng.choice(["FDG", "PIB"])
                sessions.append({
                    "id": f"E{n}{len(sessions)}",
                    "label": meta["LABEL"],
                    "xsi_type": session_type,
                    "metadata": meta,
                })
            subjects.append({
                "id": f"S{n}",
                "label": f"SUBJ_{n}",
                "metadata": {
                    "SUBJECT_ID": f"S{n}",
                    "LABEL": f"SUBJ_{n}",
                    "GENDER": rng.choice(["male", "female"]),
                    "HANDEDNESS": rng.choice(["left", "right"]),
                    "PROJECT": project_id,
                },
                "experiments": sessions,
            })
        projects.append({
            "id": project_id,
            "metadata": {"ID": project_id, "NAME": f"random {p}"},
            "subjects": subjects,
        })
    return {"schema": dict(SCHEMA), "projects": projects}


def random_criteria(rng, max_depth: int = 4, max_width: int = 4) -> list:
    def constraint():
        field = rng.choice(FIELD_POOL)
        op = rng.choice(OPERATORS)
        value = rng.choice(VALUE_POOL[field])
        return (field, op, value)

    def build(depth):
        width = rng.randint(1, max_width)
        items = []
        for _ in range(width):
            if depth < max_depth and rng.random() < 0.3:
                items.append(build(depth + 1))
            else:
                items.append(constraint())
        items.append(rng.choice(["AND", "OR"]))
        return items

    return build(1)
