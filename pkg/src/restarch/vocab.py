"""Shared vocabulary: level names, endpoint paths, XML element names.

Client modules and the mock server both import these constants so the wire
vocabulary can be adjusted in one place for conformance against other
servers.  The mock deliberately does not share parsing code with the
client, only these names.
"""

REST_PREFIX = "/REST"

# Hierarchy level keywords, canonical (plural) spelling.
LEVELS = (
    "projects",
    "subjects",
    "experiments",
    "scans",
    "assessors",
    "reconstructions",
    "resources",
    "files",
)

# Singular spellings accepted in selectors and normalized to plural.
SINGULAR = {name[:-1]: name for name in LEVELS}

# Default parent->children relation.  Image-level entities (scans, assessors,
# reconstructions) only carry resources; projects, subjects and experiments
# carry resources directly as well.  Deployments with custom schemas can load
# a different mapping, see hierarchy.Hierarchy.from_file.
DEFAULT_CHILDREN = {
    "projects": ("subjects", "resources"),
    "subjects": ("experiments", "resources"),
    "experiments": ("scans", "assessors", "reconstructions", "resources"),
    "scans": ("resources",),
    "assessors": ("resources",),
    "reconstructions": ("resources",),
    "resources": ("files",),
    "files": (),
}

# URI query string keys (the only ones the archive understands).
QUERY_COLUMNS = "columns"
QUERY_XSI_TYPE = "xsiType"
QUERY_FORMAT = "format"
FORMATS = ("csv", "json")

# Search document element and attribute names.
XML_DOCUMENT_ROOT = "search"
XML_ROOT_ELEMENT = "root_element_name"
XML_SEARCH_FIELD = "search_field"
XML_CRITERIA_SET = "criteria_set"
XML_CHILD_SET = "child_set"
XML_METHOD_ATTR = "method"
XML_CONSTRAINT = "constraint"
XML_SCHEMA_FIELD = "schema_field"
XML_COMPARISON = "comparison_type"
XML_VALUE = "value"

COMBINATORS = ("AND", "OR")
OPERATORS = ("=", "!=", "<", ">", "<=", ">=", "LIKE")

# Endpoints beyond the resource hierarchy.
SEARCH_PATH = "/search"
SCHEMA_PATH = "/search/elements"
SAVED_SEARCH_PATH = "/search/saved"
TEMPLATE_PATH = "/search/templates"
SHARE_HEADER = "X-Share-With"

# JSON payloads wrap their rows under this key.
JSON_RESULT_KEY = "result"

# Project administration vocabularies.
ACCESSIBILITY_LEVELS = ("public", "protected", "private")
USER_ROLES = ("owner", "member", "collaborator")

# Datatype -> hierarchy level used to pick the filter level of a where()
# clause and to resolve cross-datatype columns in the mock.  Session-like
# datatypes (anything ending in SessionData) live at the experiments level.
DATATYPE_LEVEL = {
    "xnat:projectData": "projects",
    "xnat:subjectData": "subjects",
}
SESSION_SUFFIX = "SessionData"

# Identifier field per level, used when a where() clause asks the search
# engine which entities match.
ID_FIELDS = {
    "projects": "ID",
    "subjects": "SUBJECT_ID",
    "experiments": "SESSION_ID",
}
SUBJECT_DATATYPE = "xnat:subjectData"
SUBJECT_ID_FIELD = "xnat:subjectData/SUBJECT_ID"

LEVEL_DEPTH = {name: i for i, name in enumerate(LEVELS)}


def datatype_level(datatype: str) -> str | None:
    """Hierarchy level a datatype's rows live at, or None if unmapped."""
    if datatype in DATATYPE_LEVEL:
        return DATATYPE_LEVEL[datatype]
    if datatype.endswith(SESSION_SUFFIX):
        return "experiments"
    return None
