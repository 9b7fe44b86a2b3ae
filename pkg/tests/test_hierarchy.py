import json

import pytest
from hypothesis import given, strategies as st

from restarch import QueryOptions, build_uri, parse_path, validate_path
from restarch.errors import InvalidPath, ValidationError
from restarch.hierarchy import DEFAULT_HIERARCHY, Hierarchy, ResourcePath


def test_build_uri_collection_with_format():
    path = validate_path(["projects"])
    uri = build_uri("https://central.xnat.org", path, QueryOptions(format="csv"))
    assert uri == "https://central.xnat.org/REST/projects?format=csv"


def test_build_uri_element():
    path = validate_path([("projects", "PROJID")])
    assert build_uri("https://host", path) == "https://host/REST/projects/PROJID"


def test_build_uri_root_listing():
    assert build_uri("https://host", ResourcePath(())) == "https://host/REST"


def test_build_uri_strips_one_trailing_slash():
    path = validate_path(["projects"])
    assert build_uri("https://host/", path) == "https://host/REST/projects"


def test_build_uri_deterministic():
    path = validate_path([("projects", "P1"), ("subjects", None)])
    opts = QueryOptions(columns=("ID", "label"), xsi_type_filter="xnat:mrSessionData",
                        format="json")
    first = build_uri("https://host", path, opts)
    second = build_uri("https://host", path, opts)
    assert first == second
    assert "columns=ID,label" in first
    assert "xsiType=xnat:mrSessionData" in first
    assert first.endswith("format=json")


def test_query_string_key_order_and_omission():
    assert QueryOptions().query_string() == ""
    opts = QueryOptions(columns=("ID", "project"), format="csv")
    assert opts.query_string() == "?columns=ID,project&format=csv"


def test_query_options_rejects_unknown_format():
    with pytest.raises(ValidationError):
        QueryOptions(format="xml")


def test_validate_path_missing_id_between_levels():
    with pytest.raises(InvalidPath):
        validate_path(["projects", "subjects"])


def test_validate_path_appendix_scan_pattern_is_collection():
    path = validate_path([
        ("projects", "P1"), ("subjects", "S1"), ("experiments", "E1"),
        ("scans", "mpr-1*"),
    ])
    assert path.kind == "collection"


def test_validate_path_files_cannot_be_root():
    with pytest.raises(InvalidPath):
        validate_path([("files", "x.img")])


def test_validate_path_rejects_wrong_child():
    with pytest.raises(InvalidPath) as exc:
        validate_path([("projects", "P1"), ("scans", None)])
    assert "scans" in str(exc.value) and "projects" in str(exc.value)


def test_element_vs_collection_classification():
    assert validate_path([("projects", "P1")]).kind == "element"
    assert validate_path([("projects", "P*")]).kind == "collection"
    assert validate_path([("projects", None)]).kind == "collection"


def test_singular_keywords_normalize():
    path = parse_path("/project/PROJID")
    assert path.serialize() == "/projects/PROJID"


def test_parse_rejects_non_absolute():
    with pytest.raises(InvalidPath):
        parse_path("projects/P1")


# -- round-trip property -------------------------------------------------------

def _valid_paths():
    """Strategy over random valid canonical paths in the default hierarchy."""
    pattern = st.text(
        alphabet="abcdefgh0123456789_-*", min_size=1, max_size=8
    ).filter(lambda p: not DEFAULT_HIERARCHY.is_level(p))

    @st.composite
    def paths(draw):
        segments = []
        level = draw(st.sampled_from(DEFAULT_HIERARCHY.roots))
        while True:
            terminal = draw(st.booleans())
            children = DEFAULT_HIERARCHY.children(level)
            if terminal or not children:
                segments.append((level, draw(st.one_of(st.none(), pattern))))
                break
            segments.append((level, draw(pattern)))
            level = draw(st.sampled_from(list(children)))
        return validate_path(segments)

    return paths()


@given(_valid_paths())
def test_serialize_parse_round_trip(path):
    assert parse_path(path.serialize()) == path


@given(_valid_paths())
def test_build_uri_is_parseable_generic_uri(path):
    from urllib.parse import urlsplit

    uri = build_uri("https://central.xnat.org", path, QueryOptions(format="csv"))
    parts = urlsplit(uri)
    assert parts.scheme == "https"
    assert parts.netloc == "central.xnat.org"
    assert parts.path == "/REST" + path.serialize()
    assert parts.query == "format=csv"


# -- configurable hierarchy ------------------------------------------------------

def test_hierarchy_loadable_from_config_file(tmp_path):
    config = {
        "plates": ["wells"],
        "wells": ["files"],
        "files": [],
    }
    config_path = tmp_path / "levels.json"
    config_path.write_text(json.dumps(config))
    custom = Hierarchy.from_file(config_path)
    assert custom.roots == ("plates",)
    assert validate_path([("plates", "P"), ("wells", None)], custom).kind == "collection"
    with pytest.raises(InvalidPath):
        validate_path([("wells", "W")], custom)


def test_hierarchy_rejects_undeclared_child():
    with pytest.raises(ValidationError):
        Hierarchy({"a": ["b"]})
