import itertools

import pytest
import requests

from restarch.errors import FixtureError, PortUnavailable
from restarch.mockxnat import ArchiveFixture, MockXnat, default_fixture
from restarch.mockxnat.criteria import BadQueryDocument, compare, evaluate, parse_document

from oracles import walk_entities

# These tests speak raw HTTP on purpose: the server must behave without any
# help from the client's transport or parsers.


def test_fixture_validation_rejects_bad_child_level():
    with pytest.raises(FixtureError):
        ArchiveFixture.from_dict({
            "schema": {},
            "projects": [{"id": "P", "files": [{"id": "f"}]}],
        })


def test_fixture_validation_rejects_unknown_metadata_key():
    with pytest.raises(FixtureError):
        ArchiveFixture.from_dict({
            "schema": {"xnat:projectData": ["ID"]},
            "projects": [{"id": "P", "metadata": {"NOPE": "x"}}],
        })


def test_fixture_validation_rejects_bad_http_date():
    with pytest.raises(FixtureError):
        ArchiveFixture.from_dict({
            "schema": {},
            "projects": [{"id": "P", "subjects": [{
                "id": "S", "experiments": [{
                    "id": "E", "resources": [{
                        "id": "R", "files": [{"id": "f", "last_modified": "yesterday"}],
                    }],
                }],
            }]}],
        })


def test_fixture_validation_rejects_duplicate_sibling_labels():
    with pytest.raises(FixtureError):
        ArchiveFixture.from_dict({
            "schema": {},
            "projects": [{"id": "P", "subjects": [
                {"id": "S1", "label": "same"},
                {"id": "S2", "label": "same"},
            ]}],
        })


def test_fixture_round_trips_through_dict():
    fixture = default_fixture()
    again = ArchiveFixture.from_dict(fixture.to_dict())
    assert again.to_dict() == fixture.to_dict()


def test_port_zero_is_ephemeral_and_busy_port_raises(server):
    with pytest.raises(PortUnavailable):
        MockXnat(default_fixture(), port=server.port).start()


# -- listings ------------------------------------------------------------------------


def test_projects_listing_csv(server):
    response = requests.get(server.url + "/REST/projects?format=csv", timeout=5)
    lines = response.text.splitlines()
    assert lines[0] == "ID,label"
    assert [line.split(",")[0] for line in lines[1:]] == ["CENTRAL_OASIS_CS", "MY_PROJECT"]


def test_listing_honors_columns_including_project(server):
    response = requests.get(
        server.url + "/REST/projects/CENTRAL_OASIS_CS/subjects?columns=ID,project",
        timeout=5,
    )
    lines = response.text.splitlines()
    assert lines[0] == "ID,project"
    assert all(line.endswith(",CENTRAL_OASIS_CS") for line in lines[1:])


def test_listing_unknown_column_is_empty(server):
    response = requests.get(server.url + "/REST/projects?columns=ID,WHAT", timeout=5)
    assert response.text.splitlines()[1] == "CENTRAL_OASIS_CS,"


def test_listing_json_shape(server):
    response = requests.get(server.url + "/REST/projects?format=json", timeout=5)
    payload = response.json()
    assert payload["columns"] == ["ID", "label"]
    assert payload["result"][0]["ID"] == "CENTRAL_OASIS_CS"


def test_listing_xsi_type_filter(serve):
    doc = {
        "schema": {"xnat:mrSessionData": ["SESSION_ID"],
                   "xnat:petSessionData": ["SESSION_ID"]},
        "projects": [{"id": "P", "subjects": [{
            "id": "S", "experiments": [
                {"id": "MR1", "xsi_type": "xnat:mrSessionData"},
                {"id": "PET1", "xsi_type": "xnat:petSessionData"},
            ],
        }]}],
    }
    srv = serve(doc)
    base = srv.url + "/REST/projects/P/subjects/S/experiments"
    both = requests.get(base, timeout=5).text.splitlines()
    only_mr = requests.get(base + "?xsiType=xnat:mrSessionData", timeout=5).text.splitlines()
    assert len(both) == 3
    assert [line.split(",")[0] for line in only_mr[1:]] == ["MR1"]


def test_root_listing(server):
    response = requests.get(server.url + "/REST", timeout=5)
    assert response.status_code == 200
    assert response.text.splitlines() == ["name", "projects"]


def test_unknown_paths_404(server):
    assert requests.get(server.url + "/REST/bogus", timeout=5).status_code == 404
    assert requests.get(server.url + "/nothing", timeout=5).status_code == 404
    assert requests.get(server.url + "/REST/projects/GHOST/subjects",
                        timeout=5).status_code == 404


def test_collection_rejects_writes_with_400(server):
    assert requests.put(server.url + "/REST/projects", timeout=5).status_code == 400
    assert requests.delete(server.url + "/REST/projects", timeout=5).status_code == 400


# -- element vs collection classification over every fixture path ----------------------


def test_every_fixture_path_serves_its_kind(server):
    from restarch.hierarchy import parse_path

    doc = default_fixture().to_dict()
    for level, entity, ancestors in walk_entities(doc):
        segments = [(lv, e["id"]) for lv, e in ancestors] + [(level, entity["id"])]
        element_path = "".join(f"/{lv}/{i}" for lv, i in segments)
        assert parse_path(element_path).kind == "element"

        response = requests.get(server.url + "/REST" + element_path, timeout=5)
        assert response.status_code == 200, element_path
        if level == "files":
            assert response.headers["Content-Type"] == "application/octet-stream"
            assert response.content == entity["content"].encode()
        else:
            body = response.json()
            assert body["ID"] == entity["id"]

        for child_level in ("subjects", "experiments", "scans", "resources", "files"):
            if child_level not in entity:
                continue
            assert parse_path(element_path + "/" + child_level).kind == "collection"
            listing = requests.get(
                server.url + "/REST" + element_path + "/" + child_level, timeout=5
            )
            assert listing.status_code == 200
            assert listing.headers["Content-Type"] == "text/csv"
            lines = listing.text.splitlines()
            assert lines[0] == "ID,label"
            assert len(lines) == 1 + len(entity[child_level])


# -- file validators ----------------------------------------------------------------------

FILE_URL = ("/REST/projects/CENTRAL_OASIS_CS/subjects/XNAT_S00001/experiments"
            "/XNAT_E00001/scans/mpr-1/resources/ANALYZE/files/OAS1_0001_mpr-1.img")


def test_file_get_carries_last_modified(server):
    response = requests.get(server.url + FILE_URL, timeout=5)
    assert response.headers["Last-Modified"] == "Mon, 04 Jan 2010 09:00:00 GMT"


def test_if_modified_since_matching_returns_304_empty(server):
    response = requests.get(
        server.url + FILE_URL,
        headers={"If-Modified-Since": "Mon, 04 Jan 2010 09:00:00 GMT"},
        timeout=5,
    )
    assert response.status_code == 304
    assert response.content == b""


def test_if_modified_since_older_returns_full_body(server):
    response = requests.get(
        server.url + FILE_URL,
        headers={"If-Modified-Since": "Tue, 04 Jan 2000 09:00:00 GMT"},
        timeout=5,
    )
    assert response.status_code == 200
    assert response.content != b""


# -- mutations -----------------------------------------------------------------------------


def test_put_creates_and_updates(server):
    url = server.url + "/REST/projects/P_NEW"
    assert requests.put(url, timeout=5).status_code == 201
    assert requests.put(url, timeout=5).status_code == 200
    assert server.fixture.find_project("P_NEW") is not None


def test_put_with_query_params_sets_metadata(server):
    url = (server.url + "/REST/projects/CENTRAL_OASIS_CS/subjects/XNAT_S00001"
           "/experiments/EXTRA?xsiType=xnat:mrSessionData&AGE=33")
    assert requests.put(url, timeout=5).status_code == 201
    body = requests.get(url.split("?")[0], timeout=5).json()
    assert body["xsiType"] == "xnat:mrSessionData"
    assert body["AGE"] == "33"


def test_put_under_missing_parent_404(server):
    url = server.url + "/REST/projects/GHOST/subjects/S1"
    assert requests.put(url, timeout=5).status_code == 404


def test_delete_removes_subtree(server):
    url = server.url + "/REST/projects/MY_PROJECT"
    assert requests.delete(url, timeout=5).status_code == 200
    assert requests.get(url, timeout=5).status_code == 404
    assert requests.delete(url, timeout=5).status_code == 404


def test_file_put_refreshes_last_modified(server):
    old = requests.get(server.url + FILE_URL, timeout=5).headers["Last-Modified"]
    assert requests.put(server.url + FILE_URL, data=b"new bytes", timeout=5).status_code == 200
    refreshed = requests.get(server.url + FILE_URL, timeout=5)
    assert refreshed.content == b"new bytes"
    assert refreshed.headers["Last-Modified"] != old


# -- search endpoint ------------------------------------------------------------------------

SEARCH_XML = """<?xml version='1.0' encoding='UTF-8'?>
<search><root_element_name>xnat:mrSessionData</root_element_name>
<search_field>xnat:mrSessionData/SESSION_ID</search_field>
<search_field>xnat:mrSessionData/PROJECT</search_field>
<criteria_set method="OR">
<constraint><schema_field>xnat:mrSessionData/PROJECT</schema_field>
<comparison_type>=</comparison_type><value>MY_PROJECT</value></constraint>
<constraint><schema_field>xnat:mrSessionData/PROJECT</schema_field>
<comparison_type>=</comparison_type><value>CENTRAL_OASIS_CS</value></constraint>
</criteria_set></search>"""


def test_search_or_of_two_projects_returns_rows_from_both(server):
    response = requests.post(server.url + "/REST/search?format=csv",
                             data=SEARCH_XML.encode(), timeout=5)
    assert response.status_code == 200
    lines = response.text.splitlines()
    projects = {line.split(",")[1] for line in lines[1:]}
    assert projects == {"MY_PROJECT", "CENTRAL_OASIS_CS"}
    assert len(lines) == 6  # header + all five sessions


def test_search_rejects_malformed_document(server):
    response = requests.post(server.url + "/REST/search", data=b"<junk>", timeout=5)
    assert response.status_code == 400


def test_search_endpoint_rejects_get(server):
    assert requests.get(server.url + "/REST/search", timeout=5).status_code == 400


# -- criteria evaluation unit tests ------------------------------------------------------------


def test_evaluate_eq_over_empty_metadata_is_false():
    criteria = ("AND", [("xnat:subjectData/GENDER", "=", "male")])
    assert evaluate(criteria, lambda field: None) is False


def test_evaluate_numeric_comparison():
    criteria = ("AND", [("xnat:mrSessionData/AGE", ">", "80")])
    assert evaluate(criteria, {"xnat:mrSessionData/AGE": "81"}.get) is True
    # '113' sorts before '80' as text; numeric comparison must win
    assert evaluate(criteria, {"xnat:mrSessionData/AGE": "113"}.get) is True
    assert evaluate(criteria, {"xnat:mrSessionData/AGE": "8"}.get) is False


def test_evaluate_lexicographic_fallback():
    criteria = ("AND", [("a/b", "<", "beta")])
    assert evaluate(criteria, {"a/b": "alpha"}.get) is True


def test_compare_like_uses_percent_wildcards():
    assert compare("OAS1_0003_MR1", "LIKE", "%_MR1")
    assert compare("anything", "LIKE", "%")
    assert not compare("OAS1_0003_MR2", "LIKE", "%_MR1")
    assert compare("abc", "LIKE", "a%c")


def test_nested_evaluation_matches_truth_table():
    # (A AND (B OR C)) over all 8 assignments
    criteria = ("AND", [
        ("t/A", "=", "1"),
        ("OR", [("t/B", "=", "1"), ("t/C", "=", "1")]),
    ])
    for a, b, c in itertools.product("01", repeat=3):
        resolver = {"t/A": a, "t/B": b, "t/C": c}.get
        expected = (a == "1") and ((b == "1") or (c == "1"))
        assert evaluate(criteria, resolver) is expected


def test_parse_document_rejects_unknown_operator():
    bad = SEARCH_XML.replace("<comparison_type>=</comparison_type>",
                             "<comparison_type>~=</comparison_type>")
    with pytest.raises(BadQueryDocument):
        parse_document(bad.encode())
