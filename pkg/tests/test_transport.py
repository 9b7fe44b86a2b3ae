import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from restarch.errors import AuthError, MethodNotAllowed, NetworkError
from restarch.mockxnat import ArchiveFixture, default_fixture
from restarch.transport import Request, Transport


def test_fresh_transport_counters_are_zero():
    transport = Transport()
    assert transport.call_count() == {}
    assert transport.calls == []


def test_get_collection_returns_csv_with_header(server):
    transport = Transport()
    response = transport.get(server.url + "/REST/projects?format=csv")
    assert response.status == 200
    header = response.text().splitlines()[0]
    assert header.split(",")[0] == "ID"
    assert transport.call_count() == {"GET": 1}


def test_counters_reset(server):
    transport = Transport()
    transport.get(server.url + "/REST/projects")
    transport.reset_counters()
    assert transport.call_count() == {}


def test_delete_on_collection_is_rejected_before_network(server):
    transport = Transport()
    with pytest.raises(MethodNotAllowed):
        transport.execute(Request("DELETE", server.url + "/REST/projects"))
    assert transport.call_count() == {}


def test_put_on_collection_is_rejected(server):
    transport = Transport()
    with pytest.raises(MethodNotAllowed):
        transport.execute(Request("PUT", server.url + "/REST/projects"))


def test_post_only_on_search_endpoint(server):
    transport = Transport()
    with pytest.raises(MethodNotAllowed):
        transport.execute(Request("POST", server.url + "/REST/projects/P1"))


def test_put_create_then_update_status_codes(server):
    transport = Transport()
    uri = server.url + "/REST/projects/FRESH"
    assert transport.execute(Request("PUT", uri)).status == 201
    assert transport.execute(Request("PUT", uri)).status == 200


def test_identical_gets_are_byte_identical(server):
    transport = Transport()
    uri = server.url + "/REST/projects/CENTRAL_OASIS_CS/subjects?format=csv"
    assert transport.get(uri).body == transport.get(uri).body


def test_credentials_required_when_server_has_users(serve):
    doc = default_fixture().to_dict()
    doc["users"] = {"alice": "secret"}
    srv = serve(ArchiveFixture.from_dict(doc))

    with pytest.raises(AuthError):
        Transport().get(srv.url + "/REST/projects")
    with pytest.raises(AuthError):
        Transport(credentials=("alice", "wrong")).get(srv.url + "/REST/projects")
    response = Transport(credentials=("alice", "secret")).get(srv.url + "/REST/projects")
    assert response.status == 200


def test_disable_network_raises_without_counting(server):
    transport = Transport(disable_network=True)
    with pytest.raises(NetworkError):
        transport.get(server.url + "/REST/projects")
    assert transport.call_count() == {}


def test_concurrent_requests_all_served(server):
    transport = Transport()
    errors = []

    def fetch():
        try:
            assert transport.get(server.url + "/REST/projects").status == 200
        except Exception as exc:  # propagate to the main thread
            errors.append(exc)

    threads = [threading.Thread(target=fetch) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert transport.call_count() == {"GET": 8}


# -- failure-path plumbing against a tiny ad-hoc server -------------------------

class _MisbehavingHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path.startswith("/loop"):
            self.send_response(302)
            self.send_header("Location", "/loop")
            self.send_header("Content-Length", "0")
            self.end_headers()
        else:
            time.sleep(0.5)
            self.send_response(200)
            self.send_header("Content-Length", "0")
            self.end_headers()


@pytest.fixture
def misbehaving_server():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _MisbehavingHandler)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()
    srv.server_close()


def test_redirect_storm_becomes_network_error(misbehaving_server):
    with pytest.raises(NetworkError):
        Transport().get(misbehaving_server + "/loop")


def test_timeout_becomes_network_error(misbehaving_server):
    with pytest.raises(NetworkError):
        Transport(timeout=0.05).get(misbehaving_server + "/slow")


def test_unreachable_server_becomes_network_error():
    with pytest.raises(NetworkError):
        Transport(timeout=0.5).get("http://127.0.0.1:1/REST/projects")
