"""Embedded HTTP server that serves an archive fixture.

Implements the resource hierarchy (GET/PUT/DELETE), the search endpoint
(POST of an XML query document), schema introspection listings, saved
search and template stores, project management endpoints, and
Last-Modified/If-Modified-Since handling on file bodies.  Every request
is recorded in ``request_log`` so tests can assert traffic patterns.
"""

from __future__ import annotations

import base64
import csv
import errno
import io
import json
import threading
from email.utils import formatdate, parsedate_to_datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import NamedTuple
from urllib.parse import parse_qs, unquote, urlsplit

from .. import vocab
from ..errors import PortUnavailable
from ..hierarchy import DEFAULT_HIERARCHY, Hierarchy
from .criteria import BadQueryDocument, evaluate, parse_document
from .fixture import ArchiveFixture, Entity

DEFAULT_LISTING_COLUMNS = ("ID", "label")


class _HttpError(Exception):
    def __init__(self, status: int, message: str = ""):
        self.status = status
        self.message = message
        super().__init__(message)


class _Reply(NamedTuple):
    status: int
    content_type: str
    body: bytes
    headers: dict


def _reply(status=200, content_type="text/plain", body=b"", headers=None) -> _Reply:
    if isinstance(body, str):
        body = body.encode("utf-8")
    return _Reply(status, content_type, body, headers or {})


class LoggedRequest(NamedTuple):
    method: str
    path: str
    status: int
    body_len: int


class MockXnat:
    """A running mock archive bound to an ephemeral (or chosen) port."""

    def __init__(self, fixture: ArchiveFixture, port: int = 0,
                 hierarchy: Hierarchy = DEFAULT_HIERARCHY):
        self.fixture = fixture
        self.hierarchy = hierarchy
        self._requested_port = port
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self._write_lock = threading.RLock()
        self._log_lock = threading.Lock()
        self.request_log: list[LoggedRequest] = []

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "MockXnat":
        handler = _make_handler(self)
        try:
            self._server = ThreadingHTTPServer(("127.0.0.1", self._requested_port), handler)
        except OSError as exc:
            if exc.errno in (errno.EADDRINUSE, errno.EACCES):
                raise PortUnavailable(f"cannot bind port {self._requested_port}: {exc}") from exc
            raise
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "MockXnat":
        return self.start() if self._server is None else self

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def port(self) -> int:
        assert self._server is not None, "server not started"
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def replace_fixture(self, fixture: ArchiveFixture) -> None:
        with self._write_lock:
            self.fixture = fixture

    # -- request log ----------------------------------------------------------

    def record(self, method: str, path: str, status: int, body_len: int) -> None:
        with self._log_lock:
            self.request_log.append(LoggedRequest(method, path, status, body_len))

    def clear_log(self) -> None:
        with self._log_lock:
            self.request_log.clear()

    def requests_matching(self, fragment: str) -> list[LoggedRequest]:
        with self._log_lock:
            return [r for r in self.request_log if fragment in r.path]

    # -- authentication --------------------------------------------------------

    def authenticate(self, header: str | None) -> str:
        """Resolve the requesting user; '' means anonymous."""
        if not self.fixture.users:
            return ""
        if not header or not header.startswith("Basic "):
            raise _HttpError(401, "authentication required")
        try:
            decoded = base64.b64decode(header[6:]).decode("utf-8")
            login, _, secret = decoded.partition(":")
        except (ValueError, UnicodeDecodeError):
            raise _HttpError(401, "bad authorization header") from None
        if self.fixture.users.get(login) != secret:
            raise _HttpError(401, "bad credentials")
        return login

    def _gate_admin(self, user: str) -> None:
        if self.fixture.admin and user != self.fixture.admin:
            raise _HttpError(403, "operation restricted to the project owner")

    # -- routing ----------------------------------------------------------------

    def handle(self, method: str, path: str, query: dict, body: bytes, user: str) -> _Reply:
        if path == vocab.REST_PREFIX or path == vocab.REST_PREFIX + "/":
            tokens: list[str] = []
        elif path.startswith(vocab.REST_PREFIX + "/"):
            tokens = [unquote(t) for t in path[len(vocab.REST_PREFIX) + 1:].split("/") if t]
        else:
            raise _HttpError(404, "not an archive path")

        if not tokens:
            if method != "GET":
                raise _HttpError(400, "root supports GET only")
            return self._root_listing(query)
        if tokens[0] == "search":
            return self._handle_search(method, tokens, query, body, user)
        if tokens[0] == "projects" and len(tokens) >= 3 and tokens[2] in ("accessibility", "users"):
            return self._handle_manage(method, tokens, user)
        return self._handle_tree(method, tokens, query, body)

    def _root_listing(self, query: dict) -> _Reply:
        rows = [[name] for name in self.hierarchy.roots]
        return _tabular(["name"], rows, query)

    # -- hierarchy ---------------------------------------------------------------

    def _walk(self, tokens: list[str]):
        """Resolve alternating level/id tokens against the tree.

        Returns one of
          ("collection", parent_entity_or_None, level, lineage)
          ("element", entity, ancestors)
          ("creatable", parent_entity_or_None, level, ident)
        and raises 404 for unknown levels or missing intermediate entities.
        """
        parent: Entity | None = None
        lineage: list[Entity] = []
        i = 0
        while i < len(tokens):
            level = tokens[i]
            allowed = self.hierarchy.roots if parent is None else self.hierarchy.children(parent.level)
            if level not in allowed:
                raise _HttpError(404, f"no level {level!r} here")
            if i + 1 >= len(tokens):
                return ("collection", parent, level, lineage)
            ident = tokens[i + 1]
            pool = self.fixture.projects if parent is None else parent.children.get(level, [])
            child = next((e for e in pool if e.id == ident or e.label == ident), None)
            if child is None:
                if i + 2 == len(tokens):
                    return ("creatable", parent, level, ident)
                raise _HttpError(404, f"{level}/{ident} not found")
            lineage.append(child)
            parent = child
            i += 2
        return ("element", lineage[-1], lineage[:-1])

    def _handle_tree(self, method: str, tokens: list[str], query: dict, body: bytes) -> _Reply:
        outcome = self._walk(tokens)

        if outcome[0] == "collection":
            _, parent, level, lineage = outcome
            if method != "GET":
                raise _HttpError(400, "collections support GET only")
            children = self.fixture.projects if parent is None else list(
                parent.children.get(level, [])
            )
            xsi = query.get(vocab.QUERY_XSI_TYPE)
            if xsi:
                children = [e for e in children if e.xsi_type == xsi]
            columns = query.get(vocab.QUERY_COLUMNS)
            columns = columns.split(",") if columns else list(DEFAULT_LISTING_COLUMNS)
            rows = [
                [_listing_value(entity, column, lineage) for column in columns]
                for entity in children
            ]
            return _tabular(columns, rows, query)

        if outcome[0] == "element":
            _, entity, ancestors = outcome
            if method == "GET":
                return self._element_get(entity, query)
            if method == "PUT":
                with self._write_lock:
                    _apply_entity_update(entity, query, body)
                return _reply(200)
            if method == "DELETE":
                with self._write_lock:
                    pool = self.fixture.projects if not ancestors else ancestors[-1].children[
                        entity.level
                    ]
                    pool.remove(entity)
                return _reply(200)
            raise _HttpError(400, f"{method} not supported on elements")

        _, parent, level, ident = outcome
        if method == "PUT":
            with self._write_lock:
                entity = Entity(level, ident)
                _apply_entity_update(entity, query, body)
                pool = self.fixture.projects if parent is None else parent.child_list(level)
                pool.append(entity)
            return _reply(201)
        raise _HttpError(404, f"{level}/{ident} not found")

    def _element_get(self, entity: Entity, query: dict) -> _Reply:
        if entity.level == "files":
            last_modified = entity.last_modified or formatdate(usegmt=True)
            headers = {"Last-Modified": last_modified}
            since = query.pop("__if_modified_since", None)
            if since and not _modified_since(last_modified, since):
                return _reply(304, "application/octet-stream", b"", headers)
            return _reply(200, "application/octet-stream", entity.content, headers)
        doc = {"ID": entity.id, "label": entity.label, "xsiType": entity.xsi_type or ""}
        doc.update(entity.metadata)
        return _reply(200, "application/json", json.dumps(doc))

    # -- search, introspection, stored queries -------------------------------------

    def _handle_search(self, method, tokens, query, body, user) -> _Reply:
        if len(tokens) == 1:
            if method != "POST":
                raise _HttpError(400, "the search endpoint accepts POST")
            return self._run_search(body, query)
        area = tokens[1]
        if area == "elements":
            if method != "GET":
                raise _HttpError(400, "schema listings accept GET")
            if len(tokens) == 2:
                rows = [[name] for name in sorted(self.fixture.schema)]
                return _tabular(["name"], rows, query)
            datatype = tokens[2]
            if datatype not in self.fixture.schema:
                raise _HttpError(404, f"unknown datatype {datatype!r}")
            rows = [[f"{datatype}/{field}"] for field in self.fixture.schema[datatype]]
            return _tabular(["field"], rows, query)
        if area in ("saved", "templates"):
            store = self.fixture.saved_searches if area == "saved" else self.fixture.templates
            return self._handle_store(store, method, tokens, query, body, user)
        raise _HttpError(404, f"unknown search area {area!r}")

    def _handle_store(self, store, method, tokens, query, body, user) -> _Reply:
        def visible(record):
            return (
                record["owner"] == user
                or user in record["shared"]
                or "*" in record["shared"]
            )

        if len(tokens) == 2:
            if method != "GET":
                raise _HttpError(400, "stored-search listings accept GET")
            rows = [[name] for name in sorted(store) if visible(store[name])]
            return _tabular(["name"], rows, query)
        name = tokens[2]
        if method == "PUT":
            shared = [s for s in query.get("__share", "").split(",") if s]
            with self._write_lock:
                status = 200 if name in store else 201
                store[name] = {"owner": user, "shared": shared, "xml": body}
            return _reply(status)
        if method == "GET":
            record = store.get(name)
            if record is None or not visible(record):
                raise _HttpError(404, f"no stored search {name!r}")
            return _reply(200, "text/xml", record["xml"])
        raise _HttpError(400, f"{method} not supported for stored searches")

    def _run_search(self, body: bytes, query: dict) -> _Reply:
        try:
            row_type, columns, criteria = parse_document(body)
        except BadQueryDocument as exc:
            raise _HttpError(400, str(exc)) from exc
        rows = []
        for entity, ancestors in self.fixture.entities_of_type(row_type):
            resolver = _field_resolver(entity, ancestors)
            if evaluate(criteria, resolver):
                rows.append([resolver(column) or "" for column in columns])
        return _tabular(columns, rows, query)

    # -- management -------------------------------------------------------------

    def _handle_manage(self, method: str, tokens: list[str], user: str) -> _Reply:
        project = self.fixture.find_project(tokens[1])
        if project is None:
            raise _HttpError(404, f"no project {tokens[1]!r}")
        area = tokens[2]

        if area == "accessibility":
            if method == "GET" and len(tokens) == 3:
                return _reply(200, "text/plain", project.accessibility)
            if method == "PUT" and len(tokens) == 4:
                level = tokens[3]
                if level not in vocab.ACCESSIBILITY_LEVELS:
                    raise _HttpError(400, f"unknown accessibility level {level!r}")
                self._gate_admin(user)
                with self._write_lock:
                    project.accessibility = level
                return _reply(200)
            raise _HttpError(400, "bad accessibility request")

        if method == "GET" and len(tokens) == 3:
            rows = [[login, role] for login, role in sorted(project.members.items())]
            return _tabular(["login", "role"], rows, {})
        if len(tokens) == 5:
            role, login = tokens[3], tokens[4]
            if role not in vocab.USER_ROLES:
                raise _HttpError(400, f"unknown role {role!r}")
            self._gate_admin(user)
            if method == "PUT":
                with self._write_lock:
                    status = 200 if login in project.members else 201
                    project.members[login] = role
                return _reply(status)
            if method == "DELETE":
                with self._write_lock:
                    if project.members.get(login) != role:
                        raise _HttpError(404, f"{login!r} does not hold role {role!r}")
                    del project.members[login]
                return _reply(200)
        raise _HttpError(400, "bad membership request")


# -- helpers --------------------------------------------------------------------

def _listing_value(entity: Entity, column: str, lineage: list[Entity]) -> str:
    if column == "ID":
        return entity.id
    if column == "label":
        return entity.label
    if column == "xsiType":
        return entity.xsi_type or ""
    if column == "project":
        if entity.level == "projects":
            return entity.id
        return next((a.id for a in lineage if a.level == "projects"), "")
    if column == "Size" and entity.level == "files":
        return str(len(entity.content))
    return str(entity.metadata.get(column, ""))


def _field_resolver(entity: Entity, ancestors: list[Entity]):
    def resolve(schema_field: str):
        if "/" not in schema_field:
            return None
        datatype, field = schema_field.split("/", 1)
        if entity.datatype == datatype:
            return entity.metadata.get(field)
        for ancestor in reversed(ancestors):
            if ancestor.datatype == datatype:
                return ancestor.metadata.get(field)
        return None

    return resolve


def _tabular(columns: list[str], rows: list[list[str]], query: dict) -> _Reply:
    fmt = query.get(vocab.QUERY_FORMAT, "csv")
    if fmt == "json":
        payload = {
            "columns": columns,
            vocab.JSON_RESULT_KEY: [dict(zip(columns, row)) for row in rows],
        }
        return _reply(200, "application/json", json.dumps(payload))
    if fmt != "csv":
        raise _HttpError(400, f"unknown format {fmt!r}")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(columns)
    writer.writerows(rows)
    return _reply(200, "text/csv", out.getvalue())


def _apply_entity_update(entity: Entity, query: dict, body: bytes) -> None:
    if entity.level == "files":
        entity.content = body or b""
        entity.last_modified = formatdate(usegmt=True)
        return
    xsi = query.get(vocab.QUERY_XSI_TYPE)
    if xsi:
        entity.xsi_type = xsi
    for key, value in query.items():
        if key not in (vocab.QUERY_XSI_TYPE, vocab.QUERY_FORMAT, vocab.QUERY_COLUMNS) \
                and not key.startswith("__"):
            entity.metadata[key] = value


def _modified_since(last_modified: str, if_modified_since: str) -> bool:
    """True when the stored date is strictly newer than the client's date."""
    try:
        stored = parsedate_to_datetime(last_modified)
        given = parsedate_to_datetime(if_modified_since)
    except (TypeError, ValueError):
        return True
    return stored > given


def _make_handler(mock: MockXnat):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "mockxnat/0.1"

        def log_message(self, *args):  # quiet; the mock keeps its own log
            pass

        def _dispatch(self, method: str) -> None:
            parts = urlsplit(self.path)
            query = {k: v[0] for k, v in parse_qs(parts.query, keep_blank_values=True).items()}
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            try:
                user = mock.authenticate(self.headers.get("Authorization"))
                # Tunnel relevant request headers to the router via query.
                if self.headers.get("If-Modified-Since"):
                    query["__if_modified_since"] = self.headers["If-Modified-Since"]
                if self.headers.get(vocab.SHARE_HEADER):
                    query["__share"] = self.headers[vocab.SHARE_HEADER]
                reply = mock.handle(method, parts.path, query, body, user)
            except _HttpError as exc:
                reply = _reply(exc.status, "text/plain", exc.message)
            self.send_response(reply.status)
            self.send_header("Content-Type", reply.content_type)
            self.send_header("Content-Length", str(len(reply.body)))
            if reply.status == 401:
                self.send_header("WWW-Authenticate", 'Basic realm="mockxnat"')
            for name, value in reply.headers.items():
                self.send_header(name, value)
            self.end_headers()
            if reply.body:
                self.wfile.write(reply.body)
            mock.record(method, parts.path, reply.status, len(reply.body))

        def do_GET(self):
            self._dispatch("GET")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_POST(self):
            self._dispatch("POST")

        def do_DELETE(self):
            self._dispatch("DELETE")

    return Handler
