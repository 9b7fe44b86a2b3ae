"""HTTP transport: the single seam between client logic and the network.

Enforces REST verb semantics client-side (collections are read-only,
elements accept GET/PUT/DELETE, only the search endpoint takes POST),
attaches HTTP Basic credentials, and keeps per-method call counters plus
an ordered call log so tests can assert exactly when the network was
touched.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from urllib.parse import urlsplit

import requests

from . import vocab
from .errors import AuthError, InvalidPath, MethodNotAllowed, NetworkError
from .hierarchy import DEFAULT_HIERARCHY, Hierarchy, parse_path

DEFAULT_TIMEOUT = 30.0
MAX_REDIRECTS = 5

METHODS = ("GET", "PUT", "POST", "DELETE")


@dataclass(frozen=True)
class Request:
    method: str
    uri: str
    body: bytes | None = None
    headers: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Response:
    status: int
    headers: dict[str, str]
    body: bytes

    def header(self, name: str) -> str | None:
        lowered = name.lower()
        for key, value in self.headers.items():
            if key.lower() == lowered:
                return value
        return None

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300

    def text(self, encoding: str = "utf-8") -> str:
        return self.body.decode(encoding)


def _allowed_methods(uri: str, hierarchy: Hierarchy) -> tuple[str, ...]:
    path = urlsplit(uri).path
    if not path.startswith(vocab.REST_PREFIX):
        return METHODS
    rest = path[len(vocab.REST_PREFIX):]
    if rest == vocab.SEARCH_PATH:
        return ("POST",)
    try:
        parsed = parse_path(rest, hierarchy)
    except InvalidPath:
        # Search, introspection, and management endpoints sit outside the
        # hierarchy; they police their own verbs server-side.
        return ("GET", "PUT", "DELETE")
    if parsed.kind == "element":
        return ("GET", "PUT", "DELETE")
    return ("GET",)


class Transport:
    """Issues HTTP calls; one instance supports concurrent requests.

    ``disable_network=True`` turns every call into a NetworkError, which is
    how offline-mode behavior is verified end to end.
    """

    def __init__(
        self,
        credentials: tuple[str, str] | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        hierarchy: Hierarchy = DEFAULT_HIERARCHY,
        disable_network: bool = False,
    ):
        self.credentials = credentials or None
        self.timeout = timeout
        self.hierarchy = hierarchy
        self.disable_network = disable_network
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {}
        self._calls: list[tuple[str, str]] = []
        self._local = threading.local()

    def _session(self) -> requests.Session:
        # requests sessions are not guaranteed thread-safe; keep one per thread.
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            session.max_redirects = MAX_REDIRECTS
            self._local.session = session
        return session

    def _record(self, method: str, uri: str) -> None:
        with self._lock:
            self._counts[method] = self._counts.get(method, 0) + 1
            self._calls.append((method, uri))

    def execute(self, req: Request) -> Response:
        """Send a request and return the server response verbatim.

        Raises MethodNotAllowed before any network call for verbs the
        resource kind forbids, NetworkError for unreachable/timeout/redirect
        storms, and AuthError when the server answers 401.
        """
        method = req.method.upper()
        if method not in METHODS:
            raise MethodNotAllowed(f"unsupported method {req.method!r}")
        if method not in _allowed_methods(req.uri, self.hierarchy):
            raise MethodNotAllowed(f"{method} not allowed on {req.uri}")
        if self.disable_network:
            raise NetworkError(f"network disabled: {method} {req.uri}")
        self._record(method, req.uri)
        try:
            raw = self._session().request(
                method,
                req.uri,
                data=req.body,
                headers=req.headers or None,
                auth=self.credentials,
                timeout=self.timeout,
                allow_redirects=True,
            )
        except requests.exceptions.TooManyRedirects as exc:
            raise NetworkError(f"too many redirects for {req.uri}") from exc
        except requests.exceptions.RequestException as exc:
            raise NetworkError(f"{method} {req.uri} failed: {exc}") from exc
        if raw.status_code == 401:
            raise AuthError(f"authentication failed for {req.uri}")
        return Response(raw.status_code, dict(raw.headers), raw.content)

    def get(self, uri: str, headers: dict[str, str] | None = None) -> Response:
        return self.execute(Request("GET", uri, headers=headers or {}))

    def call_count(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    @property
    def calls(self) -> list[tuple[str, str]]:
        with self._lock:
            return list(self._calls)

    def reset_counters(self) -> None:
        with self._lock:
            self._counts.clear()
            self._calls.clear()
