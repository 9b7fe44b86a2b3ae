"""Validating disk cache layered under the object mapper.

Listings and metadata responses are reused within an expiration window
(default one second) and re-downloaded once stale.  File bodies carry a
Last-Modified validator, so a stale entry costs only a conditional GET
answered with 304 when unchanged.  With ``offline=True`` every request is
served from disk and never touches the network.

On-disk layout, stable and documented: ``<dir>/<sha256(key)>.body`` holds
the raw body, ``<dir>/<sha256(key)>.meta`` a JSON record ``{key,
fetched_at, last_modified, content_type}``.  The key is the URI path plus
its query pairs sorted lexicographically.

The cache directory belongs to one process at a time; a lock file rejects
concurrent use from a second process.  Within a process, fetches of the
same key coalesce into a single network call.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple
from urllib.parse import urlsplit

from .errors import CacheError, OfflineMiss
from .transport import Request, Response, Transport

DEFAULT_EXPIRATION = 1.0
LOCK_NAME = ".lock"


def canonical_key(uri: str) -> str:
    """URI path plus lexicographically sorted query string."""
    parts = urlsplit(uri)
    if not parts.query:
        return parts.path
    pairs = sorted(parts.query.split("&"))
    return parts.path + "?" + "&".join(pairs)


@dataclass
class CacheEntry:
    key: str
    body_path: str
    fetched_at: float
    last_modified: str | None
    content_type: str

    def read_body(self) -> bytes:
        with open(self.body_path, "rb") as fh:
            return fh.read()

    def as_response(self) -> Response:
        headers = {"Content-Type": self.content_type}
        if self.last_modified:
            headers["Last-Modified"] = self.last_modified
        return Response(200, headers, self.read_body())


class FetchResult(NamedTuple):
    response: Response
    provenance: str  # "network", "cache", or "validated"


class Cache:
    """Disk-backed response cache bound to one transport."""

    def __init__(
        self,
        directory: str,
        transport: Transport,
        expiration_window: float = DEFAULT_EXPIRATION,
        offline: bool = False,
        clock: Callable[[], float] = time.time,
    ):
        self.directory = os.path.abspath(directory)
        self.transport = transport
        self.expiration_window = expiration_window
        self.offline = offline
        self.clock = clock
        os.makedirs(self.directory, exist_ok=True)
        self._acquire_dir_lock()
        self._master = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self._closed = False

    # -- single-process ownership ------------------------------------------

    def _lock_path(self) -> str:
        return os.path.join(self.directory, LOCK_NAME)

    def _acquire_dir_lock(self) -> None:
        path = self._lock_path()
        while True:
            try:
                fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                if self._lock_is_stale(path):
                    continue
                raise CacheError(
                    f"cache directory {self.directory} is in use by another process"
                ) from None
            with os.fdopen(fd, "w") as fh:
                fh.write(str(os.getpid()))
            return

    def _lock_is_stale(self, path: str) -> bool:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                pid = int(fh.read().strip() or "0")
        except (OSError, ValueError):
            pid = 0
        if pid == os.getpid():
            raise CacheError(f"cache directory {self.directory} already opened by this process")
        alive = False
        if pid > 0:
            try:
                os.kill(pid, 0)
                alive = True
            except ProcessLookupError:
                alive = False
            except PermissionError:
                alive = True
        if alive:
            return False
        try:
            os.unlink(path)
        except FileNotFoundError:
            pass
        return True

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            os.unlink(self._lock_path())
        except FileNotFoundError:
            pass

    def __enter__(self) -> "Cache":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- entry storage ------------------------------------------------------

    def _digest(self, key: str) -> str:
        return hashlib.sha256(key.encode("utf-8")).hexdigest()

    def _paths(self, key: str) -> tuple[str, str]:
        digest = self._digest(key)
        return (
            os.path.join(self.directory, digest + ".body"),
            os.path.join(self.directory, digest + ".meta"),
        )

    def _load(self, key: str) -> CacheEntry | None:
        body_path, meta_path = self._paths(key)
        try:
            with open(meta_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            return None
        except (OSError, ValueError) as exc:
            raise CacheError(f"corrupt cache metadata for {key}: {exc}") from exc
        if meta.get("key") != key or not os.path.exists(body_path):
            return None
        return CacheEntry(
            key=key,
            body_path=body_path,
            fetched_at=float(meta["fetched_at"]),
            last_modified=meta.get("last_modified"),
            content_type=meta.get("content_type", "application/octet-stream"),
        )

    def _atomic_write(self, path: str, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except OSError as exc:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
            raise CacheError(f"failed to persist cache entry: {exc}") from exc

    def _store(self, key: str, response: Response) -> CacheEntry:
        body_path, meta_path = self._paths(key)
        self._atomic_write(body_path, response.body)
        meta = {
            "key": key,
            "fetched_at": self.clock(),
            "last_modified": response.header("Last-Modified"),
            "content_type": response.header("Content-Type") or "application/octet-stream",
        }
        self._atomic_write(meta_path, json.dumps(meta).encode("utf-8"))
        return CacheEntry(key, body_path, meta["fetched_at"], meta["last_modified"],
                          meta["content_type"])

    def _touch(self, entry: CacheEntry) -> None:
        _, meta_path = self._paths(entry.key)
        entry.fetched_at = self.clock()
        meta = {
            "key": entry.key,
            "fetched_at": entry.fetched_at,
            "last_modified": entry.last_modified,
            "content_type": entry.content_type,
        }
        self._atomic_write(meta_path, json.dumps(meta).encode("utf-8"))

    def _key_lock(self, key: str) -> threading.Lock:
        with self._master:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = self._key_locks[key] = threading.Lock()
            return lock

    # -- fetch --------------------------------------------------------------

    def fetch(
        self,
        req: Request,
        expiration_window: float | None = None,
        offline: bool | None = None,
    ) -> FetchResult:
        """Serve a GET through the cache.

        Returns the response plus a provenance flag: ``cache`` (served from
        disk without network), ``validated`` (304 revalidation confirmed the
        cached body), or ``network`` (body came over the wire).
        """
        if req.method.upper() != "GET":
            raise CacheError(f"cache only serves GET, not {req.method}")
        window = self.expiration_window if expiration_window is None else expiration_window
        offline = self.offline if offline is None else offline
        key = canonical_key(req.uri)

        entered_at = self.clock()
        with self._key_lock(key):
            entry = self._load(key)
            if offline:
                if entry is None:
                    raise OfflineMiss(f"offline mode and no cache entry for {key}")
                return FetchResult(entry.as_response(), "cache")

            if entry is not None:
                # A fetch that finished while we waited on the key lock
                # counts as fresh: concurrent fetches coalesce.
                if entry.fetched_at >= entered_at or self.clock() - entry.fetched_at < window:
                    return FetchResult(entry.as_response(), "cache")
                if entry.last_modified:
                    headers = dict(req.headers)
                    headers["If-Modified-Since"] = entry.last_modified
                    response = self.transport.execute(
                        Request("GET", req.uri, headers=headers)
                    )
                    if response.status == 304:
                        self._touch(entry)
                        return FetchResult(entry.as_response(), "validated")
                    if response.ok:
                        self._store(key, response)
                    return FetchResult(response, "network")

            response = self.transport.execute(Request("GET", req.uri, headers=dict(req.headers)))
            if response.ok:
                self._store(key, response)
            return FetchResult(response, "network")

    def body_path(self, uri: str) -> str | None:
        """Filesystem location of the cached body for a URI, if present."""
        entry = self._load(canonical_key(uri))
        return entry.body_path if entry else None

    # -- maintenance ---------------------------------------------------------

    def keys(self) -> list[str]:
        found = []
        for name in os.listdir(self.directory):
            if not name.endswith(".meta"):
                continue
            try:
                with open(os.path.join(self.directory, name), "r", encoding="utf-8") as fh:
                    found.append(json.load(fh)["key"])
            except (OSError, ValueError, KeyError):
                continue
        return sorted(found)

    def entry_count(self) -> int:
        return len(self.keys())

    def clear(self, prefix: str | None = None) -> int:
        """Remove entries (all, or those whose key starts with ``prefix``)."""
        removed = 0
        for key in self.keys():
            if prefix is not None and not key.startswith(prefix):
                continue
            body_path, meta_path = self._paths(key)
            try:
                os.unlink(meta_path)
                if os.path.exists(body_path):
                    os.unlink(body_path)
            except OSError as exc:
                raise CacheError(f"failed to remove cache entry {key}: {exc}") from exc
            removed += 1
        return removed
