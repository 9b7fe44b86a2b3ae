"""restarch: a client toolkit for XNAT-style neuroimaging REST archives.

Typical use::

    import restarch

    central = restarch.Interface("https://central.xnat.org")
    for subject in central.select("/projects/*/subjects"):
        print(subject.id)

    table = central.select(
        "xnat:mrSessionData",
        ["xnat:subjectData/LABEL", "xnat:mrSessionData/AGE"],
    ).where([("xnat:mrSessionData/AGE", ">", "80"), "AND"])
"""

from __future__ import annotations

import hashlib
import os
import time

from .cache import Cache
from .errors import *  # noqa: F401,F403 -- the package-level error surface
from .hierarchy import (
    DEFAULT_HIERARCHY,
    Hierarchy,
    QueryOptions,
    ResourcePath,
    build_uri,
    normalize_base,
    parse_path,
    validate_path,
)
from .inspection import Inspector
from .manage import Manage
from .mapper import CollectionHandle, ElementHandle, Select, SearchRunner
from .search import (
    Constraint,
    CriteriaSet,
    QuerySpec,
    ResultTable,
    SearchEngine,
    parse_criteria,
    to_xml,
    parse_xml,
)
from .selector import Selector, chain, parse
from .transport import Request, Response, Transport

__version__ = "0.1.0"


def default_cache_dir(base_url: str) -> str:
    digest = hashlib.sha256(base_url.encode("utf-8")).hexdigest()[:12]
    root = os.environ.get("RESTARCH_CACHE_DIR") or os.path.join(
        os.path.expanduser("~"), ".cache", "restarch"
    )
    return os.path.join(root, digest)


class Interface:
    """A configured connection: transport, cache, and all API entry points.

    Credentials may come from arguments or the RESTARCH_USER/RESTARCH_PASS
    environment variables.  ``offline=True`` serves everything from the
    cache directory and fails with OfflineMiss on unseen resources.
    """

    def __init__(
        self,
        url: str,
        user: str | None = None,
        password: str | None = None,
        cachedir: str | None = None,
        expiration_window: float = 1.0,
        offline: bool = False,
        timeout: float = 30.0,
        hierarchy: Hierarchy = DEFAULT_HIERARCHY,
        disable_network: bool = False,
        clock=time.time,
    ):
        self.base_url = normalize_base(url)
        self.hierarchy = hierarchy
        user = user if user is not None else os.environ.get("RESTARCH_USER")
        password = password if password is not None else os.environ.get("RESTARCH_PASS")
        credentials = (user, password or "") if user else None
        self.transport = Transport(
            credentials=credentials,
            timeout=timeout,
            hierarchy=hierarchy,
            disable_network=disable_network,
        )
        self.cache = Cache(
            cachedir or default_cache_dir(self.base_url),
            self.transport,
            expiration_window=expiration_window,
            offline=offline,
            clock=clock,
        )
        self.search = SearchEngine(self.base_url, self.transport)
        self.select = Select(self)
        self.inspect = Inspector(self)
        self.manage = Manage(self)

    def close(self) -> None:
        self.cache.close()

    def __enter__(self) -> "Interface":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
