"""Exception hierarchy for the restarch client and mock server."""


class RestArchError(Exception):
    """Base class for every error raised by this package."""


class InvalidPath(RestArchError):
    """A resource path violates the configured hierarchy."""


class ParseError(RestArchError):
    """A selector string or tabular payload could not be parsed."""


class AmbiguousShortcut(RestArchError):
    """A ``//`` shortcut has more than one shortest expansion chain."""


class CriteriaError(RestArchError):
    """A nested-list criteria expression is malformed."""


class SearchError(RestArchError):
    """The search endpoint rejected a query."""


class NetworkError(RestArchError):
    """The server was unreachable, timed out, or redirected too often."""


class AuthError(RestArchError):
    """The server rejected the supplied credentials (HTTP 401)."""


class MethodNotAllowed(RestArchError):
    """HTTP verb not permitted for this resource kind; raised client-side."""


class CacheError(RestArchError):
    """Disk cache I/O failure or cache directory contention."""


class OfflineMiss(CacheError):
    """Offline mode requested a resource that was never cached."""


class NotFound(RestArchError):
    """The addressed element does not exist on the server."""


class Conflict(RestArchError):
    """The server reported a conflicting state for a write (HTTP 409)."""


class Forbidden(RestArchError):
    """The server refused the operation for this user (HTTP 403)."""


class ValidationError(RestArchError):
    """A client-side argument check failed before any network call."""


class UnknownDatatype(RestArchError):
    """Introspection was asked about a datatype the schema does not define."""


class UnknownField(RestArchError):
    """Introspection was asked about a field the schema does not define."""


class MissingBinding(RestArchError):
    """A search template was used without values for some of its keys."""

    def __init__(self, keys):
        self.keys = frozenset(keys)
        super().__init__("missing bindings for template keys: %s" % ", ".join(sorted(self.keys)))


class PortUnavailable(RestArchError):
    """The mock server could not bind its requested port."""


class FixtureError(RestArchError):
    """An archive fixture document violates the fixture schema."""
