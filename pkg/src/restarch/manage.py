"""Project administration: accessibility levels and user roles."""

from __future__ import annotations

from . import vocab
from .errors import Forbidden, NotFound, RestArchError, ValidationError
from .search import ResultTable
from .transport import Request


def _check(response, what: str):
    if response.ok:
        return response
    if response.status == 404:
        raise NotFound(what)
    if response.status == 403:
        raise Forbidden(what)
    if response.status == 400:
        raise ValidationError(f"{what}: rejected by the server")
    raise RestArchError(f"{what}: status {response.status}")


class ProjectAdmin:
    """Accessibility and membership operations on one project."""

    def __init__(self, interface, project_id: str):
        self._interface = interface
        self.project_id = project_id

    def _uri(self, suffix: str) -> str:
        return (self._interface.base_url + vocab.REST_PREFIX
                + f"/projects/{self.project_id}" + suffix)

    def set_accessibility(self, level: str) -> None:
        if level not in vocab.ACCESSIBILITY_LEVELS:
            raise ValidationError(
                f"accessibility must be one of {vocab.ACCESSIBILITY_LEVELS}, got {level!r}"
            )
        response = self._interface.transport.execute(
            Request("PUT", self._uri(f"/accessibility/{level}"))
        )
        _check(response, f"set accessibility of {self.project_id}")

    def get_accessibility(self) -> str:
        response = self._interface.transport.get(self._uri("/accessibility"))
        _check(response, f"get accessibility of {self.project_id}")
        return response.text().strip()

    def add_user(self, user: str, role: str) -> None:
        if role not in vocab.USER_ROLES:
            raise ValidationError(f"role must be one of {vocab.USER_ROLES}, got {role!r}")
        response = self._interface.transport.execute(
            Request("PUT", self._uri(f"/users/{role}/{user}"))
        )
        _check(response, f"add {user} to {self.project_id}")

    def remove_user(self, user: str) -> None:
        role = self.users().get(user)
        if role is None:
            raise NotFound(f"{user} is not a member of {self.project_id}")
        response = self._interface.transport.execute(
            Request("DELETE", self._uri(f"/users/{role}/{user}"))
        )
        _check(response, f"remove {user} from {self.project_id}")

    def users(self) -> dict[str, str]:
        """Current membership as a login -> role map."""
        response = self._interface.transport.get(self._uri("/users"))
        _check(response, f"list users of {self.project_id}")
        table = ResultTable.from_csv(response.text())
        return dict(zip(table.column("login"), table.column("role")))


class Manage:
    """Entry point mirroring the server's administration surface."""

    def __init__(self, interface):
        self._interface = interface
        self.search = interface.search

    def project(self, project_id: str) -> ProjectAdmin:
        return ProjectAdmin(self._interface, project_id)
