"""Embedded fixture-driven mock archive server used as the test oracle."""

from .fixture import ArchiveFixture, Entity, default_fixture, load_fixture
from .server import MockXnat

__all__ = ["ArchiveFixture", "Entity", "MockXnat", "default_fixture", "load_fixture"]
