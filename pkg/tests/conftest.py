"""Fixtures for the primary suite; importable helpers live in helpers.py."""

import pytest

from expio.schema import get_schema


@pytest.fixture
def subtask1():
    return get_schema("subtask1")


@pytest.fixture
def subtask2():
    return get_schema("subtask2")
