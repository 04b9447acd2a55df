"""Shared fixtures for unit tests."""

import logging

import pytest

from src.logging_config import ROOT_LOGGER_NAME, reset_logging_config
from src.tests.shared.utils import FIXTURES, build_tiny_model


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture(params=["lstm", "transformer"])
def architecture(request):
    """Run a test once per architecture."""
    return request.param


@pytest.fixture
def tiny_model(architecture):
    return build_tiny_model(architecture)


@pytest.fixture
def isolated_logging(tmp_path, monkeypatch):
    """Point file logging at a temporary directory and reset handlers around the test."""
    monkeypatch.setenv("TRAJECTORY_LM_LOG_DIR", str(tmp_path / "log"))
    reset_logging_config()
    # Start from a fresh (propagating) logger: pytest attaches its own capture
    # handlers to non-propagating loggers left over from earlier tests.
    monkeypatch.setattr(logging.getLogger(ROOT_LOGGER_NAME), "propagate", True)
    yield tmp_path / "log"
    # pytest closes capsys's per-phase capture streams before fixture teardown;
    # detach console handlers bound to them so the reset does not flush a closed file.
    root_logger = logging.getLogger(ROOT_LOGGER_NAME)
    for handler in root_logger.handlers[:]:
        if isinstance(handler, logging.StreamHandler) and getattr(handler.stream, "closed", False):
            root_logger.removeHandler(handler)
    reset_logging_config()
