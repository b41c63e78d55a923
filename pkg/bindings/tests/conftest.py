import pytest

from bindings_testutil import write_config_file


@pytest.fixture
def write_config(tmp_path):
    """Write a config JSON into tmp_path (FULL_CONFIG plus overrides;
    an override of None deletes the key)."""

    def _write(name="config.json", **overrides):
        return write_config_file(tmp_path / name, **overrides)

    return _write


@pytest.fixture(scope="session")
def handle(tmp_path_factory):
    db = pytest.importorskip("devdiet_bindings")
    path = write_config_file(tmp_path_factory.mktemp("handle") / "config.json")
    return db.make_handle(path)
