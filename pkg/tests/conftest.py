import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _isolated_cache(monkeypatch, tmp_path):
    # keep the on-disk Y_n memo out of the user's environment
    monkeypatch.setenv("NLSHIER_CACHE_DIR", str(tmp_path / "ycache"))
