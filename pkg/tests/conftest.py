from datetime import datetime, timezone

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

UTC = timezone.utc


@pytest.fixture
def t0():
    return datetime(2017, 11, 20, tzinfo=UTC)
