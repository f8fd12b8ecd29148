from __future__ import annotations

import pytest

from clustersend import SystemSpec


@pytest.fixture
def byz():
    def make(n1, f1, n2, f2, signing="cluster"):
        return SystemSpec.of(n1, f1, n2, f2, "byzantine", signing)
    return make
