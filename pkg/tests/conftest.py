import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from obx import kernels
from obx.geometry import OrientedBox

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    mod = kernels.load_backend(request.param)
    for name in kernels._NAMES:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def random_box(rng, span=100.0, hmin=2.0, hmax=40.0, aspect=(1.0, 5.0)):
    h = rng.uniform(hmin, hmax)
    return OrientedBox(rng.uniform(-span, span), rng.uniform(-span, span),
                       h * rng.uniform(*aspect), h, rng.uniform(0, math.pi))


coords = st.floats(-500, 500, allow_nan=False)
sides = st.floats(0.5, 200, allow_nan=False)
angles = st.floats(0, math.pi, allow_nan=False, exclude_max=True)


@st.composite
def boxes(draw):
    return OrientedBox(draw(coords), draw(coords), draw(sides), draw(sides), draw(angles))
