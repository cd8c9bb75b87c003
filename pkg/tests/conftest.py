import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from neutrality_kit.alignment import Alignment
from neutrality_kit.demo import demo_alignment


@pytest.fixture
def table_fixture() -> Alignment:
    """The bundled 5-sequence, 16-site worked example."""
    return demo_alignment()


def random_alignment(rng: np.random.Generator, n: int, k: int, c: int = 4) -> Alignment:
    codes = rng.integers(0, c, size=(n, k)).astype(np.uint8)
    labels = tuple(f"s{i}" for i in range(n))
    return Alignment(labels=labels, codes=codes, site_index=np.arange(1, k + 1))
