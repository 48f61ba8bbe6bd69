import numpy as np
import pytest

from envmorph.envelope import FRAME_COUNT, Envelope


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_envelope(rng, smooth: bool = False) -> Envelope:
    frames = rng.random(FRAME_COUNT)
    if smooth:
        kernel = np.ones(9) / 9.0
        frames = np.convolve(frames, kernel, mode="same")
    return Envelope(np.clip(frames, 0.0, 1.0).astype(np.float32))
