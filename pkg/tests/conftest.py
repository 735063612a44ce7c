import numpy as np
import pytest

from voidinspect.segment import BallRegion
from voidinspect.synth import SynthSpec, generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def one_ball(voids=(), noise=0.0, contrast=7, seed=0):
    """Synthetic single-ball image, its truth, and the truth ball as a BallRegion."""
    img, truth = generate(SynthSpec(voids=tuple(voids), noise_sigma=noise, void_contrast=contrast, seed=seed))
    tb = truth.balls[0]
    return img, truth, BallRegion(tb.center, tb.radius)
