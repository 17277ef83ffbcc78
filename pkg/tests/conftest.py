import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from haarface.cascade import parse_cascade_xml, toy_cascade_bytes  # noqa: E402
from haarface.imaging import GrayImage  # noqa: E402

# 4x4 window with a bright right half and a brighter top half; the toy
# cascade accepts it. The anti-pattern is the same block rotated 180 degrees.
FACE_PATTERN = np.array(
    [[0, 0, 200, 200], [0, 0, 200, 200], [0, 0, 100, 100], [0, 0, 100, 100]], dtype=np.uint8
)
ANTI_PATTERN = FACE_PATTERN[::-1, ::-1].copy()


@pytest.fixture(scope="session")
def toy_model():
    return parse_cascade_xml(toy_cascade_bytes())


def planted_image(width=40, height=40, rect=(14, 10, 12, 12), background=128, noise=0, seed=0):
    """Constant (or noisy) background with the face pattern scaled into ``rect``."""
    rng = np.random.default_rng(seed)
    img = np.full((height, width), background, dtype=np.float64)
    if noise:
        img += rng.normal(0, noise, img.shape)
    x, y, w, h = rect
    ys = (np.arange(h) * 4 // h)[:, None]
    xs = (np.arange(w) * 4 // w)[None, :]
    img[y:y + h, x:x + w] = FACE_PATTERN[ys, xs]
    return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def texture_identity(seed, size=64):
    """Smooth random texture: a stand-in for one person's face."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0, 1, (6, 6))
    ys = np.linspace(0, 5, size)
    xs = np.linspace(0, 5, size)
    y0 = np.floor(ys).astype(int).clip(0, 4)
    x0 = np.floor(xs).astype(int).clip(0, 4)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    c = coarse
    field = (c[y0][:, x0] * (1 - fx) * (1 - fy) + c[y0][:, x0 + 1] * fx * (1 - fy)
             + c[y0 + 1][:, x0] * (1 - fx) * fy + c[y0 + 1][:, x0 + 1] * fx * fy)
    return 40 + 170 * field


def noisy_copy(field, sigma, seed):
    rng = np.random.default_rng(seed)
    return GrayImage(np.clip(np.rint(field + rng.normal(0, sigma, field.shape)), 0, 255).astype(np.uint8))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
