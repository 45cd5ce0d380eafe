import numpy as np
import pytest

from hsdr.synth import ClassSpec, SceneSpec, generate

ACCEPTANCE_LINES = []


def small_scene_spec(seed=0, n_classes=4, bands=12, width=30, height=20, fractions=None):
    rng = np.random.default_rng(1000 + seed)
    if fractions is None:
        fractions = [0.8 / n_classes] * n_classes
    classes = [
        ClassSpec(
            mean=rng.normal(5.0, 2.0, bands),
            pixel_fraction=f,
            covariance_scale=1.0,
            axes=rng.normal(0.0, 1.0, (2, bands)),
        )
        for f in fractions
    ]
    return SceneSpec(width, height, bands, classes, noise_sigma=0.2, seed=seed)


@pytest.fixture
def small_scene():
    return generate(small_scene_spec())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
