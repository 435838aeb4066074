"""Shared fixtures: tiny scenes and a small trained model for fast tests."""

from __future__ import annotations

import numpy as np
import pytest

from ffcae.cube import SceneSpec, normalize_bands, synthesize_pair
from ffcae.model import FfcaeConfig, train


@pytest.fixture(scope="session")
def tiny_scene():
    """A 16x16x6 noisy pair with a planted region, plus its ground truth."""
    spec = SceneSpec(
        height=16, width=16, bands=6, change_fraction=0.2, noise_sigma=0.02, seed=7
    )
    return synthesize_pair(spec)


@pytest.fixture(scope="session")
def tiny_model(tiny_scene):
    """A briefly trained autoencoder on the tiny scene (seconds, not minutes)."""
    cube1, cube2, _ = tiny_scene
    config = FfcaeConfig(epochs=4, seed=7)
    model, history = train(normalize_bands(cube1), normalize_bands(cube2), config)
    return model, history


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
