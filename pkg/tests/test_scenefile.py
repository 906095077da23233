from pathlib import Path

import numpy as np
import pytest

from evprep import simulate_events
from evprep.errors import FormatError
from evprep.scenefile import load_scene, parse_scene_text
from conftest import disc_scene

SCENES = Path(__file__).resolve().parent.parent / "scenes"


def test_disc_scene_file_matches_programmatic():
    scene, noise = load_scene(SCENES / "disc.scene")
    assert noise is None
    ref = disc_scene()
    assert scene.geometry == ref.geometry
    assert scene.objects[0].knots == ref.objects[0].knots
    assert np.array_equal(simulate_events(scene), simulate_events(ref))


def test_noise_section():
    _, noise = load_scene(SCENES / "noisy_disc.scene")
    assert noise is not None
    assert noise.hot_pixels == [(2, 2, 1, 500.0)]
    assert noise.background_rate == 1.0
    assert noise.deterministic


def test_missing_section():
    with pytest.raises(FormatError, match=r"\[scene\]"):
        parse_scene_text("[geometry]\nwidth = 4\nheight = 4\n")


def test_missing_key_named():
    text = (
        "[geometry]\nwidth = 4\nheight = 4\n"
        "[scene]\nbackground = 0\nthreshold = 1\nduration_us = 1000\n"
    )
    with pytest.raises(FormatError, match="sample_interval_us"):
        parse_scene_text(text)


def test_bad_value_named():
    text = (
        "[geometry]\nwidth = abc\nheight = 4\n"
        "[scene]\nbackground = 0\nthreshold = 1\nduration_us = 1000\n"
        "sample_interval_us = 100\n"
    )
    with pytest.raises(FormatError, match="width"):
        parse_scene_text(text)


def test_bad_knot_entry():
    text = (
        "[geometry]\nwidth = 4\nheight = 4\n"
        "[scene]\nbackground = 0\nthreshold = 1\nduration_us = 1000\n"
        "sample_interval_us = 100\n"
        "[disc1]\nradius = 1\nlogintensity = 1\nknots = 0-3,4\n"
    )
    with pytest.raises(FormatError, match="knots"):
        parse_scene_text(text)


def test_missing_file():
    with pytest.raises(FormatError):
        load_scene("/nonexistent/path.scene")
