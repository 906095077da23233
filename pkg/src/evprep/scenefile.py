"""Scene description files for the simulator.

INI-style key-value sections::

    [geometry]
    width = 64
    height = 48

    [scene]
    background = 0.0
    threshold = 1.0
    duration_us = 200000
    sample_interval_us = 1000

    [disc1]                      ; any section named disc* is one disc
    radius = 4
    logintensity = 1.5
    knots = 0:8,24 200000:56,24  ; t:cx,cy triples, whitespace-separated

    [noise]                      ; optional
    hot_pixels = 5,5,1,1000      ; x,y,p,rate entries, whitespace-separated
    background_rate = 0.0
    seed = 7
    deterministic = true
"""

from __future__ import annotations

import configparser

from evprep.errors import FormatError
from evprep.events import SensorGeometry
from evprep.simulate import MovingDisc, NoiseSpec, SceneSpec


def _get(section, key, cast, where):
    if key not in section:
        raise FormatError(f"{where}: missing key '{key}'")
    try:
        return cast(section[key])
    except ValueError as exc:
        raise FormatError(f"{where}: key '{key}': {exc}") from exc


def _parse_knots(text: str, where: str) -> list[tuple[int, float, float]]:
    knots = []
    for item in text.split():
        try:
            t_part, xy_part = item.split(":")
            cx, cy = xy_part.split(",")
            knots.append((int(t_part), float(cx), float(cy)))
        except ValueError as exc:
            raise FormatError(
                f"{where}: key 'knots': bad entry '{item}' (want t:cx,cy)"
            ) from exc
    if not knots:
        raise FormatError(f"{where}: key 'knots': no entries")
    return knots


def _parse_hot_pixels(text: str, where: str) -> list[tuple[int, int, int, float]]:
    pixels = []
    for item in text.split():
        try:
            x, y, p, rate = item.split(",")
            pixels.append((int(x), int(y), int(p), float(rate)))
        except ValueError as exc:
            raise FormatError(
                f"{where}: key 'hot_pixels': bad entry '{item}' (want x,y,p,rate)"
            ) from exc
    return pixels


def parse_scene_text(text: str, name: str = "<scene>") -> tuple[SceneSpec, NoiseSpec | None]:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise FormatError(str(exc)) from exc

    for required in ("geometry", "scene"):
        if required not in parser:
            raise FormatError(f"{name}: missing [{required}] section")

    geo_sec = parser["geometry"]
    geometry = SensorGeometry(
        _get(geo_sec, "width", int, f"{name} [geometry]"),
        _get(geo_sec, "height", int, f"{name} [geometry]"),
    )
    sc = parser["scene"]
    where = f"{name} [scene]"
    discs = []
    for sec_name in parser.sections():
        if not sec_name.startswith("disc"):
            continue
        dsec = parser[sec_name]
        dwhere = f"{name} [{sec_name}]"
        discs.append(
            MovingDisc(
                knots=_parse_knots(_get(dsec, "knots", str, dwhere), dwhere),
                radius=_get(dsec, "radius", float, dwhere),
                logintensity=_get(dsec, "logintensity", float, dwhere),
            )
        )
    try:
        scene = SceneSpec(
            geometry=geometry,
            background_logintensity=_get(sc, "background", float, where),
            objects=discs,
            duration_us=_get(sc, "duration_us", int, where),
            threshold=_get(sc, "threshold", float, where),
            sample_interval_us=_get(sc, "sample_interval_us", int, where),
        )
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from exc

    noise = None
    if "noise" in parser:
        nsec = parser["noise"]
        nwhere = f"{name} [noise]"
        noise = NoiseSpec(
            hot_pixels=_parse_hot_pixels(nsec.get("hot_pixels", ""), nwhere),
            background_rate=float(nsec.get("background_rate", "0")),
            rng_seed=int(nsec.get("seed", "0")),
            deterministic=nsec.getboolean("deterministic", fallback=False),
        )
    return scene, noise


def load_scene(path) -> tuple[SceneSpec, NoiseSpec | None]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return parse_scene_text(text, name=str(path))
