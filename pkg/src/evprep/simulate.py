"""Exact synthetic event generation from piecewise-constant disc scenes.

Integrate-and-fire trigger semantics: the scene is rasterized at a fixed
sample interval and each pixel keeps a reference log-level; whenever the
rendered level drifts from the reference by at least the threshold C,
floor(|diff| / C) events fire and the reference advances by that many
threshold steps. Noise-free streams are exactly reproducible, which is
what the intensity-estimator oracle tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evprep.errors import GeometryError
from evprep.events import EVENT_DTYPE, SensorGeometry, make_events


@dataclass
class MovingDisc:
    """A flat disc following a piecewise-linear trajectory of (t, cx, cy) knots."""

    knots: list[tuple[int, float, float]]
    radius: float
    logintensity: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disc radius must be positive")
        times = [k[0] for k in self.knots]
        if times != sorted(times):
            raise ValueError("disc knots must be sorted by time")

    def center_at(self, t_us: int) -> tuple[float, float]:
        """Linear interpolation between knots; clamps outside the knot span."""
        knots = self.knots
        if t_us <= knots[0][0]:
            return knots[0][1], knots[0][2]
        if t_us >= knots[-1][0]:
            return knots[-1][1], knots[-1][2]
        for (t0, x0, y0), (t1, x1, y1) in zip(knots, knots[1:]):
            if t0 <= t_us <= t1:
                w = (t_us - t0) / (t1 - t0)
                return x0 + w * (x1 - x0), y0 + w * (y1 - y0)
        raise AssertionError("unreachable")


@dataclass
class NoiseSpec:
    """Hot pixels and uniform background noise.

    ``deterministic`` makes every hot pixel fire at its exact period
    (1/rate), giving exactly floor(rate * duration) events; otherwise
    hot pixels and background are seeded Poisson processes.
    """

    hot_pixels: list[tuple[int, int, int, float]] = field(default_factory=list)
    background_rate: float = 0.0
    rng_seed: int = 0
    deterministic: bool = False

    def __post_init__(self):
        if self.background_rate < 0:
            raise ValueError("background_rate must be >= 0")
        for x, y, p, rate in self.hot_pixels:
            if rate < 0:
                raise ValueError("hot pixel rate must be >= 0")
            if p not in (-1, 1):
                raise ValueError("hot pixel polarity must be -1 or +1")


@dataclass
class SceneSpec:
    geometry: SensorGeometry
    background_logintensity: float
    objects: list[MovingDisc]
    duration_us: int
    threshold: float
    sample_interval_us: int

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.duration_us % self.sample_interval_us != 0:
            raise ValueError("sample_interval must divide duration")


def render_logintensity(scene: SceneSpec, t_us: int) -> np.ndarray:
    """Rasterize the scene's log-intensity at time t.

    A pixel is covered when its center lies within the disc radius; the
    last disc in the object list is topmost. No anti-aliasing.
    """
    if not 0 <= t_us <= scene.duration_us:
        raise ValueError(f"t={t_us}us outside scene duration")
    geo = scene.geometry
    frame = np.full(
        (geo.height, geo.width), scene.background_logintensity, dtype=np.float64
    )
    ys, xs = np.mgrid[0 : geo.height, 0 : geo.width]
    for disc in scene.objects:
        cx, cy = disc.center_at(t_us)
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= disc.radius**2
        frame[inside] = disc.logintensity
    return frame


def _disc_footprint(scene: SceneSpec, t_us: int) -> np.ndarray:
    geo = scene.geometry
    ys, xs = np.mgrid[0 : geo.height, 0 : geo.width]
    covered = np.zeros((geo.height, geo.width), dtype=bool)
    for disc in scene.objects:
        cx, cy = disc.center_at(t_us)
        covered |= (xs - cx) ** 2 + (ys - cy) ** 2 <= disc.radius**2
    return covered


def _sample_times(scene: SceneSpec) -> np.ndarray:
    si = scene.sample_interval_us
    return np.arange(si, scene.duration_us + 1, si, dtype=np.int64)


def _hot_pixel_events(noise: NoiseSpec, duration_us: int, rng) -> list[np.ndarray]:
    streams = []
    for x, y, p, rate in noise.hot_pixels:
        if rate <= 0:
            continue
        if noise.deterministic:
            count = int(np.floor(rate * duration_us * 1e-6))
            k = np.arange(1, count + 1, dtype=np.float64)
            times = np.floor(k * 1e6 / rate).astype(np.uint64)
        else:
            gaps = rng.exponential(1e6 / rate, size=max(16, int(2 * rate * duration_us * 1e-6) + 16))
            times = np.cumsum(gaps)
            while times[-1] < duration_us:
                more = rng.exponential(1e6 / rate, size=16)
                times = np.concatenate([times, times[-1] + np.cumsum(more)])
            times = times[times <= duration_us].astype(np.uint64)
        streams.append(
            make_events(
                times,
                np.full(times.shape, x),
                np.full(times.shape, y),
                np.full(times.shape, p),
            )
        )
    return streams


def _background_events(
    noise: NoiseSpec, geometry: SensorGeometry, duration_us: int, rng
) -> list[np.ndarray]:
    if noise.background_rate <= 0:
        return []
    mean = noise.background_rate * duration_us * 1e-6 * geometry.width * geometry.height
    n = rng.poisson(mean)
    t = rng.integers(0, duration_us, size=n, dtype=np.int64)
    x = rng.integers(0, geometry.width, size=n)
    y = rng.integers(0, geometry.height, size=n)
    p = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
    return [make_events(t, x, y, p)]


def _canonical_sort(events: np.ndarray) -> np.ndarray:
    # tie-break order (t, y, x, p) for deterministic streams
    order = np.lexsort((events["p"], events["x"], events["y"], events["t"]))
    return events[order]


def simulate_events(scene: SceneSpec, noise: NoiseSpec | None = None) -> np.ndarray:
    """Generate the time-ordered event stream for a scene.

    Sampling at every sample_interval, each pixel compares the rendered
    log-level against its reference; a drift of magnitude >= C emits
    floor(|diff| / C) events of that polarity and advances the reference
    by the emitted multiple of C.
    """
    C = scene.threshold
    reference = render_logintensity(scene, 0)
    chunks = []
    for t in _sample_times(scene):
        current = render_logintensity(scene, int(t))
        diff = current - reference
        counts = np.floor(np.abs(diff) / C).astype(np.int64)
        fired = counts > 0
        if not fired.any():
            continue
        sign = np.sign(diff[fired])
        n = counts[fired]
        reference[fired] += sign * n * C
        ys, xs = np.nonzero(fired)
        chunks.append(
            make_events(
                np.full(int(n.sum()), t),
                np.repeat(xs, n),
                np.repeat(ys, n),
                np.repeat(sign.astype(np.int8), n),
            )
        )
    if noise is not None:
        for x, y, _, _ in noise.hot_pixels:
            if not (0 <= x < scene.geometry.width and 0 <= y < scene.geometry.height):
                raise GeometryError(f"hot pixel ({x}, {y}) outside sensor")
        rng = np.random.default_rng(noise.rng_seed)
        chunks.extend(_hot_pixel_events(noise, scene.duration_us, rng))
        chunks.extend(_background_events(noise, scene.geometry, scene.duration_us, rng))
    if not chunks:
        return np.empty(0, dtype=EVENT_DTYPE)
    return _canonical_sort(np.concatenate(chunks))


def oracle_intensity(scene: SceneSpec, times_us: list[int]) -> list[np.ndarray]:
    """Exact mean-centered log-intensity frames at the requested times.

    Mean-centering because event integration recovers intensity only up
    to an additive constant.
    """
    frames = []
    for t in times_us:
        frame = render_logintensity(scene, t)
        frames.append(frame - frame.mean())
    return frames


def swept_region(scene: SceneSpec, t0_us: int, t1_us: int) -> np.ndarray:
    """Pixels covered by any disc at any sample time in [t0, t1]."""
    si = scene.sample_interval_us
    start = (t0_us // si) * si
    covered = np.zeros((scene.geometry.height, scene.geometry.width), dtype=bool)
    for t in range(max(0, start), min(t1_us, scene.duration_us) + 1, si):
        covered |= _disc_footprint(scene, t)
    return covered


def trail_region(scene: SceneSpec, t_after_us: int) -> np.ndarray:
    """Pixels swept before ``t_after_us`` and never covered afterwards.

    This is the region where motion-blur residue lives: it saw events
    during the disc's passage but receives none later.
    """
    before = swept_region(scene, 0, t_after_us)
    si = scene.sample_interval_us
    after_start = t_after_us + si
    if after_start > scene.duration_us:
        return before
    after = swept_region(scene, after_start, scene.duration_us)
    return before & ~after
