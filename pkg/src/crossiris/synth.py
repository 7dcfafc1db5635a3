"""Synthetic two-sensor iris datasets with known identities and injected defects.

Every random draw comes from a counter-based generator (Philox) keyed by
``(seed, identity, sample, purpose)``, so datasets are identical across runs,
platforms and rendering orders.
"""

from __future__ import annotations

import enum
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .iso_image import EyeImage, save_image
from .sigset import Comparison, Entry, Label, SigSet, write_sigset

IMAGE_WIDTH = 640
IMAGE_HEIGHT = 480
SCLERA_LEVEL = 185.0
PUPIL_LEVEL = 22.0
IRIS_LEVEL = 135.0
TEXTURE_AMPLITUDE = 45.0
N_HARMONICS = 64


class Defect(str, enum.Enum):
    DILATED_PUPIL = "dilated_pupil"
    OCCLUSION = "occlusion"
    GAZE_SHIFT = "gaze_shift"
    NO_IRIS = "no_iris"
    HEAVY_BLUR = "heavy_blur"


@dataclass(frozen=True)
class SensorProfile:
    name: str
    blur_sigma: float = 0.0
    noise_sigma: float = 0.0
    interlace: bool = False
    contrast_scale: float = 1.0

    def __post_init__(self):
        if self.blur_sigma < 0 or self.noise_sigma < 0:
            raise ValueError("blur_sigma and noise_sigma must be >= 0")
        if self.contrast_scale <= 0:
            raise ValueError("contrast_scale must be positive")


SENSOR_A = SensorProfile("sensor_a", blur_sigma=0.5, noise_sigma=2.0)
SENSOR_B = SensorProfile("sensor_b", blur_sigma=1.5, noise_sigma=6.0, interlace=True)
CLEAN = SensorProfile("clean")


@dataclass(frozen=True)
class SynthConfig:
    n_identities: int = 20
    samples_per_identity_per_sensor: int = 2
    seed: int = 0
    defect_rates: dict = field(default_factory=dict)
    mislabel_rate: float = 0.0
    profiles: tuple[SensorProfile, SensorProfile] = (SENSOR_A, SENSOR_B)
    # number of different-identity pairs to declare as imposters; None keeps all
    imposter_sample: int | None = None

    def __post_init__(self):
        if self.n_identities < 1 or self.samples_per_identity_per_sensor < 1:
            raise ValueError("identity and sample counts must be >= 1")
        rates = {Defect(k): float(v) for k, v in dict(self.defect_rates).items()}
        if any(not 0 <= v <= 1 for v in rates.values()) or not 0 <= self.mislabel_rate <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "defect_rates", rates)


def keyed_rng(seed: int, identity: int, sample: int, purpose: str) -> np.random.Generator:
    key = [seed & 0xFFFFFFFFFFFFFFFF, identity, sample, zlib.crc32(purpose.encode())]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


# --------------------------------------------------------------------------
# textures and rendering


@dataclass(frozen=True)
class IdentityTexture:
    """Band-limited angular/radial texture of one eye plus its anatomy.

    The field is defined on normalised coordinates: ``rho`` in [0, 1] runs from
    the pupil boundary to the limbus, ``theta`` is the angle in radians.
    """

    angular_freq: np.ndarray
    radial_freq: np.ndarray
    phase: np.ndarray
    radial_phase: np.ndarray
    weight: np.ndarray
    iris_radius: float
    pupil_offset: tuple[float, float]
    scale: float

    def field(self, rho, theta) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        acc = np.zeros(np.broadcast(rho, theta).shape)
        for k, m, ph, rph, w in zip(self.angular_freq, self.radial_freq, self.phase, self.radial_phase, self.weight):
            acc += w * np.cos(k * theta + ph) * np.cos(np.pi * m * rho + rph)
        return np.clip(IRIS_LEVEL + TEXTURE_AMPLITUDE * acc / self.scale, 1.0, 255.0)

    def grid(self, rows: int = 32, cols: int = 360) -> np.ndarray:
        rho = (np.arange(rows) / max(rows - 1, 1))[:, None]
        theta = (2 * np.pi * np.arange(cols) / cols)[None, :]
        return self.field(rho, theta)


def generate_identity_texture(seed: int, identity_index: int) -> IdentityTexture:
    rng = keyed_rng(seed, identity_index, 0, "texture")
    angular = rng.integers(6, 41, N_HARMONICS).astype(np.float64)
    radial = rng.uniform(0.0, 6.0, N_HARMONICS)
    phase = rng.uniform(0, 2 * np.pi, N_HARMONICS)
    radial_phase = rng.uniform(0, 2 * np.pi, N_HARMONICS)
    weight = rng.normal(0.0, 1.0, N_HARMONICS)
    iris_radius = float(rng.uniform(105, 125))
    offset = (float(rng.normal(0, 1.0)), float(rng.normal(0, 1.0)))
    # scale so the texture's standard deviation is a third of the amplitude
    scale = 3.0 * np.sqrt(np.sum(weight**2) / 4.0)
    return IdentityTexture(angular, radial, phase, radial_phase, weight, iris_radius, offset, float(scale))


def _ray_to_circle(px, py, theta, cx, cy, radius):
    """Distance from (px, py) along direction theta to the circle (cx, cy, radius)."""
    ux, uy = np.cos(theta), np.sin(theta)
    dx, dy = px - cx, py - cy
    b = ux * dx + uy * dy
    c = dx * dx + dy * dy - radius * radius
    return -b + np.sqrt(np.maximum(b * b - c, 0.0))


def render_sample(
    texture: IdentityTexture,
    profile: SensorProfile,
    sample_seed: int,
    defects: frozenset | set = frozenset(),
    size: tuple[int, int] = (IMAGE_WIDTH, IMAGE_HEIGHT),
) -> EyeImage:
    """Render one eye image with the sensor's degradations and the given defects."""
    defects = {Defect(d) for d in defects}
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([sample_seed & 0xFFFFFFFFFFFFFFFF, 7])))
    w, h = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    iris_cx = w / 2 + rng.uniform(-20, 20)
    iris_cy = h / 2 + rng.uniform(-15, 15)
    big_r = texture.iris_radius
    pupil_r = big_r * rng.uniform(0.32, 0.45)
    off_x, off_y = texture.pupil_offset
    off_x += rng.normal(0, 0.3)
    off_y += rng.normal(0, 0.3)
    if Defect.DILATED_PUPIL in defects:
        pupil_r = min(pupil_r * 1.8, big_r - 6)
    if Defect.GAZE_SHIFT in defects:
        ang = rng.uniform(0, 2 * np.pi)
        off_x += 0.15 * big_r * np.cos(ang)
        off_y += 0.15 * big_r * np.sin(ang)
    pcx, pcy = iris_cx + off_x, iris_cy + off_y

    if Defect.NO_IRIS in defects:
        img = np.full((h, w), SCLERA_LEVEL)
    else:
        dx, dy = xx - pcx, yy - pcy
        r = np.hypot(dx, dy)
        theta = np.mod(np.arctan2(dy, dx), 2 * np.pi)
        limbus = _ray_to_circle(pcx, pcy, theta, iris_cx, iris_cy, big_r)
        rho = (r - pupil_r) / np.maximum(limbus - pupil_r, 1e-6)
        img = np.full((h, w), SCLERA_LEVEL)
        in_iris = (rho >= 0) & (rho < 1)
        img[in_iris] = texture.field(rho[in_iris], theta[in_iris])
        img[r < pupil_r] = PUPIL_LEVEL
        if Defect.OCCLUSION in defects:
            img[yy < pcy - 0.45 * pupil_r] = 150.0

    blur = profile.blur_sigma + (3.0 if Defect.HEAVY_BLUR in defects else 0.0)
    if blur > 0:
        img = ndimage.gaussian_filter(img, blur, mode="nearest")
    img = 128.0 + profile.contrast_scale * (img - 128.0)
    if profile.noise_sigma > 0:
        img = img + rng.normal(0.0, profile.noise_sigma, img.shape)
    if profile.interlace:
        img[1:-1:2] = 0.5 * (img[0:-2:2] + img[2::2])
    # 0 is reserved for out-of-bounds samples downstream
    return EyeImage(np.clip(np.rint(img), 1, 255).astype(np.uint8))


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Swap:
    template_a: str
    template_b: str
    true_identity_a: str
    true_identity_b: str


@dataclass(frozen=True)
class PlannedSample:
    template_id: str
    identity_index: int
    sample_index: int
    sensor: int
    path: str
    defects: frozenset


@dataclass(frozen=True)
class DatasetPlan:
    sigset: SigSet
    swaps: tuple[Swap, ...]
    true_identity: dict
    samples: tuple[PlannedSample, ...]


def identity_label(i: int) -> str:
    return f"id{i:04d}"


def plan_dataset(config: SynthConfig) -> DatasetPlan:
    """Decide templates, defects, mislabel swaps and declared comparisons without rendering."""
    samples = []
    for i in range(config.n_identities):
        for sensor, prefix, folder in ((0, "e", "enroll"), (1, "p", "probe")):
            for s in range(config.samples_per_identity_per_sensor):
                rng = keyed_rng(config.seed, i, s, f"defects/{sensor}")
                defects = frozenset(
                    d for d in Defect if rng.random() < config.defect_rates.get(d, 0.0)
                )
                tid = f"{prefix}{i:04d}_{s:02d}"
                samples.append(PlannedSample(tid, i, s, sensor, f"{folder}/{tid}.pgm", defects))

    enroll = [p for p in samples if p.sensor == 0]
    probe = [p for p in samples if p.sensor == 1]
    true_identity = {p.template_id: identity_label(p.identity_index) for p in samples}
    declared = dict(true_identity)

    swaps = []
    touched: set[str] = set()
    rng = keyed_rng(config.seed, 0, 0, "mislabel")
    for p in enroll:
        draw = rng.random()
        if p.template_id in touched or draw >= config.mislabel_rate:
            continue
        partners = [
            q.template_id
            for q in enroll
            if q.template_id not in touched
            and q.template_id != p.template_id
            and declared[q.template_id] != declared[p.template_id]
        ]
        if not partners:
            continue
        other = partners[int(rng.integers(len(partners)))]
        a, b = p.template_id, other
        swaps.append(Swap(a, b, true_identity[a], true_identity[b]))
        declared[a], declared[b] = declared[b], declared[a]
        touched.update((a, b))

    comparisons = []
    imposters = []
    for q in probe:
        for p in enroll:
            pair = (q.template_id, p.template_id)
            if declared[p.template_id] == declared[q.template_id]:
                comparisons.append(Comparison(*pair, Label.GENUINE))
            else:
                imposters.append(Comparison(*pair, Label.IMPOSTER))
    if config.imposter_sample is not None and config.imposter_sample < len(imposters):
        rng = keyed_rng(config.seed, 0, 0, "imposters")
        pick = np.sort(rng.choice(len(imposters), size=config.imposter_sample, replace=False))
        imposters = [imposters[i] for i in pick]
    comparisons += imposters

    sigset = SigSet(
        [Entry(p.template_id, declared[p.template_id], p.path) for p in enroll],
        [Entry(q.template_id, declared[q.template_id], q.path) for q in probe],
        comparisons,
    )
    return DatasetPlan(sigset, tuple(swaps), true_identity, tuple(samples))


def true_labels(plan: DatasetPlan) -> dict:
    return {
        (c.probe_id, c.enrolled_id): Label.GENUINE
        if plan.true_identity[c.probe_id] == plan.true_identity[c.enrolled_id]
        else Label.IMPOSTER
        for c in plan.sigset.comparisons
    }


def mislabeled_pairs(plan: DatasetPlan) -> set:
    truth = true_labels(plan)
    return {(c.probe_id, c.enrolled_id) for c in plan.sigset.comparisons if truth[(c.probe_id, c.enrolled_id)] != c.label}


def render_planned(plan_sample: PlannedSample, config: SynthConfig) -> EyeImage:
    texture = generate_identity_texture(config.seed, plan_sample.identity_index)
    profile = config.profiles[plan_sample.sensor]
    sample_seed = int(keyed_rng(config.seed, plan_sample.identity_index, plan_sample.sample_index, f"render/{plan_sample.sensor}").integers(2**63))
    return render_sample(texture, profile, sample_seed, plan_sample.defects)


def write_swaps(swaps, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("template_a,template_b,true_identity_a,true_identity_b\n")
        for s in swaps:
            fh.write(f"{s.template_a},{s.template_b},{s.true_identity_a},{s.true_identity_b}\n")


def read_swaps(path: str | os.PathLike) -> list[Swap]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()[1:]
    return [Swap(*line.split(",")) for line in lines if line]


def generate_dataset(config: SynthConfig, out_dir: str | os.PathLike, n_jobs: int = 1) -> DatasetPlan:
    """Render the planned dataset under ``out_dir`` and write its sigset and swap list."""
    plan = plan_dataset(config)
    out_dir = os.fspath(out_dir)
    os.makedirs(os.path.join(out_dir, "enroll"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "probe"), exist_ok=True)

    def work(ps: PlannedSample):
        save_image(render_planned(ps, config), os.path.join(out_dir, ps.path))

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(work, plan.samples))
    else:
        for ps in plan.samples:
            work(ps)
    write_sigset(plan.sigset, os.path.join(out_dir, "sigset.csv"))
    write_swaps(plan.swaps, os.path.join(out_dir, "ground_truth_swaps.csv"))
    return plan


# --------------------------------------------------------------------------
# score-level simulation


def simulate_scores(
    plan: DatasetPlan,
    seed: int = 0,
    imposter_mean: float = 0.5,
    imposter_std: float = 0.0125,
    separation: float = 20.0,
    genuine_std: float | None = None,
    nbits: int = 11520,
):
    """Draw a similarity score for every declared comparison from its true class.

    Genuine scores sit ``separation`` imposter deviations above the imposter
    mean. Scores are quantised to multiples of ``1/nbits`` like real Hamming
    similarities.
    """
    from .evaluation import ScoreSet

    genuine_std = imposter_std if genuine_std is None else genuine_std
    truth = true_labels(plan)
    rng = keyed_rng(seed, 0, 0, "scores")
    values = {}
    for c in plan.sigset.comparisons:
        pair = (c.probe_id, c.enrolled_id)
        if truth[pair] is Label.GENUINE:
            v = rng.normal(imposter_mean + separation * imposter_std, genuine_std)
        else:
            v = rng.normal(imposter_mean, imposter_std)
        values[pair] = float(np.clip(np.rint(v * nbits), 0, nbits) / nbits)
    labels = {(c.probe_id, c.enrolled_id): c.label for c in plan.sigset.comparisons}
    return ScoreSet.from_labeled(values, labels)
