"""Eye image to iris code: pupil, region of interest, polar unwrap, band, code."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .encoder import IrisCode, LogGaborParams, encode
from .exceptions import SEGMENTATION_ERRORS, DataError, MalformedImage
from .iso_image import (
    DEFAULT_MARGIN_FACTOR,
    DEFAULT_RADIAL_RESOLUTION,
    EyeImage,
    PolarImage,
    PupilDescriptor,
    crop_roi,
    load_image,
    pupil_in_roi,
    unwrap_polar,
)
from .segmentation import SegmentedPolar, detect_pupil, segment


@dataclass(frozen=True)
class PipelineConfig:
    margin_factor: float = DEFAULT_MARGIN_FACTOR
    radial_resolution: int = DEFAULT_RADIAL_RESOLUTION
    log_gabor: LogGaborParams = field(default_factory=LogGaborParams)
    # Gaussian pre-blur of the polar image before the boundary search; 0 disables it
    pre_blur: float = 0.0


@dataclass(frozen=True)
class PipelineResult:
    pupil: PupilDescriptor
    roi: EyeImage
    polar: PolarImage
    segmented: SegmentedPolar
    code: IrisCode


def run_pipeline(image: EyeImage, config: PipelineConfig = PipelineConfig(), source_id: str = "") -> PipelineResult:
    pupil = detect_pupil(image)
    roi = crop_roi(image, pupil, config.margin_factor)
    local = pupil_in_roi(pupil, roi)
    polar = unwrap_polar(roi, local, config.radial_resolution, config.margin_factor)
    seg = segment(polar, pre_blur=config.pre_blur)
    code = encode(seg, config.log_gabor, source_id)
    return PipelineResult(pupil, roi, polar, seg, code)


def encode_image(image: EyeImage, config: PipelineConfig = PipelineConfig(), source_id: str = "") -> IrisCode:
    return run_pipeline(image, config, source_id).code


def resolve_path(path: str, base_dir: str | os.PathLike) -> str:
    return path if os.path.isabs(path) else os.path.join(os.fspath(base_dir), path)


def encode_templates(
    entries: Sequence, base_dir: str | os.PathLike, config: PipelineConfig, n_jobs: int = 1
) -> tuple[dict[str, IrisCode], list[tuple[str, str]]]:
    """Encode sigset entries; returns codes by template id and ``(template_id, reason)`` failures.

    Segmentation failures are collected, unreadable images raise ``DataError``.
    """

    def work(entry):
        path = resolve_path(entry.path, base_dir)
        try:
            image = load_image(path)
        except FileNotFoundError:
            raise DataError(f"template {entry.template_id}: image not found: {path}") from None
        except MalformedImage as exc:
            raise DataError(f"template {entry.template_id}: {exc}") from None
        try:
            return entry.template_id, encode_image(image, config, entry.template_id), None
        except SEGMENTATION_ERRORS as exc:
            return entry.template_id, None, f"{type(exc).__name__}: {exc}"

    if n_jobs > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(e) for e in entries]
    codes = {tid: code for tid, code, err in results if code is not None}
    failures = [(tid, err) for tid, code, err in results if code is None]
    return codes, failures
