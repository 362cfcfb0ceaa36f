"""Deterministic synthetic scan sequences over a striped class layout.

The scene is a square patch of gently rolling terrain split into parallel
class stripes along x, cycling through the K classes twice so boundaries
are frequent.  Evidence is clean deep inside a stripe and degrades toward
stripe boundaries: the total evidence mass drops and the class vector
blends toward uniform and toward the class across the nearest boundary.
That mimics a segmentation head that is confident on homogeneous terrain
and weak at class transitions, which is where fused map cells should stay
uncertain.

Scans are taken from sensor poses orbiting the scene center, so the pose
pipeline is exercised end to end.  Everything is a pure function of the
seed; the same seed writes byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from evmap.kernel import KernelParams
from evmap.mapio import GroundTruthGrid, PipelineConfig, save_ground_truth
from evmap.scan import ScanFrame, save_manifest, save_scan
from evmap.voxmap import MapConfig

__all__ = [
    "SynthParams",
    "generate_synthetic_sequence",
    "write_synthetic_sequence",
    "high_noise_preset",
]

_ORBIT_RADIUS_FACTOR = 0.45
_SENSOR_HEIGHT = 1.6
# Each class appears this many times across the x extent; more bands mean
# more class transitions and a larger ambiguous fraction of the scene.
_BANDS_PER_CLASS = 2


@dataclass(frozen=True)
class SynthParams:
    """Scene and evidence-noise parameters for the generator."""

    extent: float = 6.3
    num_classes: int = 3
    num_scans: int = 5
    points_per_scan: int = 2000
    boundary_noise: float = 0.4
    evidence_strength: float = 10.0
    voxel_size: float = 0.5

    def __post_init__(self) -> None:
        if not (math.isfinite(self.extent) and self.extent > 0.0):
            raise ValueError(f"extent must be > 0, got {self.extent!r}")
        if int(self.num_classes) != self.num_classes or self.num_classes < 2:
            raise ValueError(f"num_classes must be an int >= 2, got {self.num_classes!r}")
        if self.num_scans < 1 or self.points_per_scan < 1:
            raise ValueError("need at least one scan and one point per scan")
        if not 0.0 <= self.boundary_noise <= 1.0:
            raise ValueError(f"boundary_noise must be in [0, 1], got {self.boundary_noise!r}")
        if not (math.isfinite(self.evidence_strength) and self.evidence_strength >= 0.0):
            raise ValueError(f"evidence_strength must be >= 0, got {self.evidence_strength!r}")
        if not (math.isfinite(self.voxel_size) and self.voxel_size > 0.0):
            raise ValueError(f"voxel_size must be > 0, got {self.voxel_size!r}")


def _terrain_height(xy: np.ndarray, extent: float) -> np.ndarray:
    # Rolling surface in [-0.15, 0.75]; spans two or three voxel layers at 0.5 m.
    phase = 2.0 * np.pi / extent
    return 0.3 + 0.45 * np.sin(phase * xy[:, 0]) * np.cos(phase * xy[:, 1])


def _stripe_band(x: np.ndarray, stripe_width: float, num_bands: int) -> np.ndarray:
    band = np.floor(x / stripe_width).astype(np.int64)
    return np.clip(band, 0, num_bands - 1)


def _stripe_class(x: np.ndarray, stripe_width: float, num_classes: int) -> np.ndarray:
    num_bands = num_classes * _BANDS_PER_CLASS
    return _stripe_band(x, stripe_width, num_bands) % num_classes


def _orbit_pose(scan_index: int, num_scans: int, extent: float) -> np.ndarray:
    theta = 2.0 * np.pi * scan_index / num_scans
    cx = cy = extent / 2.0
    radius = _ORBIT_RADIUS_FACTOR * extent
    tx = cx + radius * math.cos(theta)
    ty = cy + radius * math.sin(theta)
    yaw = theta + math.pi  # face the scene center
    c, s = math.cos(yaw), math.sin(yaw)
    pose = np.eye(4)
    pose[:3, :3] = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    pose[:3, 3] = (tx, ty, _SENSOR_HEIGHT)
    return pose


def generate_synthetic_sequence(
    seed: int, params: SynthParams
) -> tuple[list[ScanFrame], GroundTruthGrid]:
    """Sample scans and the cell-level ground truth for one synthetic scene.

    Per point, with c the true stripe class and d the distance to the
    nearest stripe boundary, an ambiguity level
    ``a = boundary_noise * max(0, 1 - d / (W/2)) * U(0.5, 1.5)`` (clipped to
    0.95) both shrinks the evidence total to ``strength * (1 - a)`` and
    blends the class vector to
    ``(1 - a) one_hot(c) + a (uniform + one_hot(neighbor)) / 2``.
    With boundary_noise = 0 every row is exactly strength * one_hot(c).
    """
    rng = np.random.default_rng(seed)
    k = params.num_classes
    num_bands = k * _BANDS_PER_CLASS
    stripe_width = params.extent / num_bands
    boundaries = stripe_width * np.arange(1, num_bands, dtype=np.float64)

    scans: list[ScanFrame] = []
    touched: set[tuple[int, int, int]] = set()
    for s in range(params.num_scans):
        n = params.points_per_scan
        xy = rng.uniform(0.0, params.extent, size=(n, 2))
        z = _terrain_height(xy, params.extent)
        world = np.column_stack([xy, z])

        band = _stripe_band(xy[:, 0], stripe_width, num_bands)
        true_cls = band % k
        gaps = np.abs(xy[:, 0][:, None] - boundaries[None, :])
        nearest = np.argmin(gaps, axis=1)
        dist_boundary = gaps[np.arange(n), nearest]
        boundary_band = nearest + 1  # boundary j separates bands j-1 and j
        neighbor_cls = np.where(band < boundary_band, boundary_band, boundary_band - 1) % k

        closeness = np.clip(1.0 - dist_boundary / (stripe_width / 2.0), 0.0, 1.0)
        ambiguity = np.clip(
            params.boundary_noise * closeness * rng.uniform(0.5, 1.5, size=n), 0.0, 0.95
        )
        q = np.zeros((n, k))
        q[np.arange(n), true_cls] += 1.0 - ambiguity
        q += (0.5 * ambiguity / k)[:, None]
        q[np.arange(n), neighbor_cls] += 0.5 * ambiguity
        evidence = (params.evidence_strength * (1.0 - ambiguity))[:, None] * q

        pose = _orbit_pose(s, params.num_scans, params.extent)
        rot = pose[:3, :3]
        t = pose[:3, 3]
        sensor_points = (world - t) @ rot  # == R^T (p - t) row-wise
        scans.append(
            ScanFrame(seq=s, pose=pose, points=sensor_points, evidence=evidence)
        )
        cell_idx = np.floor(world / params.voxel_size).astype(np.int64)
        touched.update(map(tuple, cell_idx.tolist()))

    gt_cells: dict[tuple[int, int, int], int] = {}
    for index in touched:
        center_x = (index[0] + 0.5) * params.voxel_size
        gt_cells[index] = int(
            _stripe_class(np.array([center_x]), stripe_width, k)[0]
        )
    return scans, GroundTruthGrid(cells=gt_cells)


def write_synthetic_sequence(out_dir, seed: int, params: SynthParams) -> Path:
    """Generate and write scans, ground truth, and the manifest; returns the dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scans, gt = generate_synthetic_sequence(seed, params)
    names = []
    for frame in scans:
        name = f"scan_{frame.seq:03d}.csv"
        save_scan(frame, out_dir / name)
        names.append(name)
    save_ground_truth(out_dir / "ground_truth.csv", gt)
    generator = {"seed": int(seed), **asdict(params)}
    save_manifest(
        out_dir,
        num_classes=params.num_classes,
        scan_files=names,
        ground_truth="ground_truth.csv",
        generator=generator,
    )
    return out_dir


def high_noise_preset() -> tuple[int, SynthParams, PipelineConfig]:
    """The desk-scale comparison scene: heavy boundary ambiguity, K = 3.

    seed 7, 5 scans x 2000 points, boundary_noise 0.5, evidence strength 10,
    0.5 m voxels, 0.6 m kernel support.
    """
    params = SynthParams(
        extent=6.3,
        num_classes=3,
        num_scans=5,
        points_per_scan=2000,
        boundary_noise=0.5,
        evidence_strength=10.0,
        voxel_size=0.5,
    )
    config = PipelineConfig(
        map=MapConfig(
            num_classes=3,
            voxel_size=0.5,
            kernel=KernelParams(sigma0=1.0, length=0.6),
            max_range=100.0,
            min_weight=1e-3,
        )
    )
    return 7, params, config
