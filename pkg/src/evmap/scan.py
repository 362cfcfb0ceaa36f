"""Sensor scan frames and their on-disk format.

A scan is a UTF-8 CSV of rows ``x,y,z,e_0,...,e_{K-1}`` (sensor-frame
coordinates plus one evidence vector per point) with a JSON sidecar
``<name>.pose.json`` holding the scan sequence number and the 4x4
sensor-to-world pose, row-major.  A sequence directory carries a
``manifest.json`` that fixes the scan order and the class count; consumers
must never rely on directory listing order.

Reals in CSVs are written with 17 significant digits so write -> read is
bit exact; JSON numbers use Python's shortest exact repr.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ScanFrame",
    "ScanFormatError",
    "SequenceManifest",
    "format_real",
    "transform_to_world",
    "save_scan",
    "load_scan",
    "save_manifest",
    "load_manifest",
]

_ROTATION_TOL = 1e-6
_EVIDENCE_COL = re.compile(r"^e_(\d+)$")

MANIFEST_FORMAT = "evmap-sequence-v1"
MANIFEST_NAME = "manifest.json"


class ScanFormatError(ValueError):
    """A scan, pose, or manifest file failed to parse; message carries location."""


def format_real(x: float) -> str:
    """17-significant-digit decimal text; round-trips any finite float64."""
    return format(float(x), ".17g")


@dataclass(eq=False)
class ScanFrame:
    """One sensor scan: pose, points, and one evidence row per point.

    ``frame`` tags whether the points are expressed in the sensor or the
    world frame; files always store sensor-frame points and
    ``transform_to_world`` flips the tag so a pose cannot be applied twice.
    """

    seq: int
    pose: np.ndarray
    points: np.ndarray
    evidence: np.ndarray
    frame: str = "sensor"

    def __post_init__(self) -> None:
        self.seq = int(self.seq)
        if self.seq < 0:
            raise ValueError(f"scan seq must be >= 0, got {self.seq}")
        pose = np.array(self.pose, dtype=np.float64, copy=True)
        if pose.shape != (4, 4):
            raise ValueError(f"pose must be 4x4, got shape {pose.shape}")
        if not np.all(np.isfinite(pose)):
            raise ValueError("pose must be finite")
        if np.max(np.abs(pose[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
            raise ValueError("pose bottom row must be [0, 0, 0, 1]")
        rot = pose[:3, :3]
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ROTATION_TOL:
            raise ValueError("pose rotation block is not orthonormal")
        if abs(float(np.linalg.det(rot)) - 1.0) > _ROTATION_TOL:
            raise ValueError("pose rotation block must have determinant +1")
        points = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 3)
        evidence = np.array(self.evidence, dtype=np.float64, copy=True)
        if evidence.ndim != 2 or evidence.shape[1] < 2:
            raise ValueError(
                f"evidence must be an (N, K>=2) matrix, got shape {evidence.shape}"
            )
        if evidence.shape[0] != points.shape[0]:
            raise ValueError(
                f"{points.shape[0]} points but {evidence.shape[0]} evidence rows"
            )
        if self.frame not in ("sensor", "world"):
            raise ValueError(f"frame must be 'sensor' or 'world', got {self.frame!r}")
        for arr in (pose, points, evidence):
            arr.setflags(write=False)
        self.pose = pose
        self.points = points
        self.evidence = evidence

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def num_classes(self) -> int:
        return self.evidence.shape[1]


def transform_to_world(scan: ScanFrame) -> ScanFrame:
    """Express the points in the world frame: p' = R p + t.

    The pose stays on the returned frame as sensor metadata (its translation
    is the sensor origin, used for range gating); the frame tag flips to
    "world" so the pose cannot be applied a second time.
    """
    if scan.frame == "world":
        raise ValueError("scan is already in the world frame")
    rot = scan.pose[:3, :3]
    t = scan.pose[:3, 3]
    pts = scan.points @ rot.T + t
    return ScanFrame(
        seq=scan.seq, pose=scan.pose, points=pts, evidence=scan.evidence, frame="world"
    )


def _pose_sidecar(csv_path: Path) -> Path:
    return csv_path.with_suffix(".pose.json")


def save_scan(scan: ScanFrame, csv_path) -> None:
    """Write the scan CSV plus its pose sidecar; sensor-frame scans only."""
    if scan.frame != "sensor":
        raise ValueError("scan files store sensor-frame points; got a world-frame scan")
    csv_path = Path(csv_path)
    k = scan.num_classes
    lines = ["x,y,z," + ",".join(f"e_{i}" for i in range(k))]
    for p, e in zip(scan.points, scan.evidence):
        lines.append(",".join(format_real(v) for v in (*p, *e)))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {"seq": scan.seq, "pose": [float(v) for v in scan.pose.ravel()]}
    _pose_sidecar(csv_path).write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _parse_float(token: str, where: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ScanFormatError(f"{where}: not a number: {token!r}") from None
    if not math.isfinite(value):
        raise ScanFormatError(f"{where}: non-finite value {token!r}")
    return value


def load_scan(csv_path) -> ScanFrame:
    """Parse and validate a scan CSV plus its pose sidecar.

    Any malformed, non-finite, or negative-evidence row raises
    ScanFormatError naming the file and line.
    """
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise FileNotFoundError(f"scan file not found: {csv_path}")
    text = csv_path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ScanFormatError(f"{csv_path}:1: empty scan file")
    header = lines[0].split(",")
    if header[:3] != ["x", "y", "z"] or len(header) < 5:
        raise ScanFormatError(
            f"{csv_path}:1: header must be x,y,z,e_0,...,e_K-1, got {lines[0]!r}"
        )
    for i, name in enumerate(header[3:]):
        m = _EVIDENCE_COL.match(name)
        if m is None or int(m.group(1)) != i:
            raise ScanFormatError(f"{csv_path}:1: bad evidence column name {name!r}")
    k = len(header) - 3
    n_cols = 3 + k

    points: list[list[float]] = []
    evidence: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        tokens = line.split(",")
        if len(tokens) != n_cols:
            raise ScanFormatError(
                f"{csv_path}:{lineno}: expected {n_cols} columns, got {len(tokens)}"
            )
        where = f"{csv_path}:{lineno}"
        values = [_parse_float(t, where) for t in tokens]
        if any(v < 0.0 for v in values[3:]):
            raise ScanFormatError(f"{where}: negative evidence")
        points.append(values[:3])
        evidence.append(values[3:])

    sidecar_path = _pose_sidecar(csv_path)
    if not sidecar_path.is_file():
        raise FileNotFoundError(f"pose sidecar not found: {sidecar_path}")
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScanFormatError(f"{sidecar_path}: {exc}") from None
    if not isinstance(sidecar, dict) or set(sidecar) != {"seq", "pose"}:
        raise ScanFormatError(f"{sidecar_path}: expected exactly the keys seq, pose")
    pose_values = sidecar["pose"]
    if not isinstance(pose_values, list) or len(pose_values) != 16:
        raise ScanFormatError(f"{sidecar_path}: pose must hold 16 row-major values")
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in pose_values):
        raise ScanFormatError(f"{sidecar_path}: pose values must be finite numbers")
    try:
        return ScanFrame(
            seq=sidecar["seq"],
            pose=np.array(pose_values, dtype=np.float64).reshape(4, 4),
            points=np.array(points, dtype=np.float64).reshape(-1, 3),
            evidence=np.array(evidence, dtype=np.float64).reshape(-1, k),
        )
    except ValueError as exc:
        raise ScanFormatError(f"{csv_path}: {exc}") from None


@dataclass
class SequenceManifest:
    """Ordered scan listing for one sequence directory."""

    directory: Path
    num_classes: int
    scan_files: list[str]
    ground_truth: str | None = None
    generator: dict = field(default_factory=dict)

    def scan_paths(self) -> list[Path]:
        return [self.directory / name for name in self.scan_files]

    def ground_truth_path(self) -> Path | None:
        if self.ground_truth is None:
            return None
        return self.directory / self.ground_truth


def save_manifest(
    directory,
    num_classes: int,
    scan_files: list[str],
    ground_truth: str | None = None,
    generator: dict | None = None,
) -> Path:
    directory = Path(directory)
    payload: dict = {
        "format": MANIFEST_FORMAT,
        "num_classes": int(num_classes),
        "scans": list(scan_files),
    }
    if ground_truth is not None:
        payload["ground_truth"] = ground_truth
    if generator:
        payload["generator"] = generator
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_manifest(directory) -> SequenceManifest:
    directory = Path(directory)
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScanFormatError(f"{path}: {exc}") from None
    if not isinstance(payload, dict):
        raise ScanFormatError(f"{path}: manifest must be a JSON object")
    known = {"format", "num_classes", "scans", "ground_truth", "generator"}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ScanFormatError(f"{path}: unknown manifest keys: {', '.join(unknown)}")
    if payload.get("format") != MANIFEST_FORMAT:
        raise ScanFormatError(
            f"{path}: unsupported manifest format {payload.get('format')!r}"
        )
    num_classes = payload.get("num_classes")
    if not isinstance(num_classes, int) or num_classes < 2:
        raise ScanFormatError(f"{path}: num_classes must be an int >= 2")
    scans = payload.get("scans")
    if (
        not isinstance(scans, list)
        or not scans
        or not all(isinstance(s, str) for s in scans)
    ):
        raise ScanFormatError(f"{path}: scans must be a non-empty list of file names")
    ground_truth = payload.get("ground_truth")
    if ground_truth is not None and not isinstance(ground_truth, str):
        raise ScanFormatError(f"{path}: ground_truth must be a file name")
    generator = payload.get("generator", {})
    if not isinstance(generator, dict):
        raise ScanFormatError(f"{path}: generator must be an object")
    return SequenceManifest(
        directory=directory,
        num_classes=num_classes,
        scan_files=list(scans),
        ground_truth=ground_truth,
        generator=generator,
    )
