"""Map, ground-truth, and pipeline-config file formats.

Map CSV: header ``ix,iy,iz,cx,cy,cz,label,uncertainty,n_obs,b_0..b_{K-1},u``
and one row per cell in lexicographic index order.  Evidential cells store
their fused opinion directly; baseline count cells are written through the
same schema as the opinion of their accumulated evidence, with the
``uncertainty`` column carrying the method's native measure (variance by
default).  Reals use 17 significant digits so export -> import is exact and
repeated exports are byte identical.

PLY output is ASCII 1.0 with one vertex per cell center, a fixed per-class
color palette, and the chosen uncertainty measure scaled into the alpha
channel (alpha = round(255 * uncertainty)).

The pipeline config is a single JSON object mirroring MapConfig plus the
baseline prior and evaluation settings; unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from evmap.evidence import BeliefAssignment, select_uncertainty
from evmap.kernel import KernelParams
from evmap.sbki import (
    DEFAULT_PRIOR,
    SbkiMap,
    cell_opinion,
    sbki_cell_measure,
    sbki_predict_label,
)
from evmap.scan import ScanFormatError, format_real
from evmap.voxmap import MapConfig, VoxelMap, cell_center, cell_uncertainty, predict_label

__all__ = [
    "PipelineConfig",
    "GroundTruthGrid",
    "MapRow",
    "LoadedMap",
    "load_config",
    "save_config",
    "save_ground_truth",
    "load_ground_truth",
    "export_map",
    "import_map",
    "map_rows",
    "write_map_csv",
    "write_ply",
]

GT_HEADER = "ix,iy,iz,label"

# tab10-style palette, cycled when K exceeds it.
PALETTE = (
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
    (188, 189, 34),
    (23, 190, 207),
)


@dataclass(frozen=True)
class PipelineConfig:
    """Full run configuration: mapping, baseline prior, and eval settings."""

    map: MapConfig
    sbki_prior: float = DEFAULT_PRIOR
    ece_bins: int = 15
    sparsification_steps: int = 20

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sbki_prior) and self.sbki_prior > 0.0):
            raise ValueError(f"sbki_prior must be > 0, got {self.sbki_prior!r}")
        if int(self.ece_bins) != self.ece_bins or self.ece_bins < 1:
            raise ValueError(f"ece_bins must be an int >= 1, got {self.ece_bins!r}")
        if int(self.sparsification_steps) != self.sparsification_steps or self.sparsification_steps < 1:
            raise ValueError(
                f"sparsification_steps must be an int >= 1, got {self.sparsification_steps!r}"
            )


def _require_keys(obj: dict, known: set[str], where: str) -> None:
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ValueError(f"{where}: unknown keys: {', '.join(unknown)}")


def load_config(path) -> PipelineConfig:
    """Parse the pipeline config JSON; unknown keys anywhere are errors."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    _require_keys(
        payload,
        {"num_classes", "voxel_size", "kernel", "max_range", "min_weight", "sbki_prior", "eval"},
        str(path),
    )
    for key in ("num_classes", "voxel_size", "kernel"):
        if key not in payload:
            raise ValueError(f"{path}: missing required key {key!r}")
    kernel_obj = payload["kernel"]
    if not isinstance(kernel_obj, dict):
        raise ValueError(f"{path}: kernel must be an object")
    _require_keys(kernel_obj, {"sigma0", "length"}, f"{path}: kernel")
    for key in ("sigma0", "length"):
        if key not in kernel_obj:
            raise ValueError(f"{path}: kernel is missing {key!r}")
    eval_obj = payload.get("eval", {})
    if not isinstance(eval_obj, dict):
        raise ValueError(f"{path}: eval must be an object")
    _require_keys(eval_obj, {"ece_bins", "sparsification_steps"}, f"{path}: eval")

    map_kwargs = dict(
        num_classes=payload["num_classes"],
        voxel_size=payload["voxel_size"],
        kernel=KernelParams(sigma0=kernel_obj["sigma0"], length=kernel_obj["length"]),
    )
    if "max_range" in payload:
        map_kwargs["max_range"] = payload["max_range"]
    if "min_weight" in payload:
        map_kwargs["min_weight"] = payload["min_weight"]
    cfg_kwargs = dict(map=MapConfig(**map_kwargs))
    if "sbki_prior" in payload:
        cfg_kwargs["sbki_prior"] = payload["sbki_prior"]
    if "ece_bins" in eval_obj:
        cfg_kwargs["ece_bins"] = eval_obj["ece_bins"]
    if "sparsification_steps" in eval_obj:
        cfg_kwargs["sparsification_steps"] = eval_obj["sparsification_steps"]
    return PipelineConfig(**cfg_kwargs)


def save_config(path, config: PipelineConfig) -> None:
    payload = {
        "num_classes": config.map.num_classes,
        "voxel_size": config.map.voxel_size,
        "kernel": {
            "sigma0": config.map.kernel.sigma0,
            "length": config.map.kernel.length,
        },
        "max_range": config.map.max_range,
        "min_weight": config.map.min_weight,
        "sbki_prior": config.sbki_prior,
        "eval": {
            "ece_bins": config.ece_bins,
            "sparsification_steps": config.sparsification_steps,
        },
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@dataclass(frozen=True)
class GroundTruthGrid:
    """Reference class label per covered cell index."""

    cells: dict[tuple[int, int, int], int]

    def __post_init__(self) -> None:
        for key, label in self.cells.items():
            if len(key) != 3:
                raise ValueError(f"cell index must be a 3-tuple, got {key!r}")
            if int(label) != label or label < 0:
                raise ValueError(f"label must be a non-negative int, got {label!r}")

    def __len__(self) -> int:
        return len(self.cells)

    def max_label(self) -> int:
        return max(self.cells.values())


def save_ground_truth(path, gt: GroundTruthGrid) -> None:
    lines = [GT_HEADER]
    for (ix, iy, iz), label in sorted(gt.cells.items()):
        lines.append(f"{ix},{iy},{iz},{label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_ground_truth(path) -> GroundTruthGrid:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"ground truth not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != GT_HEADER:
        raise ScanFormatError(f"{path}:1: header must be {GT_HEADER!r}")
    cells: dict[tuple[int, int, int], int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        tokens = line.split(",")
        if len(tokens) != 4:
            raise ScanFormatError(f"{path}:{lineno}: expected 4 columns, got {len(tokens)}")
        try:
            ix, iy, iz, label = (int(t) for t in tokens)
        except ValueError:
            raise ScanFormatError(f"{path}:{lineno}: not an integer row") from None
        key = (ix, iy, iz)
        if key in cells:
            raise ScanFormatError(f"{path}:{lineno}: duplicate cell index {key}")
        if label < 0:
            raise ScanFormatError(f"{path}:{lineno}: negative label")
        cells[key] = label
    return GroundTruthGrid(cells=cells)


@dataclass
class MapRow:
    """One exported cell: index, center, decision, uncertainty, and opinion."""

    index: tuple[int, int, int]
    center: np.ndarray
    label: int
    uncertainty: float
    n_obs: int
    mass: BeliefAssignment


@dataclass
class LoadedMap:
    """Cells parsed back from a map CSV, keyed by index."""

    num_classes: int
    cells: dict[tuple[int, int, int], MapRow]

    def __len__(self) -> int:
        return len(self.cells)


def map_rows(map_obj, measure: str | None = None) -> list[MapRow]:
    """Rows for export, lexicographically ordered.

    The default measure is vacuity for the evidential map and the native
    Dirichlet-posterior variance for the count baseline.
    """
    rows: list[MapRow] = []
    if isinstance(map_obj, VoxelMap):
        measure = measure or "vacuity"
        k = map_obj.config.num_classes
        for index, cell in map_obj.sorted_cells():
            rows.append(
                MapRow(
                    index=index,
                    center=cell_center(index, map_obj.config.voxel_size),
                    label=predict_label(cell, k),
                    uncertainty=cell_uncertainty(cell, k, measure),
                    n_obs=cell.n_obs,
                    mass=cell.mass,
                )
            )
    elif isinstance(map_obj, SbkiMap):
        measure = measure or "variance"
        for index, cell in map_obj.sorted_cells():
            rows.append(
                MapRow(
                    index=index,
                    center=cell_center(index, map_obj.config.voxel_size),
                    label=sbki_predict_label(cell),
                    uncertainty=sbki_cell_measure(cell, map_obj.prior, measure),
                    n_obs=cell.n_obs,
                    mass=cell_opinion(cell, map_obj.prior),
                )
            )
    else:
        raise TypeError(f"cannot export {type(map_obj).__name__}")
    return rows


def _map_header(num_classes: int) -> str:
    names = ["ix", "iy", "iz", "cx", "cy", "cz", "label", "uncertainty", "n_obs"]
    names += [f"b_{i}" for i in range(num_classes)]
    names.append("u")
    return ",".join(names)


def write_map_csv(path, rows: list[MapRow], num_classes: int) -> None:
    lines = [_map_header(num_classes)]
    for row in rows:
        fields = [str(v) for v in row.index]
        fields += [format_real(v) for v in row.center]
        fields += [str(row.label), format_real(row.uncertainty), str(row.n_obs)]
        fields += [format_real(v) for v in row.mass.b]
        fields.append(format_real(row.mass.u))
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_ply(path, rows: list[MapRow], num_classes: int) -> None:
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(rows)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property uchar alpha",
        "end_header",
    ]
    body = []
    for row in rows:
        r, g, b = PALETTE[row.label % len(PALETTE)]
        alpha = int(round(255.0 * min(max(row.uncertainty, 0.0), 1.0)))
        coords = " ".join(format_real(v) for v in row.center)
        body.append(f"{coords} {r} {g} {b} {alpha}")
    Path(path).write_text("\n".join(header + body) + "\n", encoding="utf-8")


def export_map(map_obj, path, file_format: str = "csv", measure: str | None = None) -> None:
    """Write a map to CSV or PLY; refuses empty maps and unknown formats."""
    rows = map_rows(map_obj, measure)
    if not rows:
        raise ValueError("refusing to export an empty map")
    if file_format == "csv":
        write_map_csv(path, rows, map_obj.config.num_classes)
    elif file_format == "ply":
        write_ply(path, rows, map_obj.config.num_classes)
    else:
        raise ValueError(f"unknown export format {file_format!r}; expected csv or ply")


def import_map(path) -> LoadedMap:
    """Parse a map CSV back into per-cell records."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"map file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ScanFormatError(f"{path}:1: empty map file")
    header = lines[0].split(",")
    if len(header) < 12 or header[:9] != [
        "ix", "iy", "iz", "cx", "cy", "cz", "label", "uncertainty", "n_obs",
    ] or header[-1] != "u":
        raise ScanFormatError(f"{path}:1: unrecognized map header")
    k = len(header) - 10
    if [h for h in header[9:-1]] != [f"b_{i}" for i in range(k)]:
        raise ScanFormatError(f"{path}:1: unrecognized belief columns")

    cells: dict[tuple[int, int, int], MapRow] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        tokens = line.split(",")
        if len(tokens) != len(header):
            raise ScanFormatError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(tokens)}"
            )
        try:
            index = (int(tokens[0]), int(tokens[1]), int(tokens[2]))
            center = np.array([float(t) for t in tokens[3:6]])
            label = int(tokens[6])
            uncertainty = float(tokens[7])
            n_obs = int(tokens[8])
            b = np.array([float(t) for t in tokens[9:9 + k]])
            u = float(tokens[9 + k])
        except ValueError:
            raise ScanFormatError(f"{path}:{lineno}: malformed row") from None
        if not (np.all(np.isfinite(center)) and math.isfinite(uncertainty)):
            raise ScanFormatError(f"{path}:{lineno}: non-finite value")
        if index in cells:
            raise ScanFormatError(f"{path}:{lineno}: duplicate cell index {index}")
        if not 0 <= label < k:
            raise ScanFormatError(f"{path}:{lineno}: label {label} out of range")
        try:
            mass = BeliefAssignment(b=b, u=u)
        except ValueError as exc:
            raise ScanFormatError(f"{path}:{lineno}: {exc}") from None
        cells[index] = MapRow(
            index=index,
            center=center,
            label=label,
            uncertainty=uncertainty,
            n_obs=n_obs,
            mass=mass,
        )
    return LoadedMap(num_classes=k, cells=cells)
