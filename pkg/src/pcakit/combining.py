"""Composite images: tiling whole standardized images of one class into a
k x k grid, plus compressed-dataset assembly and storage accounting.

Sources are never cropped beyond standardization; cell rectangles tile the
composite exactly, so extracting a cell recovers the standardized source.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import container_file_bytes, container_payload_bytes, save_tensor_container, load_tensor_container
from .datasets import DatasetView, LabeledSample
from .images import RasterImage, standardize_image
from .pruning import SubsetIndices


@dataclass(frozen=True)
class GridSpec:
    k: int = 2
    cell_side: int = 16

    def __post_init__(self) -> None:
        if self.k < 1 or self.cell_side < 1:
            raise ValueError("grid k and cell_side must be >= 1")

    @property
    def out_side(self) -> int:
        return self.k * self.cell_side

    @property
    def cells(self) -> int:
        return self.k * self.k


@dataclass(frozen=True)
class CellRef:
    source_sample_id: int
    row: int
    col: int


@dataclass(frozen=True, eq=False)
class CompositeImage:
    image: RasterImage
    cells: tuple  # k*k CellRef, row-major
    label: int
    grid: GridSpec
    sample_id: int = 0

    def __post_init__(self) -> None:
        if len(self.cells) != self.grid.cells:
            raise ValueError(f"expected {self.grid.cells} cells, got {len(self.cells)}")
        if self.image.height != self.grid.out_side or self.image.width != self.grid.out_side:
            raise ValueError("composite image side must equal k * cell_side")


def extract_cell(composite: CompositeImage, row: int, col: int) -> RasterImage:
    """The exact pixel rectangle of cell (row, col)."""
    k, cell = composite.grid.k, composite.grid.cell_side
    if not (0 <= row < k and 0 <= col < k):
        raise ValueError(f"cell ({row}, {col}) outside a {k}x{k} grid")
    px = composite.image.pixels[row * cell : (row + 1) * cell, col * cell : (col + 1) * cell]
    return RasterImage(px.copy())


def combine(samples, grid: GridSpec, mode: str = "bilinear", sample_id: int = 0) -> CompositeImage:
    """Tile k*k same-class samples, row-major, each standardized to the cell side."""
    samples = list(samples)
    if len(samples) != grid.cells:
        raise ValueError(f"combine needs exactly {grid.cells} samples, got {len(samples)}")
    labels = {s.label for s in samples}
    if len(labels) != 1:
        raise ValueError(f"combine requires a single class, got labels {sorted(labels)}")
    channels = samples[0].image.channels
    side = grid.out_side
    canvas = np.zeros((side, side, channels), dtype=np.float32)
    cells = []
    for i, s in enumerate(samples):
        r, c = divmod(i, grid.k)
        std = standardize_image(s.image, grid.cell_side, mode=mode)
        canvas[
            r * grid.cell_side : (r + 1) * grid.cell_side,
            c * grid.cell_side : (c + 1) * grid.cell_side,
        ] = std.pixels
        cells.append(CellRef(s.sample_id, r, c))
    return CompositeImage(
        image=RasterImage(canvas),
        cells=tuple(cells),
        label=labels.pop(),
        grid=grid,
        sample_id=sample_id,
    )


@dataclass(frozen=True, eq=False)
class CompressedDataset:
    """Composites grouped per class; the artifact the evaluation stage trains on."""

    composites: tuple
    num_classes: int
    grid: GridSpec
    provenance: str = ""
    name: str = "compressed"

    def __len__(self) -> int:
        return len(self.composites)

    def __iter__(self):
        return iter(self.composites)

    def per_class_counts(self) -> dict:
        counts: dict[int, int] = {}
        for comp in self.composites:
            counts[comp.label] = counts.get(comp.label, 0) + 1
        return counts


def build_compressed_dataset(
    dataset: DatasetView,
    subset: SubsetIndices,
    grid: GridSpec,
    ipc_out: int,
    mode: str = "bilinear",
) -> CompressedDataset:
    """Group each class's selected samples, in selection order, into k^2 blocks.

    The subset must hold exactly ipc_out * k^2 ids per class; the easiest block
    becomes composite 0 of its class, and so on.
    """
    per_class: dict[int, list[LabeledSample]] = {}
    for sid in subset.sample_ids:
        s = dataset.by_id(sid)
        per_class.setdefault(s.label, []).append(s)
    need = ipc_out * grid.cells
    for label, members in sorted(per_class.items()):
        if len(members) != need:
            raise ValueError(
                f"class {label} has {len(members)} selected samples, "
                f"needs exactly ipc_out*k^2 = {need}"
            )
    composites = []
    for label in sorted(per_class):
        members = per_class[label]
        for i in range(ipc_out):
            block = members[i * grid.cells : (i + 1) * grid.cells]
            composites.append(
                combine(block, grid, mode=mode, sample_id=label * ipc_out + i)
            )
    return CompressedDataset(
        composites=tuple(composites),
        num_classes=dataset.num_classes,
        grid=grid,
        provenance=subset.provenance,
        name=f"{dataset.name}/compressed-k{grid.k}-ipc{ipc_out}",
    )


@dataclass(frozen=True)
class StorageReport:
    num_images: int
    payload_bytes: int
    file_bytes: int
    cell_resolution_original_bytes: int
    payload_ratio_vs_cell_originals: float
    composite_pixels: int
    source_pixels_at_composite_side: int
    pixel_ratio_vs_full_originals: float


def storage_report(compressed: CompressedDataset) -> StorageReport:
    """Byte and pixel accounting for a compressed dataset.

    A composite holds exactly the pixels of its k^2 sources at cell resolution
    (payload ratio 1); versus keeping every source at the composite's full
    side, the pixel ratio is 1 : k^2.
    """
    grid = compressed.grid
    side = grid.out_side
    channels = compressed.composites[0].image.channels if compressed.composites else 3
    n = len(compressed.composites)
    payload = n * container_payload_bytes(side, side, channels)
    files = n * container_file_bytes(side, side, channels)
    originals_cell = n * grid.cells * container_payload_bytes(grid.cell_side, grid.cell_side, channels)
    composite_px = n * side * side
    source_px_full = n * grid.cells * side * side
    return StorageReport(
        num_images=n,
        payload_bytes=payload,
        file_bytes=files,
        cell_resolution_original_bytes=originals_cell,
        payload_ratio_vs_cell_originals=payload / originals_cell if originals_cell else 1.0,
        composite_pixels=composite_px,
        source_pixels_at_composite_side=source_px_full,
        pixel_ratio_vs_full_originals=composite_px / source_px_full if source_px_full else 1.0,
    )


MANIFEST_NAME = "manifest.txt"
MANIFEST_COLUMNS = "file,label,cell_row,cell_col,source_sample_id"


def composite_filename(label: int, index: int) -> str:
    return f"class{label}_{index}.dct"


def save_compressed_dataset(compressed: CompressedDataset, out_dir) -> dict:
    """One DCT1 file per composite plus a manifest of cells and provenance.

    Returns {filename: bytes written} including the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, int] = {}
    lines = [
        f"# compressed-dataset classes={compressed.num_classes} grid={compressed.grid.k} "
        f"cell={compressed.grid.cell_side} provenance={compressed.provenance}",
        f"# columns: {MANIFEST_COLUMNS}",
    ]
    index_within: dict[int, int] = {}
    for comp in compressed.composites:
        idx = index_within.get(comp.label, 0)
        index_within[comp.label] = idx + 1
        fname = composite_filename(comp.label, idx)
        save_tensor_container(comp.image, out / fname)
        written[fname] = (out / fname).stat().st_size
        for ref in comp.cells:
            lines.append(f"{fname},{comp.label},{ref.row},{ref.col},{ref.source_sample_id}")
    manifest = "\n".join(lines) + "\n"
    (out / MANIFEST_NAME).write_text(manifest, encoding="ascii")
    written[MANIFEST_NAME] = (out / MANIFEST_NAME).stat().st_size
    return written


class ManifestError(ValueError):
    pass


def validate_manifest(path) -> dict:
    """Schema check: header plus rows of exactly (file, label, row, col, source id).

    This is the hard-label guarantee: the artifact carries class indices and
    cell geometry only, never per-sample probability vectors.
    """
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if len(lines) < 2 or not lines[0].startswith("# compressed-dataset "):
        raise ManifestError(f"{path}: missing compressed-dataset header")
    if lines[1] != f"# columns: {MANIFEST_COLUMNS}":
        raise ManifestError(f"{path}: unexpected columns line {lines[1]!r}")
    header: dict[str, str] = {}
    for token in lines[0].removeprefix("# compressed-dataset ").split(" ", 3):
        if "=" in token:
            k, v = token.split("=", 1)
            header[k] = v
    rows = []
    for ln in lines[2:]:
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != 5:
            raise ManifestError(f"{path}: row has {len(parts)} fields, expected 5: {ln!r}")
        fname, label, row, col, source = parts
        if not fname.endswith(".dct"):
            raise ManifestError(f"{path}: bad composite filename {fname!r}")
        rows.append((fname, int(label), int(row), int(col), int(source)))
    if not rows:
        raise ManifestError(f"{path}: manifest lists no cells")
    return {"header": header, "rows": rows}


def load_compressed_dataset(in_dir) -> CompressedDataset:
    root = Path(in_dir)
    parsed = validate_manifest(root / MANIFEST_NAME)
    header = parsed["header"]
    grid = GridSpec(k=int(header["grid"]), cell_side=int(header["cell"]))
    num_classes = int(header["classes"])
    provenance = header.get("provenance", "")
    by_file: dict[str, list] = {}
    labels: dict[str, int] = {}
    for fname, label, row, col, source in parsed["rows"]:
        by_file.setdefault(fname, []).append((row, col, source))
        labels[fname] = label
    def file_key(fname: str):
        stem = fname.removesuffix(".dct")
        label, _, idx = stem.removeprefix("class").partition("_")
        return (int(label), int(idx))

    composites = []
    for i, fname in enumerate(sorted(by_file, key=file_key)):
        image = load_tensor_container(root / fname)
        cells = tuple(
            CellRef(source, row, col)
            for row, col, source in sorted(by_file[fname])
        )
        composites.append(
            CompositeImage(image=image, cells=cells, label=labels[fname], grid=grid, sample_id=i)
        )
    return CompressedDataset(
        composites=tuple(composites),
        num_classes=num_classes,
        grid=grid,
        provenance=provenance,
        name=str(in_dir),
    )
