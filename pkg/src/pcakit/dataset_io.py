"""Dataset persistence: a rank-4 DCT1 batch next to a labels file.

`<prefix>.dct` holds the stacked (N, H, W, C) pixels; `<prefix>.labels`
holds one `sample_id,label` row per sample in batch order, with a metadata
comment line carrying the dataset name and class count.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .container import load_tensor_container, save_tensor_container
from .datasets import DatasetView, LabeledSample
from .images import RasterImage


def save_dataset_view(view: DatasetView, prefix) -> None:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_tensor_container(view.pixels(), prefix.with_suffix(".dct"))
    lines = [f"# dataset name={view.name} classes={view.num_classes}", "sample_id,label"]
    for s in view.samples:
        lines.append(f"{s.sample_id},{s.label}")
    prefix.with_suffix(".labels").write_text("\n".join(lines) + "\n", encoding="ascii")


def load_dataset_view(prefix) -> DatasetView:
    prefix = Path(prefix)
    batch = load_tensor_container(prefix.with_suffix(".dct"))
    if not isinstance(batch, np.ndarray) or batch.ndim != 4:
        raise ValueError(f"{prefix}.dct: expected a rank-4 batch")
    lines = prefix.with_suffix(".labels").read_text(encoding="ascii").splitlines()
    if len(lines) < 3 or not lines[0].startswith("# dataset "):
        raise ValueError(f"{prefix}.labels: missing dataset header")
    meta = {}
    for token in lines[0].removeprefix("# dataset ").split(" ", 1):
        key, _, value = token.partition("=")
        meta[key] = value
    if lines[1] != "sample_id,label":
        raise ValueError(f"{prefix}.labels: unexpected columns {lines[1]!r}")
    samples = []
    for i, ln in enumerate(lines[2:]):
        if not ln.strip():
            continue
        sid, _, label = ln.partition(",")
        samples.append(LabeledSample(RasterImage(batch[i]), int(label), int(sid)))
    if len(samples) != batch.shape[0]:
        raise ValueError(
            f"{prefix}: labels file lists {len(samples)} rows, batch holds {batch.shape[0]}"
        )
    return DatasetView(tuple(samples), int(meta["classes"]), meta.get("name", str(prefix)))
