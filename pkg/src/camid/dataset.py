"""Corpus curation, manifest management, splitting, and eval-set construction.

The manifest is UTF-8 JSON-lines: one object per record with the exact field
names of ManifestRecord plus schema_version (required, currently 1). Unknown
fields are ignored on read.

Curation keeps a file iff, in this order: its EXIF Software tag (if any)
contains no blacklisted substring; its estimated JPEG quality meets the
minimum; its dimensions (either orientation) are whitelisted for the class.
The first failing rule is the single recorded rejection reason.
"""

from __future__ import annotations

import dataclasses
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import jpegmeta
from .augment import AugmentOp, apply_op
from .errors import InsufficientDataError, MissingTablesError, NotAJpegError, TooSmallError
from .imagecore import center_crop, load_image, save_png
from .jpegtables import luma_table

SCHEMA_VERSION = 1

# rng stream tags keep the per-purpose streams disjoint for one global seed
_SPLIT_STREAM = 101
_EVAL_STREAM = 102

# Parameter grids for the one manipulation an altered eval image receives:
# training-range endpoints plus interior scale points.
EVAL_MANIPULATION_GRIDS: dict[str, tuple] = {
    "gamma": (0.8, 1.2),
    "jpeg": (70, 90),
    "scale": (0.5, 0.8, 1.5, 2.0),
    "contrast": (0.8, 1.2),
}


@dataclass
class ManifestRecord:
    """One curated image with class, split and provenance metadata."""

    path: str
    class_id: int
    class_name: str
    split: str = "train"
    altered: bool = False
    manipulation: str | None = None
    width: int = 0
    height: int = 0
    exif_software: str | None = None
    jpeg_quality: int | None = None

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return json.dumps(d, sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "ManifestRecord":
        d = json.loads(line)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"manifest line missing schema_version={SCHEMA_VERSION}")
        names = {f.name for f in dataclasses.fields(ManifestRecord)}
        return ManifestRecord(**{k: v for k, v in d.items() if k in names})


def write_manifest(records: list[ManifestRecord], path: str | Path) -> None:
    tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")
    tmp.replace(path)


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(ManifestRecord.from_json(line))
    return records


def num_classes(records: list[ManifestRecord]) -> int:
    return max(r.class_id for r in records) + 1 if records else 0


@dataclass(frozen=True)
class CurationRules:
    """Filtering rules; dimension filtering only runs when a whitelist is given."""

    software_blacklist: tuple[str, ...] = ("Photoshop", "Lightroom")
    min_jpeg_quality: int = 95
    dimension_whitelist: dict[str, list[tuple[int, int]]] | None = None

    def __post_init__(self):
        if not 1 <= self.min_jpeg_quality <= 100:
            raise ValueError(f"min_jpeg_quality {self.min_jpeg_quality} outside [1, 100]")
        if self.dimension_whitelist is not None:
            for cls, sizes in self.dimension_whitelist.items():
                if not sizes:
                    raise ValueError(f"empty dimension whitelist for class {cls!r}")


@dataclass
class FilterReport:
    """Per-file keep/reject decisions plus aggregate counts."""

    decisions: list[tuple[str, str]] = field(default_factory=list)  # (path, "kept" | reason)

    def add(self, path: str, decision: str) -> None:
        self.decisions.append((path, decision))

    @property
    def scanned(self) -> int:
        return len(self.decisions)

    @property
    def kept(self) -> int:
        return sum(1 for _, d in self.decisions if d == "kept")

    def reason_counts(self) -> Counter:
        return Counter(d for _, d in self.decisions if d != "kept")

    def summary(self) -> str:
        lines = [f"scanned={self.scanned} kept={self.kept}"]
        for reason, n in sorted(self.reason_counts().items()):
            lines.append(f"rejected[{reason}]={n}")
        return "\n".join(lines)


def estimate_jpeg_quality(file_bytes: bytes) -> int:
    """Quality whose scaled reference luminance table is L1-closest to the file's.

    Ties break toward the lower quality, the conservative direction for a
    minimum-quality filter.
    """
    tables = jpegmeta.quant_tables(file_bytes)
    if 0 not in tables:
        raise MissingTablesError("no luminance quantization table (id 0)")
    observed = tables[0]
    best_q, best_dist = 1, None
    for q in range(1, 101):
        dist = int(np.abs(luma_table(q) - observed).sum())
        if best_dist is None or dist < best_dist:
            best_q, best_dist = q, dist
    return best_q


def _inspect_file(path: Path, rules: CurationRules, class_name: str) -> tuple[str, dict]:
    """Return (decision, metadata) for one candidate file."""
    meta: dict = {}
    try:
        data = path.read_bytes()
    except OSError:
        return "unreadable", meta
    try:
        software = jpegmeta.exif_software(data)
        meta["exif_software"] = software
        if software is not None:
            low = software.lower()
            if any(b.lower() in low for b in rules.software_blacklist):
                return "software_blacklist", meta
        quality = estimate_jpeg_quality(data)
        meta["jpeg_quality"] = quality
        if quality < rules.min_jpeg_quality:
            return "low_quality", meta
        dims = jpegmeta.image_dimensions(data)
        if dims is None:
            return "not_jpeg", meta
        meta["width"], meta["height"] = dims
        if rules.dimension_whitelist is not None:
            allowed = rules.dimension_whitelist.get(class_name, [])
            w, h = dims
            pairs = {tuple(p) for p in allowed}
            if (w, h) not in pairs and (h, w) not in pairs:
                return "bad_dimensions", meta
        return "kept", meta
    except (NotAJpegError, MissingTablesError):
        return "not_jpeg", meta
    except OSError:
        return "unreadable", meta


def curate(
    root_dir: str | Path,
    rules: CurationRules,
    class_table: dict[str, int] | None = None,
    workers: int = 1,
) -> tuple[list[ManifestRecord], FilterReport]:
    """Scan a per-class directory tree and keep files passing every rule.

    class_table maps class directory names to ids; if omitted, sorted
    directory names get consecutive ids. Per-file IO errors are recorded
    as rejections, never raised.
    """
    root = Path(root_dir)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if class_table is None:
        class_table = {p.name: i for i, p in enumerate(class_dirs)}
    candidates = [
        (path, d.name)
        for d in class_dirs
        if d.name in class_table
        for path in sorted(d.iterdir())
        if path.is_file()
    ]

    def job(item):
        path, cls = item
        return _inspect_file(path, rules, cls)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, candidates))
    else:
        results = [job(item) for item in candidates]

    report = FilterReport()
    records = []
    for (path, cls), (decision, meta) in zip(candidates, results):
        report.add(str(path), decision)
        if decision == "kept":
            records.append(
                ManifestRecord(
                    path=str(path),
                    class_id=class_table[cls],
                    class_name=cls,
                    split="train",
                    width=meta.get("width", 0),
                    height=meta.get("height", 0),
                    exif_software=meta.get("exif_software"),
                    jpeg_quality=meta.get("jpeg_quality"),
                )
            )
    return records, report


def split(
    records: list[ManifestRecord], val_per_class: int, seed: int
) -> list[ManifestRecord]:
    """Assign exactly val_per_class validation records per class by seeded shuffle.

    Returns new records; the remainder of each class is the train split.
    """
    by_class: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        by_class.setdefault(rec.class_id, []).append(i)
    val_indices: set[int] = set()
    for class_id in sorted(by_class):
        members = by_class[class_id]
        if len(members) < val_per_class:
            name = records[members[0]].class_name
            raise InsufficientDataError(
                f"class {name!r} has {len(members)} records, needs >= {val_per_class}"
            )
        rng = np.random.default_rng([seed, _SPLIT_STREAM, class_id])
        perm = rng.permutation(len(members))
        val_indices.update(members[int(j)] for j in perm[:val_per_class])
    out = []
    for i, rec in enumerate(records):
        out.append(
            dataclasses.replace(rec, split="val" if i in val_indices else "train")
        )
    return out


@dataclass
class EvalBuildResult:
    records: list[ManifestRecord]
    skipped: list[tuple[str, str]]  # (path, reason)


def build_eval_set(
    records: list[ManifestRecord],
    seed: int,
    out_dir: str | Path,
    crop_size: int = 500,
) -> EvalBuildResult:
    """Build a competition-style eval set: center crops, half altered.

    Each source image is center-cropped to crop_size; a seeded coin marks
    about half the crops altered, and each altered crop receives exactly one
    manipulation drawn uniformly from the eval grids. Crops are stored as
    PNG so unaltered images stay bit-exact.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    families = sorted(EVAL_MANIPULATION_GRIDS)
    result = EvalBuildResult(records=[], skipped=[])
    for i, rec in enumerate(records):
        try:
            img = load_image(rec.path)
            patch = center_crop(img, crop_size)
        except TooSmallError:
            result.skipped.append((rec.path, "too_small"))
            continue
        except OSError:
            result.skipped.append((rec.path, "unreadable"))
            continue
        rng = np.random.default_rng([seed, _EVAL_STREAM, i])
        altered = bool(rng.random() < 0.5)
        manipulation = None
        if altered:
            family = families[int(rng.integers(0, len(families)))]
            grid = EVAL_MANIPULATION_GRIDS[family]
            param = grid[int(rng.integers(0, len(grid)))]
            op = AugmentOp(family, param)
            patch = apply_op(patch, op)
            manipulation = op.describe()
        dest = out / f"{i:06d}_{rec.class_name}.png"
        save_png(patch, dest)
        result.records.append(
            ManifestRecord(
                path=str(dest),
                class_id=rec.class_id,
                class_name=rec.class_name,
                split="eval",
                altered=altered,
                manipulation=manipulation,
                width=patch.shape[1],
                height=patch.shape[0],
            )
        )
    return result
