"""DOTA annotation files, per-class detection dumps and label-grid archives.

All writers are deterministic and replace their target atomically.
"""
from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codec import CHANNELS, ClassState, LabelGridSet
from .evaluation import Annotation, Detection
from .geometry import DegenerateGeometryError, Quad

DOTA_V1_CLASSES = (
    "plane", "baseball-diamond", "bridge", "ground-track-field", "small-vehicle",
    "large-vehicle", "ship", "tennis-court", "basketball-court", "storage-tank",
    "soccer-ball-field", "roundabout", "harbor", "swimming-pool", "helicopter",
)
DOTA_V15_CLASSES = DOTA_V1_CLASSES + ("container-crane",)
CLASS_SETS = {"v1.0": DOTA_V1_CLASSES, "v1.5": DOTA_V15_CLASSES}

DETECTION_PREFIX = "Task1_"
ARCHIVE_VERSION = 1
HEADER_KEYS = ("imagesource", "gsd")


class DataFormatError(ValueError):
    """Malformed input file; the message carries ``path:line``."""


class ClassNames:
    """Category name <-> id table that admits unknown names with a warning."""

    def __init__(self, names: Iterable[str] = DOTA_V1_CLASSES):
        self.names = list(names)
        self._ids = {n: i for i, n in enumerate(self.names)}

    def id_of(self, name: str) -> int:
        i = self._ids.get(name)
        if i is None:
            warnings.warn(f"unknown category {name!r}; passing it through", stacklevel=2)
            i = self._ids[name] = len(self.names)
            self.names.append(name)
        return i

    def name_of(self, class_id: int) -> str:
        return self.names[class_id]


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal, without a trailing ``.0``."""
    r = repr(float(x))
    if r.endswith(".0"):
        r = r[:-2]
    if r == "-0":
        r = "0"
    return r


def atomic_write(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class AnnotationFile:
    image_id: str
    annotations: list[Annotation] = field(default_factory=list)
    headers: dict[str, str] = field(default_factory=dict)


def _floats(tokens, where):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise DataFormatError(f"{where}: non-numeric coordinate in {' '.join(tokens)!r}") from None


def read_annotation_file(path, classes: ClassNames | None = None) -> AnnotationFile:
    """Parse a DOTA label file; up to two ``key:value`` header lines are allowed."""
    path = Path(path)
    classes = classes if classes is not None else ClassNames()
    out = AnnotationFile(path.stem)
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        text = line.strip()
        if not text:
            continue
        where = f"{path}:{lineno}"
        key = text.split(":", 1)[0]
        if ":" in text and key in HEADER_KEYS and len(text.split()) == 1:
            if out.annotations or len(out.headers) >= 2:
                raise DataFormatError(f"{where}: header line after records")
            out.headers[key] = text.split(":", 1)[1]
            continue
        fields = text.split()
        if len(fields) != 10:
            raise DataFormatError(f"{where}: expected 10 fields, found {len(fields)}")
        coords = _floats(fields[:8], where)
        if fields[9] not in ("0", "1"):
            raise DataFormatError(f"{where}: difficult flag must be 0 or 1, got {fields[9]!r}")
        try:
            quad = Quad.from_flat(coords)
        except (DegenerateGeometryError, ValueError) as exc:
            raise DataFormatError(f"{where}: {exc}") from None
        out.annotations.append(Annotation(out.image_id, classes.id_of(fields[8]), quad, fields[9] == "1"))
    return out


def parse_annotations(path, classes: ClassNames | None = None) -> list[Annotation]:
    return read_annotation_file(path, classes).annotations


def format_annotation_file(af: AnnotationFile, classes: ClassNames) -> str:
    lines = [f"{k}:{v}" for k, v in af.headers.items()]
    for a in af.annotations:
        coords = " ".join(fmt_float(c) for c in a.quad.flat())
        lines.append(f"{coords} {classes.name_of(a.class_id)} {int(a.difficult)}")
    return "".join(line + "\n" for line in lines)


def write_annotation_file(path, af: AnnotationFile, classes: ClassNames) -> None:
    atomic_write(path, format_annotation_file(af, classes))


def read_annotation_dir(directory, classes: ClassNames | None = None) -> list[AnnotationFile]:
    classes = classes if classes is not None else ClassNames()
    files = sorted(Path(directory).glob("*.txt"))
    return [read_annotation_file(p, classes) for p in files]


def parse_detection_lines(text: str, class_id: int, where: str = "<string>") -> list[Detection]:
    dets = []
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        loc = f"{where}:{lineno}"
        if len(fields) != 10:
            raise DataFormatError(f"{loc}: expected 10 fields, found {len(fields)}")
        values = _floats(fields[1:], loc)
        score = values[0]
        if not 0.0 <= score <= 1.0:
            raise DataFormatError(f"{loc}: score {score} outside [0, 1]")
        try:
            quad = Quad.from_flat(values[1:])
        except (DegenerateGeometryError, ValueError) as exc:
            raise DataFormatError(f"{loc}: {exc}") from None
        dets.append(Detection(fields[0], class_id, score, quad))
    return dets


def read_detection_dir(directory, classes: ClassNames | None = None,
                       prefix: str = DETECTION_PREFIX) -> list[Detection]:
    """Read every ``<prefix><class>.txt`` file in ``directory``."""
    classes = classes if classes is not None else ClassNames()
    dets: list[Detection] = []
    for p in sorted(Path(directory).glob(f"{prefix}*.txt")):
        name = p.stem[len(prefix):]
        dets.extend(parse_detection_lines(p.read_text(), classes.id_of(name), str(p)))
    return dets


def read_detection_file(path, class_id: int = 0) -> list[Detection]:
    path = Path(path)
    return parse_detection_lines(path.read_text(), class_id, str(path))


def format_detections(dets: Iterable[Detection]) -> str:
    rows = sorted(dets, key=lambda d: (-d.score, d.image_id, d.quad.flat()))
    return "".join(
        f"{d.image_id} {fmt_float(d.score)} {' '.join(fmt_float(c) for c in d.quad.flat())}\n"
        for d in rows
    )


def write_detection_dir(dets: Sequence[Detection], directory, classes: ClassNames,
                        prefix: str = DETECTION_PREFIX) -> list[Path]:
    """One file per class present in ``dets``; returns the paths written."""
    by_class: dict[int, list[Detection]] = {}
    for d in dets:
        by_class.setdefault(d.class_id, []).append(d)
    paths = []
    for c in sorted(by_class):
        p = Path(directory) / f"{prefix}{classes.name_of(c)}.txt"
        atomic_write(p, format_detections(by_class[c]))
        paths.append(p)
    return paths


def write_grid_archive(grids: LabelGridSet, directory, image_id: str, extra: dict | None = None) -> Path:
    """Write ``<image_id>.bin`` (little-endian float32) and ``<image_id>.json``.

    Per level, tensors are stored in the order class_state, regression,
    gt_index. Returns the manifest path.
    """
    blobs = []
    tensors = []
    offset = 0
    for k in sorted(grids.levels):
        g = grids.levels[k]
        for name, arr, chans in (
            ("class_state", g.class_state[None], ["class_state"]),
            ("regression", g.regression, list(CHANNELS)),
            ("gt_index", g.gt_index[None], ["gt_index"]),
        ):
            data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            tensors.append({"name": name, "level": k, "stride": g.stride, "shape": list(arr.shape),
                            "channels": chans, "offset": offset, "nbytes": len(data)})
            blobs.append(data)
            offset += len(data)
    manifest = {
        "version": ARCHIVE_VERSION,
        "image_id": image_id,
        "image_size": list(grids.image_size),
        "dtype": "<f4",
        "levels": sorted(grids.levels),
        "tensors": tensors,
        "total_bytes": offset,
        "labels": [str(x) for x in grids.labels],
        "class_state_codes": {s.name: int(s) for s in ClassState},
    }
    if extra:
        manifest["config"] = extra
    directory = Path(directory)
    atomic_write(directory / f"{image_id}.bin", b"".join(blobs))
    mpath = directory / f"{image_id}.json"
    atomic_write(mpath, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def read_grid_archive(manifest_path) -> tuple[dict, dict]:
    """Load a manifest and its tensors, keyed by ``(name, level)``."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: {exc}") from None
    blob_path = manifest_path.with_suffix(".bin")
    blob = blob_path.read_bytes()
    if len(blob) != manifest.get("total_bytes"):
        raise DataFormatError(f"{blob_path}: {len(blob)} bytes, manifest declares {manifest.get('total_bytes')}")
    tensors = {}
    for t in manifest["tensors"]:
        arr = np.frombuffer(blob, dtype="<f4", count=int(np.prod(t["shape"])), offset=t["offset"])
        tensors[(t["name"], t["level"])] = arr.reshape(t["shape"])
    return manifest, tensors


def write_archive_tensors(manifest: dict, tensors: dict, directory) -> Path:
    """Re-emit a manifest and tensors previously loaded with :func:`read_grid_archive`."""
    blob = b"".join(
        np.ascontiguousarray(tensors[(t["name"], t["level"])], dtype="<f4").tobytes()
        for t in manifest["tensors"]
    )
    directory = Path(directory)
    image_id = manifest["image_id"]
    atomic_write(directory / f"{image_id}.bin", blob)
    mpath = directory / f"{image_id}.json"
    atomic_write(mpath, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def archive_outputs(manifest: dict, tensors: dict) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Decoder input from an archive: a ``score`` tensor if stored, else positives as 1."""
    out = {}
    for k in manifest["levels"]:
        reg = tensors[("regression", k)].astype(np.float64)
        if ("score", k) in tensors:
            score = tensors[("score", k)][0].astype(np.float64)
        else:
            score = (tensors[("class_state", k)][0] == int(ClassState.POSITIVE)).astype(np.float64)
        out[k] = (score, reg)
    return out
