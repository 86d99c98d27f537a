"""Stage orchestration: extract, detect, features, train, evaluate."""
from __future__ import annotations

import csv
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .breast import Extraction, Orientation, BreastRegion, draw_line, extract_breast
from .classifiers import (
    AcrLabel, Evaluation, MlpModel, TrainingSet, evaluate, knn_classify, load_mlp,
    mlp_classify, mlp_train, save_mlp,
)
from .config import PipelineConfig
from .errors import DegenerateInputError, MammosegError, StageError
from .features import FEATURE_NAMES, FeatureVector, RoiBox, feature_vector, roi_bounding_box
from .levelset import DetectedRegions, contour_cells, detect, seed_mask
from .raster import (
    GrayImage, OverlayImage, ensure_dir, read_pgm, render_overlay, write_pgm, write_ppm,
)

log = logging.getLogger(__name__)

FEATURE_COLUMNS = ("id", "x_min", "y_min", "x_max", "y_max") + FEATURE_NAMES + ("label",)
SPLITS = ("train", "test")
MODEL_FILE = "mlp_model.txt"
KNN_FILE = "knn_train.csv"


@contextmanager
def stage(name: str):
    """Tag any failure inside the block with the stage name."""
    try:
        yield
    except StageError:
        raise
    except (MammosegError, ValueError, OSError, IndexError, KeyError) as exc:
        raise StageError(name, exc) from exc


def image_id(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


# --------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: AcrLabel
    split: str

    @property
    def id(self) -> str:
        return os.path.splitext(self.path.replace("\\", "/"))[0].replace("/", "_")


@dataclass(frozen=True)
class DatasetManifest:
    entries: Tuple[ManifestEntry, ...]
    root: str = "."

    @classmethod
    def load(cls, path: str) -> "DatasetManifest":
        """Read a ``path,label,split`` CSV; image paths are relative to the manifest."""
        root = os.path.dirname(os.path.abspath(path))
        entries = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"path", "label", "split"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: manifest header must be path,label,split")
            for n, row in enumerate(reader, 2):
                split = row["split"].strip().lower()
                if split not in SPLITS:
                    raise ValueError(f"{path}:{n}: split must be train or test, got {row['split']!r}")
                label = AcrLabel.parse(row["label"])
                rel = row["path"].strip()
                if not os.path.exists(os.path.join(root, rel)):
                    raise FileNotFoundError(f"{path}:{n}: missing image {rel}")
                entries.append(ManifestEntry(rel, label, split))
        return cls(tuple(entries), root)

    def resolve(self, entry: ManifestEntry) -> str:
        return os.path.join(self.root, entry.path)

    def split(self, name: str) -> List[ManifestEntry]:
        return [e for e in self.entries if e.split == name]


# --------------------------------------------------------------------------
# per-image stages


def extraction_overlay(img: GrayImage, ext: Extraction) -> OverlayImage:
    """Original image with the breast outline and both separation lines."""
    mask = ext.region.mask.bits
    ys, xs = np.nonzero(contour_cells(mask))
    pts = [np.stack([xs, ys], axis=1)]
    sep = ext.separation
    if not sep.skipped:
        wall = 0 if ext.orientation is Orientation.LEFT_TO_RIGHT else mask.shape[1] - 1
        for p in (sep.point_a, sep.point_b):
            pts.append(draw_line((wall, p[1]), p))
    return render_overlay(img, np.concatenate(pts))


def extract(img: GrayImage, cfg: PipelineConfig) -> Extraction:
    with stage("extract"):
        return extract_breast(img, cfg.threshold, cfg.enhance)


@dataclass(frozen=True)
class Detection:
    regions: DetectedRegions
    box: RoiBox
    fallback: bool  # the box came from the seed mask rather than the level set


def _grow(box: RoiBox, min_size: int, width: int, height: int) -> RoiBox:
    """Widen a box symmetrically (clipped to the image) until each side spans min_size."""
    def span(lo, hi, limit):
        need = min(min_size, limit) - (hi - lo + 1)
        if need <= 0:
            return lo, hi
        lo -= need // 2
        hi += need - need // 2
        if lo < 0:
            hi, lo = hi - lo, 0
        if hi > limit - 1:
            lo, hi = lo - (hi - limit + 1), limit - 1
        return max(lo, 0), hi

    x0, x1 = span(box.x_min, box.x_max, width)
    y0, y1 = span(box.y_min, box.y_max, height)
    return RoiBox.from_extent(x0, y0, x1, y1)


def detect_roi(region: BreastRegion, cfg: PipelineConfig) -> Detection:
    """Level-set detection on the masked breast, bounded to an ROI box.

    When the front collapses the seed stratum itself is bounded instead.
    """
    with stage("detect"):
        img = region.masked_image
        if not (img.data[region.mask.bits] > 0).any():
            raise DegenerateInputError("no pixel above the seed threshold inside the breast mask")
        found = detect(img, cfg.speed_params(), cfg.schedule())
        fallback = found.degenerate or found.region_count == 0
        if fallback:
            box = roi_bounding_box(seed_mask(img, cfg.seed_fraction) & region.mask.bits)
        else:
            box = roi_bounding_box(found)
        if not found.converged:
            log.info("level set stopped after %d iterations without converging", found.iterations)
        return Detection(found, _grow(box, cfg.roi_min_size, img.width, img.height), fallback)


def detection_overlay(img: GrayImage, det: Detection) -> OverlayImage:
    return render_overlay(img, det.regions.contour, det.box.extent)


def features(img: GrayImage, box: RoiBox, cfg: PipelineConfig) -> FeatureVector:
    with stage("features"):
        return feature_vector(img, box, cfg.levels, cfg.literal_mean)


@dataclass(frozen=True)
class ImageResult:
    id: str
    extraction: Extraction
    detection: Detection
    features: FeatureVector

    @property
    def box(self) -> RoiBox:
        return self.detection.box


def process_image(img: GrayImage, cfg: PipelineConfig, ident: str = "image") -> ImageResult:
    ext = extract(img, cfg)
    det = detect_roi(ext.region, cfg)
    fv = features(img, det.box, cfg)
    return ImageResult(ident, ext, det, fv)


# --------------------------------------------------------------------------
# CSV exports


def feature_row(ident: str, box: RoiBox, fv: FeatureVector, label: Optional[AcrLabel]):
    return [ident, *map(str, box.extent), *(repr(float(v)) for v in fv.as_array()),
            label.name if label is not None else ""]


def write_feature_csv(path: str, rows) -> str:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(FEATURE_COLUMNS)
        wr.writerows(rows)
    return path


@dataclass(frozen=True)
class FeatureRecord:
    id: str
    box: RoiBox
    features: FeatureVector
    label: Optional[AcrLabel]


def read_feature_csv(path: str) -> List[FeatureRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FEATURE_COLUMNS:
            raise ValueError(f"{path}: unexpected feature CSV header")
        for row in reader:
            box = RoiBox.from_extent(*(int(row[k]) for k in ("x_min", "y_min", "x_max", "y_max")))
            fv = FeatureVector(*(float(row[k]) for k in FEATURE_NAMES))
            lab = AcrLabel.parse(row["label"]) if row["label"] else None
            out.append(FeatureRecord(row["id"], box, fv, lab))
    return out


# --------------------------------------------------------------------------
# single-image commands


def run_extract(cfg: PipelineConfig, path: str, out: Optional[str] = None) -> BreastRegion:
    out = ensure_dir(out or cfg.out)
    with stage("read"):
        img = read_pgm(path)
    ext = extract(img, cfg)
    ident = image_id(path)
    with stage("extract"):
        write_pgm(ext.region.masked_image, os.path.join(out, f"{ident}_masked.pgm"))
        mask = GrayImage(ext.region.mask.bits.astype(np.int64) * 255, 255)
        write_pgm(mask, os.path.join(out, f"{ident}_mask.pgm"))
        write_ppm(extraction_overlay(img, ext), os.path.join(out, f"{ident}_extract.ppm"))
    return ext.region


def run_detect(cfg: PipelineConfig, path: str, out: Optional[str] = None) -> Detection:
    out = ensure_dir(out or cfg.out)
    region = run_extract(cfg, path, out)
    det = detect_roi(region, cfg)
    ident = image_id(path)
    with stage("detect"):
        write_ppm(detection_overlay(region.masked_image, det), os.path.join(out, f"{ident}_detect.ppm"))
        with open(os.path.join(out, f"{ident}_roi.csv"), "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["id", "x_min", "y_min", "x_max", "y_max", "regions", "converged", "fallback"])
            wr.writerow([ident, *det.box.extent, det.regions.region_count,
                         int(det.regions.converged), int(det.fallback)])
    return det


def run_features(cfg: PipelineConfig, path: str, out: Optional[str] = None,
                 label: Optional[AcrLabel] = None) -> FeatureVector:
    out = ensure_dir(out or cfg.out)
    det = run_detect(cfg, path, out)
    with stage("read"):
        img = read_pgm(path)
    fv = features(img, det.box, cfg)
    ident = image_id(path)
    with stage("features"):
        write_feature_csv(os.path.join(out, f"{ident}_features.csv"),
                          [feature_row(ident, det.box, fv, label)])
    return fv


# --------------------------------------------------------------------------
# dataset commands


def manifest_features(cfg: PipelineConfig, manifest: DatasetManifest, split: str,
                      out: str, overlays: bool = False) -> List[FeatureRecord]:
    """Features for every image of one split, also written to ``features_<split>.csv``."""
    entries = manifest.split(split)
    if not entries:
        raise StageError("manifest", f"the {split} split is empty")
    records = []
    ensure_dir(out)
    overlay_dir = ensure_dir(os.path.join(out, "overlays")) if overlays else None
    for e in entries:
        with stage(f"read {e.path}"):
            img = read_pgm(manifest.resolve(e))
        try:
            res = process_image(img, cfg, e.id)
        except StageError as exc:
            raise StageError(f"{exc.stage} {e.path}", exc.cause) from exc
        if overlay_dir:
            write_ppm(detection_overlay(res.extraction.region.masked_image, res.detection),
                      os.path.join(overlay_dir, f"{e.id}_detect.ppm"))
        records.append(FeatureRecord(e.id, res.box, res.features, e.label))
    write_feature_csv(os.path.join(out, f"features_{split}.csv"),
                      [feature_row(r.id, r.box, r.features, r.label) for r in records])
    return records


def _training_set(records: List[FeatureRecord]) -> TrainingSet:
    return TrainingSet.build([(r.features, r.label) for r in records])


def _check_classes(train: TrainingSet, classifier: str):
    missing = sorted(set(AcrLabel) - set(train.classes_present()))
    if missing:
        names = ", ".join(m.name for m in missing)
        raise StageError(f"train {classifier}", f"class absent from training: {names}")


def _wants(cfg: PipelineConfig, name: str) -> bool:
    return cfg.classifier in (name, "both")


def run_train(cfg: PipelineConfig, manifest_path: str, out: Optional[str] = None,
              records: Optional[List[FeatureRecord]] = None) -> Dict[str, object]:
    """Fit the configured classifiers on the train split; writes the model files."""
    out = ensure_dir(out or cfg.out)
    if records is None:
        with stage("manifest"):
            manifest = DatasetManifest.load(manifest_path)
        records = manifest_features(cfg, manifest, "train", out)
    train = _training_set(records)
    models: Dict[str, object] = {}
    if _wants(cfg, "knn"):
        _check_classes(train, "knn")
        with stage("train knn"):
            if cfg.knn_k > len(train):
                raise ValueError(f"knn_k={cfg.knn_k} exceeds the {len(train)} training samples")
            write_feature_csv(os.path.join(out, KNN_FILE),
                              [feature_row(r.id, r.box, r.features, r.label) for r in records])
        models["knn"] = train
    if _wants(cfg, "mlp"):
        _check_classes(train, "mlp")
        with stage("train mlp"):
            model, _ = mlp_train(train, cfg.mlp_hyper())
            save_mlp(model, os.path.join(out, MODEL_FILE))
        models["mlp"] = model
    return models


def _load_models(cfg: PipelineConfig, out: str) -> Dict[str, object]:
    models: Dict[str, object] = {}
    with stage("load models"):
        if _wants(cfg, "knn"):
            models["knn"] = _training_set(read_feature_csv(os.path.join(out, KNN_FILE)))
        if _wants(cfg, "mlp"):
            models["mlp"] = load_mlp(os.path.join(out, MODEL_FILE))
    return models


def _predict(cfg: PipelineConfig, name: str, model, fv: FeatureVector) -> AcrLabel:
    if name == "knn":
        return knn_classify(model, fv, cfg.knn_k)
    return mlp_classify(model, fv)


def _pct(v: float) -> str:
    return "n/a" if np.isnan(v) else f"{100.0 * v:.1f}"


def format_report(cfg: PipelineConfig, results: Dict[str, Evaluation]) -> str:
    names = list(results)
    lines = ["Per-class accuracy (%)", ""]
    lines.append("class   " + "".join(f"{n.upper():>8}" for n in names))
    for acr in AcrLabel:
        lines.append(f"{acr.name:<8}" + "".join(f"{_pct(results[n].per_class[acr.index]):>8}" for n in names))
    lines.append(f"{'overall':<8}" + "".join(f"{_pct(results[n].overall):>8}" for n in names))
    for n in names:
        lines += ["", f"Confusion matrix {n.upper()} (rows truth, columns prediction)"]
        lines.append("        " + "".join(f"{a.name:>6}" for a in AcrLabel))
        for acr in AcrLabel:
            lines.append(f"{acr.name:<8}" + "".join(f"{v:>6d}" for v in results[n].confusion[acr.index]))
    lines += ["", "Configuration", ""]
    lines.append(cfg.to_text().rstrip("\n"))
    return "\n".join(lines) + "\n"


def write_report_csv(path: str, cfg: PipelineConfig, results: Dict[str, Evaluation]) -> None:
    names = list(results)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["class", *(n.upper() for n in names)])
        for acr in AcrLabel:
            wr.writerow([acr.name, *(repr(float(results[n].per_class[acr.index])) for n in names)])
        wr.writerow(["overall", *(repr(results[n].overall) for n in names)])
    for n in names:
        with open(os.path.join(os.path.dirname(path), f"confusion_{n}.csv"), "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["truth", *(a.name for a in AcrLabel)])
            for acr in AcrLabel:
                wr.writerow([acr.name, *results[n].confusion[acr.index]])
    with open(os.path.join(os.path.dirname(path), "config_used.txt"), "w") as fh:
        fh.write(cfg.to_text())


def run_evaluate(cfg: PipelineConfig, manifest_path: str, out: Optional[str] = None,
                 models: Optional[Dict[str, object]] = None,
                 records: Optional[List[FeatureRecord]] = None) -> Dict[str, Evaluation]:
    """Predict the test split and write ``report.txt`` / ``report.csv``."""
    out = ensure_dir(out or cfg.out)
    if records is None:
        with stage("manifest"):
            manifest = DatasetManifest.load(manifest_path)
        records = manifest_features(cfg, manifest, "test", out)
    if models is None:
        models = _load_models(cfg, out)
    results: Dict[str, Evaluation] = {}
    pred_rows = []
    for name, model in models.items():
        with stage(f"evaluate {name}"):
            preds = [_predict(cfg, name, model, r.features) for r in records]
            results[name] = evaluate(list(zip(preds, (r.label for r in records))))
            pred_rows.append(preds)
    with stage("report"):
        with open(os.path.join(out, "predictions.csv"), "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["id", "truth", *models])
            for i, r in enumerate(records):
                wr.writerow([r.id, r.label.name, *(p[i].name for p in pred_rows)])
        with open(os.path.join(out, "report.txt"), "w") as fh:
            fh.write(format_report(cfg, results))
        write_report_csv(os.path.join(out, "report.csv"), cfg, results)
    return results


def run_all(cfg: PipelineConfig, manifest_path: str, out: Optional[str] = None,
            overlays: bool = True) -> Dict[str, Evaluation]:
    out = ensure_dir(out or cfg.out)
    with stage("manifest"):
        manifest = DatasetManifest.load(manifest_path)
        for split in SPLITS:
            if not manifest.split(split):
                raise ValueError(f"the {split} split is empty")
    train_records = manifest_features(cfg, manifest, "train", out, overlays)
    test_records = manifest_features(cfg, manifest, "test", out, overlays)
    models = run_train(cfg, manifest_path, out, train_records)
    return run_evaluate(cfg, manifest_path, out, models, test_records)
