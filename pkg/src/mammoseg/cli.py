"""Command-line entry point: ``mammoseg <subcommand> --config <path> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import pipeline
from .config import load_config
from .errors import MammosegError
from .phantoms import write_dataset

log = logging.getLogger("mammoseg")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mammoseg", description="Breast extraction, "
                                "level-set ROI detection and texture classification.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_, needs):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        if needs == "input":
            sp.add_argument("--input", required=True, help="input PGM image")
        elif needs == "manifest":
            sp.add_argument("--manifest", required=True, help="CSV with path,label,split")
        return sp

    add("extract", "extract the breast region of one image", "input")
    add("detect", "extract, then detect the calcification ROI", "input")
    sp = add("features", "texture features of the detected ROI", "input")
    sp.add_argument("--label", help="optional ACR label for the CSV row")
    add("train", "fit KNN and MLP on the train split", "manifest")
    add("evaluate", "classify the test split and write the accuracy report", "manifest")
    sp = add("run-all", "features, training and evaluation in one go", "manifest")
    sp.add_argument("--no-overlays", action="store_true", help="skip per-image overlays")
    sp = sub.add_parser("synth", help="write a synthetic five-class phantom dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--train", type=int, default=100, help="train images per class")
    sp.add_argument("--test", type=int, default=50, help="test images per class")
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            print(write_dataset(args.out, args.train, args.test, args.size, args.seed))
            return 0
        cfg = load_config(args.config)
        out = args.out or cfg.out
        cmd = args.command
        if cmd == "extract":
            region = pipeline.run_extract(cfg, args.input, out)
            print(f"breast pixels: {region.mask.count()}")
        elif cmd == "detect":
            det = pipeline.run_detect(cfg, args.input, out)
            print("roi: x_min={} y_min={} x_max={} y_max={}".format(*det.box.extent))
        elif cmd == "features":
            from .classifiers import AcrLabel
            label = AcrLabel.parse(args.label) if args.label else None
            fv = pipeline.run_features(cfg, args.input, out, label)
            print(" ".join(f"{k}={v!r}" for k, v in zip(fv.names(), fv.as_array().tolist())))
        elif cmd == "train":
            models = pipeline.run_train(cfg, args.manifest, out)
            print("trained: " + ", ".join(models))
        elif cmd in ("evaluate", "run-all"):
            if cmd == "evaluate":
                results = pipeline.run_evaluate(cfg, args.manifest, out)
            else:
                results = pipeline.run_all(cfg, args.manifest, out, not args.no_overlays)
            print(pipeline.format_report(cfg, results).split("\n\nConfusion")[0])
    except MammosegError as exc:
        print(f"mammoseg: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
