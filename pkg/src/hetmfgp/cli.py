"""Command-line entry point: ``hetmfgp <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import dump_json
from .doe import HF_COLUMNS, atomic_write
from .pipeline import OUTPUTS, Pipeline, PipelineConfig, StageError

logger = logging.getLogger("hetmfgp")
_HANDLERS: list = []


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _point(text: str) -> list[float]:
    values = _float_list(text)
    if len(values) != len(HF_COLUMNS):
        raise argparse.ArgumentTypeError(f"expected {len(HF_COLUMNS)} comma-separated values "
                                         f"({', '.join(HF_COLUMNS)})")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline configuration JSON")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("hetmfgp-run"), help="output directory")
    common.add_argument("--force", action="store_true", help="recompute cached stages")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hetmfgp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="generate HF/LF training and test sets")
    sub.add_parser("calibrate-lf", parents=[common], help="calibrate the LF laser parameters")
    sub.add_parser("fit-map", parents=[common], help="fit input-mapping calibrations")
    sub.add_parser("train", parents=[common], help="train Het-MFGP and HF-only GP models")
    sub.add_parser("evaluate", parents=[common], help="average test metrics over repeats")

    p = sub.add_parser("predict", parents=[common], help="predict depth and width")
    p.add_argument("--inputs", type=Path, required=True,
                   help=f"CSV with columns {','.join(HF_COLUMNS)} in window units (W, mm/s, g/min, dL/min, mm)")
    p.add_argument("--repeat", type=int, default=0)

    p = sub.add_parser("sobol", parents=[common], help="Sobol indices of a trained surrogate")
    p.add_argument("--output", choices=OUTPUTS, default="depth")
    p.add_argument("--n", type=int, help="base sample count (power of two)")

    p = sub.add_parser("ellipse", parents=[common], help="melt-pool cross-section boundary")
    p.add_argument("--point", type=_point, required=True, help="P,v,mdot,gsh,H")
    p.add_argument("--resolution", type=int, default=181)

    p = sub.add_parser("sweep", parents=[common], help="N_HF x N_LF x lambda study")
    p.add_argument("--n-hf", type=_int_list, default=[5, 10, 20, 30])
    p.add_argument("--n-lf", type=_int_list, default=[0, 10, 20, 30, 40])
    p.add_argument("--lam", type=_float_list, default=None)
    return parser


def _read_inputs(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(c.strip() for c in rows[0]) != HF_COLUMNS:
        raise ValueError(f"{path}: header must be {','.join(HF_COLUMNS)}")
    return np.array(rows[1:], dtype=float).reshape(-1, len(HF_COLUMNS))


def _setup_logging(out: Path, verbose: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    root = logging.getLogger()
    for h in _HANDLERS:
        root.removeHandler(h)
        h.close()
    _HANDLERS.clear()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    _HANDLERS.extend([handler, console])
    for h in _HANDLERS:
        root.addHandler(h)


def run(args) -> int:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    _setup_logging(args.out, args.verbose)
    pipe = Pipeline(cfg, args.out, args.force)
    cmd = args.command
    if cmd == "calibrate-lf":
        res = pipe.calibrate()
        print(f"phi = {res.sigma_factor:.6g}, alpha_L = {res.absorptivity:.6g}, "
              f"R2(depth) = {res.r2_depth:.4f}, R2(width) = {res.r2_width:.4f}")
    elif cmd == "gen-data":
        test, hf, lf = pipe.gen_data()
        mode = "" if lf else " (single-fidelity mode)"
        print(f"test {len(test)} rows, {len(hf)} x {len(hf[0])} HF rows, "
              f"{len(lf)} x {len(lf[0]) if lf else 0} LF rows{mode}")
    elif cmd == "fit-map":
        maps = pipe.fit_maps()
        for (o, k), res in sorted(maps.items()):
            if res is None:
                print(f"{o} repeat {k}: nominal map (no LF data)")
            else:
                print(f"{o} repeat {k}: loss {res.final_loss:.4g} (nominal {res.nominal_loss:.4g})")
    elif cmd == "train":
        models = pipe.train()
        for (o, k), (mf, _) in sorted(models.items()):
            print(f"{o} repeat {k}: rho = {mf.rho:.4g}")
    elif cmd == "evaluate":
        result = pipe.evaluate()
        for o in OUTPUTS:
            for name in ("gp", "mfgp"):
                m = result[o][name]["mean"]
                print(f"{o:5s} {name:5s} R2 {m['r_squared']:.4f}  L2 {m['relative_l2']:.4g}  "
                      f"sigma_avg {m['sigma_avg']:.4g}")
    elif cmd == "predict":
        X = _read_inputs(args.inputs)
        cols = {}
        for o in OUTPUTS:
            cols[o] = pipe.predict(X, o, args.repeat)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*HF_COLUMNS, "depth", "depth_var", "width", "width_var"])
        for i, x in enumerate(X):
            w.writerow([f"{v:.17g}" for v in (*x, cols["depth"][0][i], cols["depth"][1][i],
                                              cols["width"][0][i], cols["width"][1][i])])
        atomic_write(args.out / "predictions.csv", buf.getvalue())
        sys.stdout.write(buf.getvalue())
    elif cmd == "sobol":
        idx = pipe.sobol(args.output, args.n)
        sys.stdout.write(dump_json(idx.to_dict()))
    elif cmd == "ellipse":
        e = pipe.ellipse(args.point, resolution=args.resolution)
        print(f"wrote {args.out / 'ellipse.csv'} ({len(e.mean)} points per boundary)")
    elif cmd == "sweep":
        rows = pipe.sweep(args.n_hf, args.n_lf, args.lam)
        for r in rows:
            print(", ".join(f"{k}={v}" for k, v in r.items()))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except StageError as exc:
        print(f"hetmfgp: error {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"hetmfgp: error [{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
