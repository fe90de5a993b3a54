"""Command-line entry point: ``synth``, ``run``, ``eval`` and ``mwis-check``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .metrics import aggregate, evaluate_labels
from .model import Params, validate_params
from .mwis import oracle_check
from .pipeline import run_pipeline
from .scenario import ScenarioError, load_scenario, read_pgm, save_scenario, write_pgm
from .synth import SynthConfig, synth_scenario


def _fmt_box(b):
    return "" if b is None else " ".join(f"{v:.2f}" for v in b.as_tuple())


def cmd_synth(args) -> int:
    cfg = SynthConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    stream = synth_scenario(cfg)
    path = save_scenario(stream, args.out)
    print(f"wrote {path} ({len(stream.frames)} frames, {stream.num_objects} objects)")
    return 0


def _params_from(args) -> Params:
    return validate_params(
        Params(
            w_m=args.wm,
            w_p=1.0 - args.wm,
            w_n=args.wn,
            w_f=args.wf,
            n_scan=args.N,
            th_b=args.thb,
            th_g=args.thg,
            th_m=args.thm,
            lam=args.lam,
            p_d=args.pd,
            n_hist=args.nhist,
            r=args.r,
            cap_mode=args.cap_mode,
            cross_object_penalty=args.cross_object,
            max_coast=args.coast,
            pls_iterations=args.pls_iterations,
        )
    )


def cmd_run(args) -> int:
    stream = load_scenario(args.scenario)
    params = _params_from(args)
    result = run_pipeline(stream, params, args.generator, args.seed, noise=args.noise, radius=args.radius)
    out = Path(args.out)
    lab_dir = out / "labels"
    lab_dir.mkdir(parents=True, exist_ok=True)
    for t, grid in enumerate(result.labels):
        write_pgm(lab_dir / f"{t:05d}.pgm", grid)

    scores = None
    if stream.has_ground_truth():
        gt = stream.gt_by_frame()
        scores = evaluate_labels(result.labels, [gt[t] for t in range(len(stream.frames))], result.object_ids, include_first=True)
    with open(out / "tracks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "object", "J", "F", "box"])
        for t in range(len(stream.frames)):
            for o in result.object_ids:
                j = f = ""
                if scores is not None:
                    j = f"{scores.j[o][t]:.6f}"
                    f = f"{scores.f[o][t]:.6f}"
                w.writerow([t, o, j, f, _fmt_box(result.boxes[t][o])])
    timing = {
        "frames": len(stream.frames),
        "per_frame_seconds": result.timing.per_frame,
        "merge_seconds": result.timing.merge_seconds,
        "total_seconds": result.timing.total_seconds,
        "max_tree_leaves": result.max_tree_leaves,
        "params": params.to_dict(),
        "generator": args.generator,
        "seed": args.seed,
    }
    (out / "run.json").write_text(json.dumps(timing, indent=1))
    msg = f"wrote {len(result.labels)} label images to {lab_dir}"
    if scores is not None:
        s = scores.summary()
        msg += f"; J={s['J_mean']:.4f} F={s['F_mean']:.4f} G={s['G_mean']:.4f}"
    print(msg)
    return 0


def _read_predictions(pred: Path, count: int) -> list[np.ndarray]:
    base = pred / "labels" if (pred / "labels").is_dir() else pred
    grids = []
    for t in range(count):
        path = base / f"{t:05d}.pgm"
        if not path.exists():
            raise ScenarioError(f"missing prediction {path}")
        grids.append(read_pgm(path))
    return grids


def cmd_eval(args) -> int:
    stream = load_scenario(args.scenario)
    if not stream.has_ground_truth():
        raise ScenarioError("scenario carries no ground-truth masks to evaluate against")
    labels = _read_predictions(Path(args.pred), len(stream.frames))
    for t, grid in enumerate(labels):
        if grid.shape != (stream.height, stream.width):
            raise ScenarioError(f"prediction {t} is {grid.shape}, scenario is {(stream.height, stream.width)}")
    gt = stream.gt_by_frame()
    scores = evaluate_labels(
        labels, [gt[t] for t in range(len(stream.frames))], stream.object_ids, include_first=args.include_first, tol=args.tol
    )
    rows = []
    for o in stream.object_ids:
        stats = {m: aggregate(series) for m, series in (("J", scores.j[o]), ("F", scores.f[o]), ("G", scores.g(o)))}
        for k, name in enumerate(("mean", "recall", "decay")):
            rows.append([o, name, *(f"{stats[m][k]:.6f}" for m in ("J", "F", "G"))])
    s = scores.summary()
    g_stats = np.mean([aggregate(scores.g(o)) for o in stream.object_ids], axis=0)
    for k, name in enumerate(("mean", "recall", "decay")):
        rows.append(["all", name, f"{s['J_' + name]:.6f}", f"{s['F_' + name]:.6f}", f"{g_stats[k]:.6f}"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["object", "statistic", "J", "F", "G"])
        w.writerows(rows)
    print(f"J={s['J_mean']:.4f} F={s['F_mean']:.4f} G={s['G_mean']:.4f} over {len(scores.frames)} frames -> {out}")
    return 0


def cmd_mwis_check(args) -> int:
    densities = [float(x) for x in args.densities.split(",")]
    trials = oracle_check(args.nodes, args.trials, args.seed, densities, args.iterations)
    bad = [i for i, tr in enumerate(trials) if not tr.ok]
    for d in densities:
        sub = [tr for tr in trials if tr.density == d]
        agree = sum(tr.ok for tr in sub)
        print(f"density {d:.2f}: {agree}/{len(sub)} trials agree")
    for i in bad:
        tr = trials[i]
        print(f"  trial {i}: n={tr.nodes} density={tr.density} exact={tr.exact_weight!r} pls={tr.pls_weight!r}")
    print(f"{len(trials) - len(bad)}/{len(trials)} trials: PLS weight equals exact weight")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypoprop", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--config", required=True, help="JSON or YAML synth config")
    p.add_argument("--out", required=True, help="scenario JSON to write")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_synth)

    d = Params()
    p = sub.add_parser("run", help="track and segment a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--wm", type=float, default=d.w_m)
    p.add_argument("--wn", type=float, default=d.w_n)
    p.add_argument("--wf", type=float, default=d.w_f)
    p.add_argument("--N", type=int, default=d.n_scan)
    p.add_argument("--thb", type=int, default=d.th_b)
    p.add_argument("--thg", type=float, default=d.th_g)
    p.add_argument("--thm", type=float, default=d.th_m)
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam)
    p.add_argument("--pd", type=float, default=d.p_d)
    p.add_argument("--nhist", type=int, default=d.n_hist)
    p.add_argument("--r", type=float, default=d.r, help="crop margin ratio")
    p.add_argument("--cap-mode", choices=("leaves", "children"), default=d.cap_mode)
    p.add_argument("--cross-object", action="store_true", help="penalise overlap with other objects' boxes")
    p.add_argument("--coast", type=int, default=d.max_coast, help="max consecutive frames a track may coast")
    p.add_argument("--pls-iterations", type=int, default=d.pls_iterations)
    p.add_argument("--generator", choices=("oracle", "flowprop"), default="flowprop")
    p.add_argument("--noise", type=float, default=0.0, help="oracle boundary flip probability")
    p.add_argument("--radius", type=int, default=0, help="flowprop smoothing radius")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score predicted label images")
    p.add_argument("--pred", required=True, help="directory of NNNNN.pgm label images")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="CSV file to write")
    p.add_argument("--tol", type=float, default=None, help="contour tolerance in pixels")
    p.add_argument("--include-first", action="store_true", help="score the annotated frame too")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mwis-check", help="PLS versus exhaustive MWIS on random graphs")
    p.add_argument("--nodes", type=int, default=16)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--densities", default="0.1,0.3,0.6")
    p.add_argument("--iterations", type=int, default=10_000)
    p.set_defaults(func=cmd_mwis_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError, KeyError, OSError) as exc:
        print(f"hypoprop {args.command}: error: {exc}", file=sys.stderr)
        return 2
