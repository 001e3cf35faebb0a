"""Command-line entry point: ``iibpan {simulate,train,eval,gradcheck}``.

Exit codes: 0 success, 1 validation failure, 2 I/O error, 3 bad flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import IIBError
from .gradcheck import run_all
from .loss import LossConfig
from .quality import QConfig
from .raster import SampleTriple, read_brf, write_brf
from .refnet import (
    EvalConfig,
    TrainConfig,
    evaluate,
    init_network,
    load_network,
    save_network,
    train,
)
from .simulate import SceneSpec, make_triple, synth_scene

log = logging.getLogger("iibpan")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_FLAGS = 0, 1, 2, 3
MANIFEST = "manifest.json"
RASTER_ROLES = ("ms", "pan", "lms", "panlr", "target")
REFERENCE_NET = "reference"


class FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise FlagError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def write_manifest(out_dir: Path, command: str, argv: list[str], params: dict, inputs: list[str],
                   outputs: list[str]) -> Path:
    manifest = {
        "command": command,
        "argv": argv,
        "parameters": params,
        "seeds": {k: v for k, v in params.items() if "seed" in k},
        "inputs": inputs,
        "outputs": outputs,
        "version": __version__,
    }
    path = out_dir / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def scene_path(data: Path, i: int, role: str) -> Path:
    return data / f"scene_{i}_{role}.brf"


def scene_indices(data: Path) -> list[int]:
    if not data.is_dir():
        raise FileNotFoundError(f"data directory {data} does not exist")
    found = sorted(int(p.name.split("_")[1]) for p in data.glob("scene_*_target.brf"))
    if not found:
        raise FileNotFoundError(f"no scene_<i>_target.brf files in {data}")
    return found


def load_triples(data: Path) -> list[SampleTriple]:
    return [
        SampleTriple(
            lms=read_brf(scene_path(data, i, "lms")),
            pan=read_brf(scene_path(data, i, "panlr")),
            target=read_brf(scene_path(data, i, "target")),
        )
        for i in scene_indices(data)
    ]


def cmd_simulate(args, argv) -> int:
    written = []
    if args.count < 1:
        raise FlagError("--count must be >= 1")
    try:
        specs = [SceneSpec(bands=args.bands, height=args.size, width=args.size, ratio=args.ratio,
                           seed=args.seed + i, blob_count=args.blobs) for i in range(args.count)]
    except IIBError as exc:
        raise FlagError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, spec in enumerate(specs):
        ms, pan = synth_scene(spec)
        t = make_triple(ms, pan, args.ratio)
        for role, r in zip(RASTER_ROLES, (ms, pan, t.lms, t.pan, t.target)):
            path = scene_path(out, i, role)
            write_brf(path, r)
            written.append(path.name)
    params = dict(bands=args.bands, size=args.size, ratio=args.ratio, seed=args.seed, count=args.count,
                  blobs=args.blobs)
    write_manifest(out, "simulate", argv, params, [], written)
    print(f"wrote {len(written)} rasters to {out}")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    try:
        q = QConfig(window=args.window, stride=args.stride, epsilon=args.epsilon)
        loss_cfg = LossConfig(alpha=args.alpha, q=q, normalize=args.normalize)
        cfg = TrainConfig(loss_kind=args.loss, loss=loss_cfg, steps=args.steps, learning_rate=args.lr,
                          batch=args.batch, seed=args.seed)
    except ValueError as exc:
        raise FlagError(str(exc)) from exc
    data = Path(args.data)
    triples = load_triples(data)
    bands = triples[0].target.bands
    try:
        net = init_network(bands, channels=args.channels + [bands], kernels=args.kernels, seed=args.seed)
    except IIBError as exc:
        raise FlagError(str(exc)) from exc
    net, history = train(net, triples, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(out / "network.iibn", net)
    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "intra", "inter", "total"])
        for rec in history:
            w.writerow([rec.step, f"{rec.intra:.9g}", f"{rec.inter:.9g}", f"{rec.total:.9g}"])
    params = dict(loss=args.loss, alpha=args.alpha, steps=args.steps, lr=args.lr, batch=args.batch,
                  seed=args.seed, window=args.window, stride=args.stride, epsilon=args.epsilon,
                  normalize=args.normalize, channels=args.channels, kernels=args.kernels)
    write_manifest(out, "train", argv, params, [str(data)], ["network.iibn", "history.csv"])
    print(f"final total loss {history[-1].total:.9g}; network written to {out / 'network.iibn'}")
    return EXIT_OK


def _net_label(spec: str) -> tuple[str, str]:
    if "=" in spec:
        label, path = spec.split("=", 1)
        return label, path
    if spec == REFERENCE_NET:
        return spec, spec
    p = Path(spec)
    return (p.parent.name or p.stem) if p.name == "network.iibn" else p.stem, spec


def cmd_eval(args, argv) -> int:
    data = Path(args.data)
    triples = load_triples(data)
    pan_full = None
    if args.mode == "actual":
        pan_full = [read_brf(scene_path(data, i, "pan")) for i in scene_indices(data)]
    cfg = EvalConfig(ratio=args.ratio, mode=args.mode)
    labels = [_net_label(s) for s in args.net]
    if len({label for label, _ in labels}) != len(labels):
        raise FlagError("network labels must be unique; use --net label=path")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, written = {}, []
    for label, path in labels:
        if path == REFERENCE_NET:
            if args.mode != "simulated":
                raise IIBError("the reference fuser exists only in simulated mode")
            by_lms = {id(t.lms): t.target for t in triples}
            net = lambda lms, pan: by_lms[id(lms)]  # noqa: E731
        else:
            net = load_network(path)
        reports[label] = evaluate(net, triples, pan_full, cfg)
        name = f"metrics_{label}.txt"
        (out / name).write_text(reports[label].to_text())
        written.append(name)
        print(f"[{label}]")
        print(reports[label].to_text(), end="")
    keys = [k for k, _ in next(iter(reports.values())).items()]
    with open(out / "comparison.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["metric"] + list(reports))
        for k in keys:
            w.writerow([k] + [f"{getattr(r, k):.9g}" for r in reports.values()])
    written.append("comparison.tsv")
    params = dict(mode=args.mode, ratio=args.ratio, nets=[p for _, p in labels])
    write_manifest(out, "eval", argv, params, [str(data)] + [p for _, p in labels], written)
    return EXIT_OK


def cmd_gradcheck(args, argv) -> int:
    results = run_all(seed=args.seed, bands=args.bands, size=args.size, window=args.window,
                      stride=args.stride, epsilon=args.epsilon, corrupt=args.corrupt)
    for r in results:
        print(f"{r.name} max_rel_error={r.max_rel_error:.9g} {'ok' if r.ok else 'FAIL'}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iibpan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="synthesize scenes and Wald-protocol triples")
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--size", type=int, default=128, help="scene side at PAN scale")
    p.add_argument("--ratio", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--blobs", type=int, default=40)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the reference network")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=("l2", "iib"), default="iib")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="divide losses by their term counts (default) or use raw sums")
    p.add_argument("--channels", type=_int_list, default=[16, 8], help="hidden widths, e.g. 16,8")
    p.add_argument("--kernels", type=_int_list, default=[9, 5, 5])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate networks on a simulated dataset")
    p.add_argument("--net", action="append", required=True,
                   help="network file, label=path, or 'reference' (returns the target)")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("simulated", "actual"), required=True)
    p.add_argument("--ratio", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bands", type=int, default=3)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--corrupt", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except FlagError as exc:
        print(f"iibpan: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except FlagError as exc:
        print(f"iibpan: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except OSError as exc:
        print(f"iibpan: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"iibpan: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
