"""``bench`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__
from .attributes import compute_attributes, cooccurrence_matrix
from .config import ConfigError, load_config
from .dataset import (
    IMAGE_SUFFIXES,
    DatasetError,
    load_dataset,
    load_results,
    read_image,
    validate_sequence,
    write_image,
)
from .enhance import parse_enhance
from .metrics import evaluate
from .ope import RunConfig, TrackerFactory, run_benchmark
from .report import emit_report, render_ranking, ranking_table, write_ablation_csv, write_matrix_csv
from .synth import SynthSpec, generate, preset
from .trackers import TRACKERS

log = logging.getLogger("lowlight_bench")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _tracker_opts(pairs) -> dict:
    opts = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise UsageError(f"--tracker-opt expects key=value, got {pair!r}")
        opts[key] = _parse_value(value)
    return opts


def _enhancement(text):
    try:
        return parse_enhance(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _layer_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise UsageError(f"--layers expects A:B, got {text!r}") from None


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    seqs, failed = load_dataset(args.dataset)
    bad = len(failed)
    for name, err in sorted(failed.items()):
        print(f"{name}: ERROR {err}")
    for seq in seqs:
        rep = validate_sequence(seq, cfg.validation)
        if rep.errors:
            bad += 1
            msgs = "; ".join(f"frame {i}: {m}" for i, m in rep.errors)
            print(f"{seq.name}: ERROR {msgs}")
        else:
            warn = "; ".join(f"frame {i}: {m}" if i else m for i, m in rep.warnings)
            print(f"{seq.name}: OK {len(seq)} frames" + (f" (warnings: {warn})" if warn else ""))
    if not seqs and not failed:
        print(f"no sequences found under {args.dataset}")
        return 2
    return 2 if bad else 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    opts = cfg.options_for(args.tracker)
    opts.update(_tracker_opts(args.tracker_opt))
    try:
        factory = TrackerFactory(args.tracker, **opts)
    except TypeError as exc:
        raise UsageError(f"bad tracker option: {exc}") from None
    seqs, failed = load_dataset(args.dataset)
    for name, err in sorted(failed.items()):
        print(f"skip {name}: {err}")
    run_cfg = RunConfig(
        parallel_workers=args.workers,
        enhancement=_enhancement(args.enhance),
        output_dir=Path(args.out),
        seed=args.seed,
    )
    name = args.name or args.tracker
    res = run_benchmark(factory, seqs, run_cfg, tracker_name=name)
    for seq_name, why in sorted(res.skipped.items()):
        print(f"skip {seq_name}: {why}")
    print(f"{name}: wrote {len(res.results)} result files to {Path(args.out) / name}")
    return 0 if res.results else 2


def _tracker_dirs(results: Path) -> dict[str, Path]:
    if not results.is_dir():
        raise DatasetError(f"results directory {results} does not exist")
    if any(p.suffix == ".txt" for p in results.iterdir()):
        return {results.name: results}
    return {p.name: p for p in sorted(results.iterdir()) if p.is_dir()}


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    seqs, failed = load_dataset(args.dataset)
    if failed:
        raise DatasetError("; ".join(f"{k}: {v}" for k, v in sorted(failed.items())))
    if not seqs:
        raise DatasetError(f"no sequences under {args.dataset}")
    attrs = {s.name: compute_attributes(s, cfg.attributes)[0] for s in seqs}
    reports = []
    for tracker, path in _tracker_dirs(Path(args.results)).items():
        results = load_results(path, seqs)
        reports.append(evaluate(results, seqs, attrs, tracker_name=tracker, config=cfg.metrics))
    if not reports:
        raise DatasetError(f"no tracker results under {args.results}")
    out = Path(args.out)
    if out.suffix == ".json":
        out_dir, json_name = out.parent, out.name
    else:
        out_dir, json_name = out, "report.json"
    emit_report(reports, out_dir, cooccurrence_matrix(attrs[s.name] for s in seqs), json_name)
    print(render_ranking(ranking_table(reports)))
    return 0


def cmd_attrs(args) -> int:
    cfg = load_config(args.config)
    seqs, failed = load_dataset(args.dataset)
    for name, err in sorted(failed.items()):
        print(f"skip {name}: {err}")
    sets = []
    for seq in seqs:
        aset, _ = compute_attributes(seq, cfg.attributes)
        sets.append(aset)
        with open(seq.path / "attributes.computed.txt", "w") as fh:
            fh.write(aset.format() + "\n")
        print(f"{seq.name}: {' '.join(sorted(aset.names)) or '-'}")
    out = Path(args.out) if args.out else Path(args.dataset) / "cooccurrence.csv"
    write_matrix_csv(out, cooccurrence_matrix(sets))
    return 2 if failed else 0


def cmd_synth(args) -> int:
    if bool(args.preset) == bool(args.spec):
        raise UsageError("give exactly one of --preset or --spec")
    spec = preset(args.preset) if args.preset else SynthSpec.from_json(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    path = generate(spec, args.out)
    print(f"wrote {spec.frames} frames to {path}")
    return 0


def cmd_ablate(args) -> int:
    from .prompt_gate import ablation_run

    lo, hi = _layer_range(args.layers)
    try:
        rows = ablation_run(lo, hi, args.preset, n_sequences=args.sequences, frames=args.frames,
                            seed=args.seed, repeats=args.repeats)
    except ValueError as exc:
        if "layer range" in str(exc):
            raise UsageError(str(exc)) from None
        raise
    write_ablation_csv(args.out, rows)
    print(f"{'layers':>6}  {'S_AUC':>6}  {'P':>6}  {'P_Norm':>6}  {'sec':>6}")
    for r in rows:
        print(f"{r.layers:>6}  {r.s_auc:6.3f}  {r.p:6.3f}  {r.p_norm:6.3f}  {r.seconds:6.2f}")
    return 0


def cmd_enhance(args) -> int:
    op = _enhancement(args.enhance)
    src, dst = Path(args.input), Path(args.output)
    if src.is_file():
        write_image(dst, op(read_image(src)))
        return 0
    if not src.is_dir():
        raise DatasetError(f"{src} does not exist")
    n = 0
    for p in sorted(src.rglob("*")):
        if not p.is_file():
            continue
        target = dst / p.relative_to(src)
        if p.suffix.lower() in IMAGE_SUFFIXES:
            write_image(target.with_suffix(".png") if p.suffix.lower() != ".png" else target, op(read_image(p)))
            n += 1
        else:
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(p, target)
    print(f"enhanced {n} images ({op.label()}) into {dst}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bench", description="Low-light single-object tracking benchmark toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", help="flat JSON document overriding defaults")
        return sp

    sp = with_config(sub.add_parser("validate", help="check a dataset directory"))
    sp.add_argument("dataset")
    sp.set_defaults(func=cmd_validate)

    sp = with_config(sub.add_parser("run", help="run a tracker under one-pass evaluation"))
    sp.add_argument("--tracker", required=True, choices=sorted(TRACKERS))
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--enhance", default="none", help="none | gamma:<g> | histeq")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", required=True, help="results root; files go to <out>/<tracker>/")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--name", help="result subdirectory name (default: tracker name)")
    sp.add_argument("--tracker-opt", action="append", metavar="K=V")
    sp.set_defaults(func=cmd_run)

    sp = with_config(sub.add_parser("eval", help="score result files"))
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--results", required=True)
    sp.add_argument("--out", required=True, help="report.json path or output directory")
    sp.set_defaults(func=cmd_eval)

    sp = with_config(sub.add_parser("attrs", help="compute SV/ARC/LR/LAI and co-occurrence"))
    sp.add_argument("dataset")
    sp.add_argument("--out", help="co-occurrence CSV path (default: <dataset>/cooccurrence.csv)")
    sp.set_defaults(func=cmd_attrs)

    sp = sub.add_parser("synth", help="generate a synthetic sequence")
    sp.add_argument("--preset")
    sp.add_argument("--spec")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("ablate", help="prompt-depth ablation table")
    sp.add_argument("--layers", default="1:12")
    sp.add_argument("--preset", default="dark")
    sp.add_argument("--out", required=True)
    sp.add_argument("--sequences", type=int, default=3)
    sp.add_argument("--frames", type=int, default=20)
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("enhance", help="apply low-light enhancement offline")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--enhance", default="histeq", help="gamma:<g> | histeq")
    sp.set_defaults(func=cmd_enhance)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:  # DatasetError, MetricError, SynthSpecError included
        print(f"bench: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
