"""Command-line entry point: ``structura {cluster,evaluate,tune,synth,align}``.

Exit codes: 0 success, 1 usage/config/manifest error, 2 some pieces failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from ._io import dump_json, write_atomic
from .align import AlignParams, dtw_align
from .chordify import chordify
from .errors import StructuraError
from .features import matrices_json, matrix_csv
from .ingest import load_corpus, read_manifest
from .metrics import score, score_report
from .pipeline import RunConfig, read_config_file, run_piece
from .synth import CorpusSpec, generate_corpus
from .tune import ParamGrid, evaluate_params, grid_search, leaderboard_csv

logger = logging.getLogger("structura")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args) -> RunConfig:
    mapping = read_config_file(args.config) if getattr(args, "config", None) else {}
    flat = {}
    for k, v in mapping.items():
        if isinstance(v, dict):
            flat.update(v)
        else:
            flat[k] = v
    overrides = {
        "tau_ioi": args.tau_ioi, "tau_chord": args.tau_chord, "alpha": args.alpha,
        "weights": args.weights, "method": args.method, "threshold": args.threshold,
        "threads": getattr(args, "threads", None),
    }
    flat.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_normalize:
        flat["normalize"] = False
    return RunConfig.from_mapping(flat)


def write_piece_outputs(out_dir: Path, result):
    m = result.matrices
    write_atomic(out_dir / "matrices.json", dump_json(matrices_json(m, result.combined)))
    for name, mat in m.named().items():
        write_atomic(out_dir / f"{name}.csv", matrix_csv(m.ids, mat))
    write_atomic(out_dir / "combined.csv", matrix_csv(m.ids, result.combined))
    write_atomic(out_dir / "dendrogram.json", dump_json(result.dendrogram.to_dict()))
    write_atomic(out_dir / "dendrogram.nwk", result.dendrogram.to_newick() + "\n")
    write_atomic(out_dir / "assignment.csv", result.assignment.to_csv())


def cmd_cluster(args) -> int:
    config = _load_config(args)
    corpus = load_corpus(args.manifest, strict=False)
    out = Path(args.out)
    write_atomic(out / "config.json", dump_json(config.to_dict()))
    status = EXIT_OK
    for pid, transcriptions in corpus.pieces.items():
        if pid in corpus.failures:
            logger.error("piece %s: %d file(s) failed to parse; piece skipped", pid, len(corpus.failures[pid]))
            status = EXIT_PARTIAL
            continue
        if len(transcriptions) < 2:
            logger.warning("piece %s has %d transcription(s); skipped", pid, len(transcriptions))
            continue
        try:
            result = run_piece(transcriptions, config)
        except StructuraError as exc:
            logger.error("piece %s failed: %s", pid, exc)
            status = EXIT_PARTIAL
            continue
        write_piece_outputs(out / pid, result)
        logger.info("piece %s: %d transcriptions -> %d clusters", pid, len(transcriptions),
                    result.assignment.num_clusters)
    return status


def read_assignments(directory: Path) -> dict[str, dict[str, str]]:
    """``<dir>/<piece>/assignment.csv`` files keyed by piece id."""
    out = {}
    for path in sorted(directory.glob("*/assignment.csv")):
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        try:
            out[path.parent.name] = {r["transcription_id"]: r["cluster_label"] for r in rows}
        except KeyError as exc:
            raise UsageError(f"{path}: missing column {exc}") from exc
    if not out:
        raise UsageError(f"no */assignment.csv files under {directory}")
    return out


def cmd_evaluate(args) -> int:
    entries = read_manifest(args.manifest)
    label = {e["transcription_id"]: e["group_label"] for e in entries}
    piece = {e["transcription_id"]: e["piece_id"] for e in entries}
    per_piece = {}
    for pid, assigned in read_assignments(Path(args.assignments)).items():
        ids = list(assigned)
        bad = [i for i in ids if label.get(i) is None or piece.get(i) != pid]
        if bad:
            raise UsageError(f"piece {pid}: ids without a label in this piece: {bad}")
        per_piece[pid] = score([label[i] for i in ids], [assigned[i] for i in ids])
    report = score_report(per_piece, micro=args.micro)
    text = dump_json(report)
    sys.stdout.write(text)
    if args.out:
        write_atomic(args.out, text)
    return EXIT_OK


def cmd_tune(args) -> int:
    grid = ParamGrid.from_mapping(read_config_file(args.grid)) if args.grid else ParamGrid()
    corpus = load_corpus(args.manifest)
    usable = [p for p in corpus.pieces if len(corpus.pieces[p]) >= 2]
    for p in set(corpus.pieces) - set(usable):
        logger.warning("piece %s has fewer than two transcriptions; excluded from tuning", p)
    train = corpus.subset([p for p in usable if p not in corpus.holdout])
    held = corpus.subset([p for p in usable if p in corpus.holdout])
    if not train.pieces:
        raise UsageError("no training pieces (all pieces are held out or unclusterable)")

    result = grid_search(train, grid, threads=args.threads)
    out = Path(args.out)
    write_atomic(out / "leaderboard.csv", leaderboard_csv(result))
    write_atomic(out / "leaderboard.json", dump_json([e.to_dict() for e in result.leaderboard]))
    best = {"objective": grid.objective, "params": result.best_params.to_dict(),
            "train": {"h": result.best.scores.homogeneity, "c": result.best.scores.completeness,
                      "v": result.best.scores.v_measure, "pieces": list(train.pieces)}}
    if held.pieces:
        s = evaluate_params(held, result.best_params, grid.chordify, grid.normalize, grid.cost_norm)
        best["holdout"] = {"h": s.homogeneity, "c": s.completeness, "v": s.v_measure,
                           "pieces": list(held.pieces)}
    write_atomic(out / "best.json", dump_json(best))
    sys.stdout.write(dump_json(best))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    corpus, manifest = generate_corpus(CorpusSpec.from_dict(spec), args.out)
    n = sum(len(ts) for ts in corpus.pieces.values())
    logger.info("wrote %d performances of %d pieces; manifest %s", n, len(corpus.pieces), manifest)
    return EXIT_OK


def cmd_align(args) -> int:
    config = _load_config(args)
    corpus = load_corpus(args.manifest)
    if args.piece not in corpus.pieces:
        raise UsageError(f"unknown piece {args.piece!r}")
    by_id = {t.id: t for t in corpus.pieces[args.piece]}
    try:
        ti, tj = (by_id[i] for i in args.pair)
    except KeyError as exc:
        raise UsageError(f"transcription {exc} not in piece {args.piece!r}") from exc
    res = dtw_align(chordify(ti, config.chordify), chordify(tj, config.chordify),
                    AlignParams(config.align.alpha, config.align.cell_budget))
    write_atomic(args.out, dump_json(res.to_dict()))
    return EXIT_OK


def _weights(text):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected four comma-separated weights")
    return parts


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="structura", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    def pipeline_opts(p):
        p.add_argument("--config", help="TOML or JSON run configuration")
        p.add_argument("--tau-ioi", type=float)
        p.add_argument("--tau-chord", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--weights", type=_weights, help="cost,warp_opt,warp_mean,len")
        p.add_argument("--method", choices=["single", "complete", "average", "weighted"])
        p.add_argument("--threshold", type=float)
        p.add_argument("--no-normalize", action="store_true")

    p = sub.add_parser("cluster", parents=[common], help="align and cluster every piece of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    pipeline_opts(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("evaluate", parents=[common], help="score assignments against manifest labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--out")
    p.add_argument("--micro", action="store_true", help="weight pieces by transcription count")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", parents=[common], help="grid search over weights, linkage, threshold, alpha")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grid", help="TOML or JSON grid definition")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic labelled corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("align", parents=[common], help="dump the DTW alignment of one pair")
    p.add_argument("--manifest", required=True)
    p.add_argument("--piece", required=True)
    p.add_argument("--pair", nargs=2, required=True, metavar=("ID1", "ID2"))
    p.add_argument("--out", required=True)
    pipeline_opts(p)
    p.set_defaults(func=cmd_align)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, StructuraError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
