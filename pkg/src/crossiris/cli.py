"""Command-line entry point: encode, match, evaluate, synth, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

from .encoder import load_code, save_code
from .evaluation import DEFAULT_FAR_TARGETS, DEFAULT_MISLABEL_K, collect_scores, evaluate, read_scores, write_scores
from .exceptions import DataError
from .iso_image import load_image
from .matcher import Aggregation, DigitalIdentity, cross_match, write_score_matrix
from .pipeline import PipelineConfig, encode_image, encode_templates
from .report import emit_report
from .sigset import parse_sigset
from .synth import Defect, SynthConfig, generate_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3
SUBCOMMANDS = ("encode", "match", "evaluate", "synth", "report")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which here means a data error
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _far_targets(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values or any(not 0 < v < 1 for v in values):
        raise argparse.ArgumentTypeError("FAR targets must lie in (0, 1)")
    return values


def _bounded(kind, low, name):
    def convert(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a {kind.__name__}: {text!r}") from None
        if value < low:
            raise argparse.ArgumentTypeError(f"{name} must be >= {low}")
        return value

    return convert


def _defect(text: str) -> tuple[Defect, float]:
    name, _, rate = text.partition("=")
    try:
        defect, value = Defect(name), float(rate)
    except ValueError:
        choices = ", ".join(d.value for d in Defect)
        raise argparse.ArgumentTypeError(f"expected NAME=RATE with NAME in {{{choices}}}: {text!r}") from None
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("defect rate must lie in [0, 1]")
    return defect, value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--max-shift", type=_bounded(int, 0, "--max-shift"), default=0,
                        help="largest column shift tried when matching (default 0)")
    common.add_argument("--use-masks", action="store_true", help="compare only bits valid in both codes")
    common.add_argument("--aggregation", choices=[a.value for a in Aggregation], default="max",
                        help="membership aggregation over an identity's codes (default max)")
    common.add_argument("--seed", type=int, default=0, help="random seed (synth)")
    common.add_argument("--out-dir", default=None, help="output directory")
    common.add_argument("--far-targets", type=_far_targets, default=DEFAULT_FAR_TARGETS,
                        help="comma-separated FAR targets (default 1e-3,1e-4,1e-5,1e-6)")
    common.add_argument("--mislabel-k", type=_bounded(float, 0.0, "--mislabel-k"), default=DEFAULT_MISLABEL_K,
                        help="sigma multiple for mislabel suspicion (default 6)")
    common.add_argument("--threads", type=_bounded(int, 1, "--threads"), default=1,
                        help="worker threads; outputs do not depend on it")

    parser = _Parser(prog="crossiris", description="Cross-sensor iris recognition toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", parents=[common], help="encode eye images to IC01 code files")
    p.add_argument("images", nargs="*", help="PGM eye images")
    p.add_argument("--sigset", help="encode every template of a sigset instead")

    p = sub.add_parser("match", parents=[common], help="membership of each probe in each enrolled identity")
    p.add_argument("--sigset", required=True)
    p.add_argument("--codes-dir", help="read <template_id>.ic01 codes instead of encoding images")

    p = sub.add_parser("evaluate", parents=[common], help="score a sigset and write the full report")
    p.add_argument("--sigset", required=True)
    p.add_argument("--no-plots", action="store_true", help="skip the SVG plots")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic two-sensor dataset")
    p.add_argument("--identities", type=_bounded(int, 1, "--identities"), default=20)
    p.add_argument("--samples", type=_bounded(int, 1, "--samples"), default=2,
                   help="samples per identity per sensor (default 2)")
    p.add_argument("--mislabel-rate", type=float, default=0.0)
    p.add_argument("--defect", type=_defect, action="append", default=[], metavar="NAME=RATE")
    p.add_argument("--imposter-sample", type=_bounded(int, 1, "--imposter-sample"), default=None,
                   help="declare only this many randomly chosen imposter pairs")

    p = sub.add_parser("report", parents=[common], help="rebuild the report from a scores.csv")
    p.add_argument("--scores", required=True)
    p.add_argument("--no-plots", action="store_true")
    return parser


def _require_out_dir(args) -> str:
    if not args.out_dir:
        raise UsageError(f"crossiris {args.command}: error: --out-dir is required")
    return args.out_dir


def _cmd_encode(args) -> None:
    out_dir = _require_out_dir(args)
    if bool(args.images) == bool(args.sigset):
        raise UsageError("crossiris encode: error: give either image paths or --sigset")
    config = PipelineConfig()
    os.makedirs(out_dir, exist_ok=True)
    if args.sigset:
        sigset = parse_sigset(args.sigset)
        entries = list(sigset.enrollment_entries) + list(sigset.probe_entries)
        codes, failures = encode_templates(entries, os.path.dirname(args.sigset), config, args.threads)
        for tid in sorted(codes):
            save_code(codes[tid], os.path.join(out_dir, f"{tid}.ic01"))
        for tid, reason in failures:
            print(f"template {tid}: {reason}", file=sys.stderr)
        return
    for path in args.images:
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            code = encode_image(load_image(path), config, stem)
        except FileNotFoundError:
            raise DataError(f"image not found: {path}") from None
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from None
        save_code(code, os.path.join(out_dir, f"{stem}.ic01"))


def _cmd_match(args) -> None:
    sigset = parse_sigset(args.sigset)
    entries = list(sigset.enrollment_entries) + list(sigset.probe_entries)
    if args.codes_dir:
        codes = {}
        for e in entries:
            path = os.path.join(args.codes_dir, f"{e.template_id}.ic01")
            if os.path.exists(path):
                codes[e.template_id] = load_code(path)
            else:
                print(f"template {e.template_id}: no code file, skipped", file=sys.stderr)
    else:
        codes, failures = encode_templates(entries, os.path.dirname(args.sigset), PipelineConfig(), args.threads)
        for tid, reason in failures:
            print(f"template {tid}: {reason}", file=sys.stderr)

    agg = Aggregation(args.aggregation)
    gallery = []
    for ident in sigset.identities():
        members = [codes[e.template_id] for e in sigset.enrollment_entries
                   if e.identity_id == ident and e.template_id in codes]
        if members:
            gallery.append(DigitalIdentity(ident, tuple(members), agg))
    probe_ids = [e.template_id for e in sigset.probe_entries if e.template_id in codes]
    if not gallery or not probe_ids:
        raise DataError("nothing to match: no encodable probes or enrolled identities")
    matrix = cross_match([codes[t] for t in probe_ids], gallery, args.max_shift, args.use_masks, args.threads)
    ids = [g.identity_id for g in gallery]
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "matches.csv"), "w", encoding="utf-8", newline="\n") as fh:
            write_score_matrix(fh, matrix, probe_ids, ids)
    else:
        write_score_matrix(sys.stdout, matrix, probe_ids, ids)


def _cmd_evaluate(args) -> None:
    out_dir = _require_out_dir(args)
    sigset = parse_sigset(args.sigset)
    scores = collect_scores(sigset, os.path.dirname(args.sigset), PipelineConfig(),
                            args.max_shift, args.use_masks, args.threads)
    for tid, reason in scores.excluded:
        print(f"excluded template {tid}: {reason}", file=sys.stderr)
    report = evaluate(scores, args.far_targets, args.mislabel_k)
    os.makedirs(out_dir, exist_ok=True)
    write_scores(scores, os.path.join(out_dir, "scores.csv"))
    emit_report(report, out_dir, plots=not args.no_plots)


def _cmd_report(args) -> None:
    out_dir = _require_out_dir(args)
    report = evaluate(read_scores(args.scores), args.far_targets, args.mislabel_k)
    emit_report(report, out_dir, plots=not args.no_plots)


def _cmd_synth(args) -> None:
    out_dir = _require_out_dir(args)
    try:
        config = SynthConfig(
            n_identities=args.identities,
            samples_per_identity_per_sensor=args.samples,
            seed=args.seed,
            defect_rates=dict(args.defect),
            mislabel_rate=args.mislabel_rate,
            imposter_sample=args.imposter_sample,
        )
    except ValueError as exc:
        raise UsageError(f"crossiris synth: error: {exc}") from None
    generate_dataset(config, out_dir, args.threads)


COMMANDS = {
    "encode": _cmd_encode,
    "match": _cmd_match,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help exits 0 through argparse
        return EXIT_OK if not exc.code else EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
