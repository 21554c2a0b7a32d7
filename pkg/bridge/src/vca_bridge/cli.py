"""vca-bridge: audio-side adapters for the VCA toolkit.

Subcommands: `extract` (manifest + audio -> VCAE embeddings + manifest
echo) and `convert` (emitted job manifest -> pseudo audio + result
manifest + VCAE). Exit codes mirror the main CLI: 0 success, 1 usage
error, 2 data error (including --strict with failed jobs).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import BridgeConfig
from .errors import BridgeError
from .extract import extract_embeddings
from .vc import run_vc_jobs

log = logging.getLogger("vca-bridge")


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageExit(f"{self.format_usage()}{self.prog}: error: {message}")


def cmd_extract(args) -> int:
    cfg = BridgeConfig(
        embedder=args.model,
        device=args.device,
        batch_size=args.batch_size,
        audio_root=args.audio_root,
        on_error=args.on_error,
    )
    cfg.validate()
    report = extract_embeddings(
        args.manifest, cfg, args.out_embeddings, args.out_manifest,
        skip_report_path=args.skip_report,
    )
    log.info("embedded %d utterances, skipped %d", report.n_embedded, len(report.skipped))
    if report.skipped and args.skip_report is None:
        for entry in report.skipped:
            print(f"vca-bridge: skipped {entry['audio_path']} ({entry['reason']})", file=sys.stderr)
    return 0


def cmd_convert(args) -> int:
    cfg = BridgeConfig(
        embedder=args.embedder,
        vc=args.vc,
        device=args.device,
        batch_size=args.batch_size,
        audio_root=args.audio_root,
    )
    cfg.validate()
    report = run_vc_jobs(args.plan, cfg, args.out)
    log.info("converted %d jobs, %d failed", report.n_ok, report.n_failed)
    if report.n_failed and args.strict:
        print(f"vca-bridge: {report.n_failed} job(s) failed (strict mode)", file=sys.stderr)
        return 2
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="vca-bridge", description=__doc__)
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("extract", help="extract speaker embeddings from audio into a VCAE file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", default="stub", help="embedder id, e.g. stub or stub:dim=32")
    p.add_argument("--device", default="cpu")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--audio-root", default=None)
    p.add_argument("--on-error", default="abort", choices=["abort", "skip"])
    p.add_argument("--out-embeddings", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--skip-report", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("convert", help="run an emitted conversion-job manifest")
    p.add_argument("--plan", required=True, help="job manifest from `vca convert --backend external-emit`")
    p.add_argument("--vc", default="stub", help="vc adapter: stub or command:<template>")
    p.add_argument("--embedder", default="stub")
    p.add_argument("--device", default="cpu")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--audio-root", default=None)
    p.add_argument("--strict", action="store_true", help="exit nonzero if any job failed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return 1
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (BridgeError, OSError) as exc:
        print(f"vca-bridge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
