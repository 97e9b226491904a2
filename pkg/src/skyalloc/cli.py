"""Command-line entry point.

    skyalloc run --config scenario.json [--out DIR] [--format json|csv|md]
    skyalloc preset --name strong|weak [--seed N] [--out DIR] [--format json|csv|md]

Exit codes: 0 success, 1 usage error, 2 every strategy infeasible in some
scenario, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiment import PRESETS, InvariantViolation, ScenarioConfig, emit_report, run_scenario

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 1, 2, 3
EXTENSIONS = {"json": "json", "csv": "csv", "md": "md"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skyalloc", description="Load-balanced layer allocation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run scenarios from a JSON config file")
    run.add_argument("--config", required=True, type=Path)
    preset = sub.add_parser("preset", help="run the strong or weak scaling preset")
    preset.add_argument("--name", required=True, choices=sorted(PRESETS))
    preset.add_argument("--seed", type=int, default=0)
    preset.add_argument("--configs-only", action="store_true",
                        help="emit the preset scenario configs instead of running them")
    for p in (run, preset):
        p.add_argument("--out", type=Path, help="output directory (default: stdout)")
        p.add_argument("--format", default="json", choices=sorted(EXTENSIONS))
    return parser


def load_configs(path: Path) -> list[ScenarioConfig]:
    """A config file holds one scenario object or ``{"scenarios": [...]}``."""
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    items = doc["scenarios"] if isinstance(doc, dict) and "scenarios" in doc else [doc]
    try:
        return [ScenarioConfig.from_dict(item) for item in items]
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"invalid config {path}: {exc}") from exc


def _write(text: str, out: Path | None, stem: str, fmt: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.{EXTENSIONS[fmt]}").write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            configs = load_configs(args.config)
            stem = args.config.stem
        else:
            configs = PRESETS[args.name](args.seed)
            stem = f"{args.name}-seed{args.seed}"
            if args.configs_only:
                doc = {"scenarios": [c.to_dict() for c in configs]}
                _write(json.dumps(doc, indent=2) + "\n", args.out, stem + "-configs", "json")
                return EXIT_OK
        reports = [run_scenario(c) for c in configs]
    except UsageError as exc:
        print(f"skyalloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"skyalloc: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    _write(emit_report(reports, args.format), args.out, stem, args.format)
    if any(r.all_infeasible for r in reports):
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
