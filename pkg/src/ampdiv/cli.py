"""Command-line entry point.

Subcommands: ``amplify``, ``calibrate``, ``detect``, ``forge`` and ``report``.
``detect`` accepts a JSON config file whose keys are ``corpus``, ``seed``,
``out``, ``runs``, ``environments``, ``modes``, ``tdr_level`` and ``timeout``;
flags given on the command line override it. ``AMPDIV_WORKERS`` sets the
worker pool size.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from ampdiv.divergence import Mode
from ampdiv.errors import AmpdivError, ConfigError
from ampdiv.executor import DEFAULT_TIMEOUT
from ampdiv.forge import SteroidKind, synthesize, write_ground_truth, write_variants
from ampdiv.pipeline import ALL_MODES, RAW_DIR, PipelineConfig, calibrate_fixture, detect, prepare_fixture
from ampdiv.report import report_render

CONFIG_KEYS = ("corpus", "seed", "out", "runs", "environments", "modes", "tdr_level", "timeout")


def _modes(text: str) -> tuple[Mode, ...]:
    try:
        return tuple(Mode(m.strip().upper()) for m in text.split(",") if m.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"unknown mode in {text!r}; choose from {[m.value for m in Mode]}") from exc


def load_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict[str, Any] = {}
    if args.config is not None:
        try:
            values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(values) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = Path(args.config).resolve().parent
        for key in ("corpus", "out"):
            if key in values:
                values[key] = base / values[key]
        if "modes" in values:
            values["modes"] = tuple(Mode(m) for m in values["modes"])
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    for key in ("corpus", "seed", "out"):
        if key not in values:
            raise ConfigError(f"{key} is required (flag or config file)")
    return PipelineConfig(**values)


def _fixture_config(args: argparse.Namespace, modes: tuple[Mode, ...]) -> PipelineConfig:
    return PipelineConfig(
        corpus=args.fixture,
        seed=args.seed,
        out=args.out,
        runs=getattr(args, "runs", 30),
        environments=getattr(args, "envs", 3),
        modes=modes,
        tdr_level=args.tdr_level,
        timeout=args.timeout,
    )


def cmd_amplify(args: argparse.Namespace) -> int:
    modes = (Mode.TDR,) if args.tdr else (Mode.FULL,)
    cfg = _fixture_config(args, modes)
    for mode, ms in prepare_fixture(cfg.corpus, cfg).items():
        ats = ms.amplified
        print(f"{mode.value}: {ats.originals} original + {ats.generated_count} generated tests, "
              f"{len(ms.instrumented.point_ids)} observation points -> {ms.directory}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _fixture_config(args, (Mode.FULL,))
    run = calibrate_fixture(cfg.corpus, cfg)[Mode.FULL]
    target = cfg.out / RAW_DIR / cfg.corpus.name
    target.mkdir(parents=True, exist_ok=True)
    path = target / "calibration_full.json"
    path.write_text(json.dumps(run.points.report(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    points = run.points
    print(f"{len(points.stable)} stable, {len(points.discarded)} discarded, "
          f"{len(points.unexercised)} unexercised -> {path}")
    for point in points.discarded:
        print(f"  discarded {point}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    detect(cfg)
    print(report_render(cfg.out), end="")
    return 0


def cmd_forge(args: argparse.Namespace) -> int:
    fixture = Path(args.fixture)
    if not args.label_only:
        result = synthesize(fixture / "src", fixture / "tests", SteroidKind(args.kind.upper()), args.budget,
                            args.seed, timeout=args.timeout)
        print(f"{result.kind.value}: {result.candidates} candidates, {len(result.checked)} sampled, "
              f"{len(result.accepted)} sosies")
        for reason, count in result.rejected.items():
            print(f"  rejected {count}: {reason}")
        for variant in result.accepted:
            tag = " (identity)" if variant.identity else ""
            print(f"  {variant.variant_id} {variant.transplantation_point}: {variant.code or '<deleted>'}{tag}")
        if args.dry_run:
            return 0
        write_variants(fixture, list(result.accepted))
    truth = write_ground_truth(fixture, timeout=args.timeout)
    for vid, label in truth.items():
        print(f"  {vid}: {'diverse' if label['diverse'] else 'equivalent'}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    print(report_render(args.bundle), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampdiv", description="Detect computational diversity between program variants.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log pipeline progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def fixture_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("fixture", type=Path, help="fixture directory with src/ and tests/")
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--tdr-level", type=int, default=2)
        p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="per-test budget in seconds")

    p = sub.add_parser("amplify", help="amplify and instrument a fixture's tests")
    fixture_args(p)
    p.add_argument("--tdr", action="store_true", help="interaction-based amplification instead of literal/statement")
    p.set_defaults(func=cmd_amplify)

    p = sub.add_parser("calibrate", help="discard observation points that vary on the original program")
    fixture_args(p)
    p.add_argument("--runs", type=int, default=30, help="runs per environment")
    p.add_argument("--envs", type=int, default=3, help="number of environment perturbations")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="run the full pipeline over a corpus")
    p.add_argument("--config", type=Path, help="JSON config file; flags override its keys")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--runs", type=int)
    p.add_argument("--envs", dest="environments", type=int)
    p.add_argument("--modes", type=_modes, help=f"comma separated subset of {','.join(m.value for m in ALL_MODES)}")
    p.add_argument("--tdr-level", type=int)
    p.add_argument("--timeout", type=float)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("forge", help="synthesize sosie variants of a fixture program")
    p.add_argument("fixture", type=Path)
    p.add_argument("--kind", choices=[k.value.lower() for k in SteroidKind], default="add")
    p.add_argument("--budget", type=int, default=20, help="candidates to sample and check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dry-run", action="store_true", help="report sosies without writing them")
    p.add_argument("--label-only", action="store_true", help="only recompute ground_truth.json from the oracle")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("report", help="validate a report bundle and print its summary")
    p.add_argument("bundle", type=Path)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except AmpdivError as exc:
        print(f"ampdiv: {exc}", file=sys.stderr)
        return exc.exit_code
    except jsonschema.ValidationError as exc:
        print(f"ampdiv: report does not match the schema: {exc.message}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
