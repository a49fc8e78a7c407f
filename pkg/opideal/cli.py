import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .config import Command, Lemma, RunConfig
from .error import ConfigError, HypothesisError, OpIdealError, StructuralError
from .runner import run
from .serializers import SerializationError
from .types import ExperimentReport

__all__ = ['main', 'build_parser', 'config_from_args', 'EXIT_OK', 'EXIT_FAILED', 'EXIT_USAGE']

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

USAGE_ERRORS = (ConfigError, HypothesisError, StructuralError, SerializationError)

# argparse destination -> RunConfig field
_OVERRIDES = {
    "schedule": "schedule",
    "seed": "seed",
    "threads": "threads",
    "out": "out",
    "csv": "csv",
    "mask_m": "mask_m",
    "mask_n": "mask_n",
    "m": "m",
    "level": "level",
    "m_cols": "m_cols",
    "lemma": "lemma",
    "orders": "orders",
    "dims": "dims",
    "q": "q",
    "margin": "margin",
}
_BUDGET_OVERRIDES = {
    "budget": "subsets",
    "samples": "samples",
    "trials": "trials",
}


def _levels(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="RunConfig JSON file; flags override its fields")
    parser.add_argument("--schedule", help="preset name (tiny, small)")
    parser.add_argument("--seed", type=int, help="64-bit master seed")
    parser.add_argument("--threads", type=int, help="worker threads (default: $OPIDEAL_THREADS or 1)")
    parser.add_argument("--budget", type=int, help="subset enumeration cap before sampling")
    parser.add_argument("--samples", type=int, help="random samples per experiment")
    parser.add_argument("--out", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opideal", description="Operator ideal separation lab")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")
    commands = parser.add_subparsers(dest="command", required=True)

    rip = commands.add_parser("rip", help="generate or certify RIP column families")
    rip_actions = rip.add_subparsers(dest="action", required=True)
    _common(rip_actions.add_parser("gen", help="generate the seeded column family"))
    certify = rip_actions.add_parser("certify", help="certify subset spectra level by level")
    _common(certify)
    certify.add_argument("--orders", type=_levels, help="subset order per level, comma separated")

    build = commands.add_parser("build", help="build T_M, S_M and check their identities")
    _common(build)
    build.add_argument("--mask-m", type=_levels)
    build.add_argument("--mask-n", type=_levels)

    factorize = commands.add_parser("factorize", help="run one of the factorization lemmas")
    _common(factorize)
    factorize.add_argument("--lemma", choices=[lemma.value for lemma in Lemma])
    factorize.add_argument("--m", type=int)
    factorize.add_argument("--level", type=int)
    factorize.add_argument("--m-cols", type=int)
    factorize.add_argument("--mask-n", type=_levels)
    factorize.add_argument("--dims", type=_levels)
    factorize.add_argument("--trials", type=int)

    for name, text in (("separate", "separation experiment for Phi_m"), ("remark", "Psi_m decay sweep")):
        sub = commands.add_parser(name, help=text)
        _common(sub)
        sub.add_argument("--mask-m", type=_levels)
        sub.add_argument("--mask-n", type=_levels)
        sub.add_argument("--m", type=int)
        sub.add_argument("--margin", type=float)

    fss = commands.add_parser("fss-probe", help="finite strict singularity profile of T_M")
    _common(fss)
    fss.add_argument("--mask-m", type=_levels)
    fss.add_argument("--m", type=int)
    fss.add_argument("--dims", type=_levels)
    fss.add_argument("--trials", type=int)
    fss.add_argument("--q", type=float, help="also profile l_1 -> l_q")
    fss.add_argument("--csv", help="write the profile as CSV")

    _common(commands.add_parser("schedule-check", help="check the schedule inequalities"))

    report = commands.add_parser("report", help="validate reports or print their schema")
    report_actions = report.add_subparsers(dest="action", required=True)
    validate = report_actions.add_parser("validate")
    validate.add_argument("file")
    schema = report_actions.add_parser("schema")
    schema.add_argument("--config", action="store_true", help="schema of RunConfig instead")
    return parser


def _command(args: argparse.Namespace) -> Command:
    if args.command == "rip":
        return Command.RIP_GEN if args.action == "gen" else Command.RIP_CERTIFY
    return Command(args.command)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: Dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}")
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data["command"] = _command(args).value
    for dest, field in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[field] = value
    budgets = dict(data.get("budgets") or {})
    for dest, field in _BUDGET_OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            budgets[field] = value
    if budgets:
        data["budgets"] = budgets
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e))


def _report_command(args: argparse.Namespace) -> int:
    if args.action == "schema":
        model = RunConfig if args.config else ExperimentReport
        print(json.dumps(model.model_json_schema(), indent=2))
        return EXIT_OK
    try:
        ExperimentReport.model_validate_json(Path(args.file).read_text())
    except OSError as e:
        print(f"cannot read {args.file}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(e, file=sys.stderr)
        return EXIT_FAILED
    print(f"{args.file}: valid")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    levels = [logging.WARNING, logging.INFO, logging.DEBUG]
    logging.basicConfig(level=levels[min(args.verbose, 2)], format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return _report_command(args)
    try:
        config = config_from_args(args)
        report = run(config)
    except USAGE_ERRORS as e:
        print(f"opideal: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OpIdealError as e:
        print(f"opideal: {e}", file=sys.stderr)
        return EXIT_FAILED
    if config.out:
        for verdict in report.verdicts:
            print(f"{verdict.status.value:>13}  {verdict.name}  {verdict.detail}".rstrip())
    else:
        print(report.model_dump_json(indent=2))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
