"""``timescales`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 numerical
failure. Errors go to standard error, ending with an ``error_code=<code>``
line.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone

from .. import __version__
from ..core import BracketError, NumericalError
from .commands import COMMANDS, Command, Context
from .config import (CliError, NumericalFailure, UsageError, ValidationError, apply_override,
                     flag_names, load_config_file, merge, to_jsonable)
from .output import FORMATS, Emitter

U64_MAX = 2 ** 64 - 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("usage", f"{self.prog}: {message}")


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _common_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("run options")
    g.add_argument("--config", metavar="PATH", help="JSON config merged over the defaults")
    g.add_argument("--seed", type=_seed, metavar="U64", help="override the config seed")
    g.add_argument("--out", metavar="DIR", help="write data files and manifest.json here")
    g.add_argument("--format", choices=FORMATS, default="csv", help="series file format")
    g.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                   help="override any config entry, e.g. rates.beta_f=0.05")
    g.add_argument("--quiet", action="store_true", help="no progress output on stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="timescales", allow_abbrev=False,
                     description="Simulation engines for tipping, glass, secretion, cycle "
                                 "and greenhouse models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = parser.add_subparsers(dest="group", metavar="GROUP")
    common = _common_flags()
    sub_by_group: dict[str, argparse._SubParsersAction] = {}
    for cmd in COMMANDS:
        if cmd.group not in sub_by_group:
            gp = groups.add_parser(cmd.group, help=f"{cmd.group} engine", allow_abbrev=False)
            sub_by_group[cmd.group] = gp.add_subparsers(dest="command", metavar="COMMAND")
        sp = sub_by_group[cmd.group].add_parser(cmd.name, help=cmd.help, parents=[common],
                                                allow_abbrev=False, description=cmd.help)
        overrides = sp.add_argument_group("config overrides")
        for flag, path in flag_names(cmd.defaults()).items():
            overrides.add_argument(flag, dest="ov:" + ".".join(path), metavar="VALUE",
                                   default=argparse.SUPPRESS, help=".".join(path))
        sp.set_defaults(cmd=cmd)
    return parser


def resolve_config(cmd: Command, args) -> dict:
    defaults = cmd.defaults()
    doc = load_config_file(args.config) if args.config else {}
    cfg = merge(defaults, doc)
    if args.seed is not None and "seed" in cfg:
        cfg["seed"] = args.seed
    for item in args.set:
        path, sep, text = item.partition("=")
        if not sep or not path:
            raise UsageError("usage", f"--set expects PATH=VALUE, got {item!r}")
        apply_override(cfg, defaults, tuple(path.split(".")), text)
    for key, text in vars(args).items():
        if key.startswith("ov:"):
            apply_override(cfg, defaults, tuple(key[3:].split(".")), text)
    return cfg


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fail(err: CliError) -> int:
    print(f"error: {err}", file=sys.stderr)
    print(f"error_code={err.code}", file=sys.stderr)
    return err.exit_code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "cmd", None) is None:
            parser.print_help(sys.stderr)
            raise UsageError("usage", "a subcommand is required")
        cmd: Command = args.cmd
        started = datetime.now(timezone.utc)
        cfg = resolve_config(cmd, args)
        emitter = Emitter(args.out, args.format)
        try:
            summary = cmd.run(cfg, Context(emitter, args.quiet))
        except (BracketError, NumericalError) as exc:
            raise NumericalFailure("numerical_failure", str(exc)) from None
        except (ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
            raise ValidationError("invalid_config", str(msg)) from None
        summary = to_jsonable(summary)
        seed = cfg.get("seed", args.seed)
        emitter.manifest(cmd.label, to_jsonable(cfg), seed, started, summary)
    except CliError as err:
        return _fail(err)
    for key, value in summary.items():
        print(f"{key}={_format(value)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
