"""Command-line front end.

Exit codes: 0 success, 1 codec / protocol / verdict failure, 2 bad flags or
configuration.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .commuting import DEFAULT_MODULUS, TransformDomain, keygen
from .errors import CodecError, ConfigError, MultilocError, TransformError
from .grammar import (
    DEFAULT_CHAR_WIDTH,
    chunk_grammar,
    decode,
    derive_bits,
    encode_text,
    format_sequence,
    parse_sequence,
    render_concatenated,
)
from .scenario import SEED_ENV, load_scenario, passed, report, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multiloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="text -> production sequence")
    p.add_argument("--message", required=True)
    p.add_argument("--chunk-width", type=int, required=True)
    p.add_argument("--char-width", type=int, default=DEFAULT_CHAR_WIDTH)
    p.add_argument("--legacy-concat", action="store_true", help="print rule numbers run together (ambiguous)")

    p = sub.add_parser("decode", help="production sequence -> text")
    p.add_argument("--sequence", required=True, help="comma-separated rule numbers, or a file holding them")
    p.add_argument("--chunk-width", type=int, required=True)
    p.add_argument("--char-width", type=int, default=DEFAULT_CHAR_WIDTH)
    p.add_argument("--bits", action="store_true", help="print the derived bit string instead of text")

    p = sub.add_parser("keygen", help="draw a commuting-transform key")
    p.add_argument("--modulus", type=int, default=DEFAULT_MODULUS)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("run", help="run a scenario file (or a bundled scenario by name)")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--suite", type=Path, default=None, help="run every *.scn in a directory")
    p.add_argument("--jobs", type=int, default=None)
    return parser


def _check_width(k: int) -> None:
    # validated here so a bad flag exits 2 rather than surfacing as a codec error
    if not 1 <= k <= 7:
        raise ConfigError("--chunk-width must be in [1, 7]")


def cmd_encode(args) -> int:
    _check_width(args.chunk_width)
    seq = encode_text(args.message, chunk_grammar(args.chunk_width), args.char_width)
    if args.legacy_concat:
        print("warning: concatenated rule numbers are ambiguous once rules exceed 9", file=sys.stderr)
        print(render_concatenated(seq))
    else:
        print(format_sequence(seq))
    return EXIT_OK


def cmd_decode(args) -> int:
    _check_width(args.chunk_width)
    source = Path(args.sequence)
    text = source.read_text(encoding="utf-8").strip() if source.is_file() else args.sequence
    seq = parse_sequence(text)
    g = chunk_grammar(args.chunk_width)
    print(derive_bits(seq, g).bits if args.bits else decode(seq, g, args.char_width))
    return EXIT_OK


def cmd_keygen(args) -> int:
    seed = _seed(args.seed)
    if seed is None:
        raise ConfigError(f"keygen needs --seed or {SEED_ENV}")
    try:
        domain = TransformDomain(args.modulus)
    except TransformError as exc:
        raise ConfigError(f"--modulus: {exc}") from None
    key = keygen(domain, random.Random(seed))
    print(key.to_text())
    return EXIT_OK


def _seed(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer") from None


def _run_one(path: str, seed: int | None) -> tuple[str, int, str]:
    """Run one scenario in isolation; returns (name, exit code, report text)."""
    try:
        cfg = load_scenario(path, seed=seed)
        outcome = run_scenario(cfg)
    except ConfigError as exc:
        return Path(path).name, EXIT_CONFIG, f"# {Path(path).name}: config error: {exc}\n"
    return cfg.name, EXIT_OK if passed(outcome) else EXIT_FAIL, report(outcome)


def cmd_run(args) -> int:
    seed = args.seed
    if args.suite is not None:
        if args.scenario is not None:
            raise ConfigError("give a scenario or --suite, not both")
        if not args.suite.is_dir():
            raise ConfigError(f"{args.suite} is not a directory")
        paths = sorted(str(p) for p in args.suite.glob("*.scn"))
        if not paths:
            raise ConfigError(f"no *.scn files in {args.suite}")
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            runs = list(pool.map(_run_one, paths, [seed] * len(paths)))
    elif args.scenario is not None:
        runs = [_run_one(args.scenario, seed)]
    else:
        raise ConfigError("run needs a scenario file or --suite")
    text = "".join(body for _, _, body in runs)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    codes = [code for _, code, _ in runs]
    if EXIT_CONFIG in codes:
        return EXIT_CONFIG
    return EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK


COMMANDS = {"encode": cmd_encode, "decode": cmd_decode, "keygen": cmd_keygen, "run": cmd_run}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CodecError, MultilocError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
