"""Command-line entry point: ``contentwur --config run.json --out results/``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_config
from .harness import run_grid
from .results import emit_results

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="contentwur", description="Simulate ID-based and content-based wake-up polling sweeps.")
    p.add_argument("--config", type=Path, help="JSON run manifest")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: results)")
    p.add_argument("--seed", type=_seed, help="base seed, overrides the manifest")
    p.add_argument("--protocol", choices=("id", "content", "both"), help="restrict the protocols of the manifest")
    p.add_argument("--episodes", type=_positive, help="episodes per configuration")
    p.add_argument("--steps", type=_positive, help="timesteps per episode")
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes for episodes (default: 1)")
    p.add_argument("--oracle", action="store_true", help="run the reference-oracle checks and exit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _run_oracles() -> int:
    from .oracles import oracle_report

    ok = True
    for c in oracle_report():
        ok &= c.passed
        status = "ok  " if c.passed else "FAIL"
        print(f"{status} {c.name}: oracle={c.oracle:.6g} implementation={c.implementation:.6g} "
              f"tolerance={c.tolerance:.2g}")
    return EXIT_OK if ok else EXIT_RUNTIME


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.oracle:
        return _run_oracles()
    if args.config is None:
        parser.error("--config is required")

    try:
        manifest = parse_config(args.config)
        protocols = None
        if args.protocol is not None:
            protocols = ["id", "content"] if args.protocol == "both" else [args.protocol]
        manifest = manifest.with_overrides(base_seed=args.seed, protocols=protocols,
                                           episodes=args.episodes, steps=args.steps)
        grid = manifest.grid()
    except ConfigError as exc:
        print(f"contentwur: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    start = time.perf_counter()
    try:
        results = run_grid(grid, jobs=args.jobs)
        paths = emit_results(manifest, list(zip(grid, results)), args.out)
    except (OSError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"contentwur: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    elapsed = time.perf_counter() - start
    # kept out of summary.json so outputs stay byte-identical between runs
    (args.out / "timing.txt").write_text(f"wall_clock_seconds {elapsed:.3f}\njobs {args.jobs}\n")
    print(f"wrote {len(grid)} configurations to {', '.join(str(p) for p in paths)} in {elapsed:.1f} s",
          file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
