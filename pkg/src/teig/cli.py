"""Command line interface: ``teig study ...`` runs a full study and writes reports."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .harness import DEFAULT_MAX_DIRECT_CELLS, StudyConfig, run_study
from .report import ALL_FORMATS, emit_report, render_text_table

#: Keys accepted both on the command line and in a config file.
CONFIG_KEYS = (
    "domain", "index", "mode", "ladder", "eigs", "out", "quad-order", "tol",
    "threads", "arnoldi-dim", "max-restarts", "max-direct-cells",
)


def parse_ladder(text: str) -> list[tuple[int, int]]:
    """Parse '4:16,8:32' into [(4, 16), (8, 32)]."""
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            coarse, fine = chunk.split(":")
            pairs.append((int(coarse), int(fine)))
        except ValueError as exc:
            raise ValueError(f"bad ladder entry {chunk!r}; expected 'H:h'") from exc
    return pairs


def parse_eigs(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read 'key = value' lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teig",
        description="Transmission-eigenvalue studies with mixed BFS/Q2 elements",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    study = sub.add_parser("study", help="run a table/convergence study")
    study.add_argument("--config", type=str, default=None,
                       help="key=value file supplying defaults for the flags below")
    study.add_argument("--domain", choices=("square", "lshape"), default=None)
    study.add_argument("--index", choices=("const16", "tilt", "radial"), default=None)
    study.add_argument("--mode", choices=("direct", "twogrid", "both"), default=None)
    study.add_argument("--ladder", type=str, default=None,
                       help="coarse:fine cell pairs, e.g. '4:16,8:32,16:64'")
    study.add_argument("--eigs", type=str, default=None,
                       help="comma-separated 1-based eigenvalue indices")
    study.add_argument("--out", type=str, default=None, help="output directory")
    study.add_argument("--quad-order", type=int, default=None)
    study.add_argument("--tol", type=float, default=None)
    study.add_argument("--threads", type=int, default=None,
                       help="worker threads (falls back to TEIG_THREADS)")
    study.add_argument("--arnoldi-dim", type=int, default=None)
    study.add_argument("--max-restarts", type=int, default=None)
    study.add_argument("--max-direct-cells", type=int, default=None,
                       help="skip direct fine solves above this cell count "
                            f"(default {DEFAULT_MAX_DIRECT_CELLS})")
    return parser


def _merge_config(args: argparse.Namespace) -> StudyConfig:
    file_vals: dict[str, str] = {}
    if args.config:
        file_vals = load_config_file(args.config)

    def pick(cli_value, key: str, parse, default):
        if cli_value is not None:
            return cli_value
        if key in file_vals:
            return parse(file_vals[key])
        return default

    threads = args.threads
    if threads is None and "threads" in file_vals:
        threads = int(file_vals["threads"])
    if threads is None:
        threads = int(os.environ.get("TEIG_THREADS", "1"))

    return StudyConfig(
        domain=pick(args.domain, "domain", str, "square"),
        index=pick(args.index, "index", str, "const16"),
        mode=pick(args.mode, "mode", str, "both"),
        ladder=parse_ladder(args.ladder) if args.ladder is not None
        else pick(None, "ladder", parse_ladder, [(4, 16), (8, 32), (16, 64)]),
        eigs=parse_eigs(args.eigs) if args.eigs is not None
        else pick(None, "eigs", parse_eigs, [1]),
        quad_order=pick(args.quad_order, "quad-order", int, 6),
        tol=pick(args.tol, "tol", float, 1e-10),
        arnoldi_dim=pick(args.arnoldi_dim, "arnoldi-dim", int, None),
        max_restarts=pick(args.max_restarts, "max-restarts", int, 50),
        threads=threads,
        out_dir=pick(args.out, "out", str, "teig-out"),
        max_direct_cells=pick(args.max_direct_cells, "max-direct-cells", int,
                              DEFAULT_MAX_DIRECT_CELLS),
    )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command != "study":  # pragma: no cover - argparse enforces this
        return 2
    try:
        config = _merge_config(args)
        config.validate()
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    record = run_study(config)
    paths = emit_report(record, ALL_FORMATS, config.out_dir)
    sys.stdout.write(render_text_table(record))
    for fmt in ALL_FORMATS:
        print(f"wrote {paths[fmt]}")
    failed = record.failed_rows
    if failed:
        for row in failed:
            print(f"row j={row.j} H={row.H_cells} h={row.h_cells} failed: {row.error}",
                  file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
