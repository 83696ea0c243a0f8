"""Command line front end: ``chiralbounds <subcommand> [flags]``.

Exit status is 0 iff every theorem-backed check of the selected suites
passes, 1 if one fails and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import reports
from .exact import parse_rational
from .suites import ALL_SUITES, THEOREM_SUITES, RunConfig, run_named

log = logging.getLogger("chiralbounds")

MAX_LEVEL_CAP = 14
TOL_RANGE = (1e-12, 1e-4)
ALGEBRAS = ("virasoro", "w3", "heisenberg")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def read_config_file(path: Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError("config", f"line {lineno} is not key=value: {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _rational(key: str, value) -> Fraction:
    try:
        return parse_rational(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(key, f"invalid rational {value!r}") from exc


def _int(key: str, value) -> int:
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"expected an integer, got {value!r}") from exc


def _power_of_two(key: str, value) -> int:
    n = _int(key, value)
    if n < 8 or n & (n - 1):
        raise ConfigError(key, f"must be a power of two >= 8, got {n}")
    return n


def build_config(values: dict[str, object]) -> RunConfig:
    """Validate flat key/value settings into a :class:`RunConfig`."""
    cfg = RunConfig()
    known = {"algebra", "c", "h", "w", "max_level", "tol", "suites", "out", "steps", "grid", "workers",
             "deformations", "seed"}
    for key in values:
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
    if "algebra" in values:
        alg = str(values["algebra"]).strip().lower()
        if alg not in ALGEBRAS:
            raise ConfigError("algebra", f"must be one of {', '.join(ALGEBRAS)}, got {values['algebra']!r}")
        cfg = replace(cfg, algebra=alg)
    for key in ("c", "h", "w"):
        if key in values:
            cfg = replace(cfg, **{key: _rational(key, values[key])})
    if cfg.algebra == "w3" and 22 + 5 * cfg.c == 0:
        raise ConfigError("c", "c = -22/5 makes the W3 structure constant undefined")
    if "max_level" in values:
        n = _int("max_level", values["max_level"])
        if n < 0:
            raise ConfigError("max_level", "must be nonnegative")
        if n > MAX_LEVEL_CAP:
            raise ConfigError("max_level", f"{n} exceeds the hard cap {MAX_LEVEL_CAP}")
        cfg = replace(cfg, max_level=n)
    if "tol" in values:
        try:
            tol = float(values["tol"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("tol", f"expected a number, got {values['tol']!r}") from exc
        if not TOL_RANGE[0] <= tol <= TOL_RANGE[1]:
            raise ConfigError("tol", f"{tol} outside [{TOL_RANGE[0]}, {TOL_RANGE[1]}]")
        cfg = replace(cfg, tol=tol)
    if "suites" in values:
        raw = values["suites"]
        names = [s.strip() for s in (raw.split(",") if isinstance(raw, str) else raw) if s.strip()]
        for s in names:
            if s not in ALL_SUITES:
                raise ConfigError("suites", f"unknown suite {s!r}")
        cfg = replace(cfg, suites=names)
    if "out" in values:
        cfg = replace(cfg, out=Path(str(values["out"])))
    if "steps" in values:
        cfg = replace(cfg, steps=_power_of_two("steps", values["steps"]))
    if "grid" in values:
        cfg = replace(cfg, grid=_power_of_two("grid", values["grid"]))
    if "workers" in values:
        n = _int("workers", values["workers"])
        if n < 1:
            raise ConfigError("workers", "must be at least 1")
        cfg = replace(cfg, workers=n)
    if "seed" in values:
        cfg = replace(cfg, seed=_int("seed", values["seed"]))
    if "deformations" in values:
        cfg = replace(cfg, deformations=str(values["deformations"]))
        try:
            cfg.deformation_list()
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError("deformations", f"cannot parse {values['deformations']!r}") from exc
    return cfg


def _ensure_out(cfg: RunConfig) -> None:
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("out", f"cannot create {cfg.out}: {exc}") from exc
    if not os.access(cfg.out, os.W_OK):
        raise ConfigError("out", f"{cfg.out} is not writable")


def run_suite(cfg: RunConfig) -> int:
    """Run the configured suites, write reports, return the exit status."""
    _ensure_out(cfg)
    names = list(cfg.suites)
    results = {}
    if cfg.workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {n: pool.submit(run_named, n, cfg) for n in names}
            results = {n: f.result() for n, f in futures.items()}
    else:
        for n in names:
            log.info("running suite %s", n)
            results[n] = run_named(n, cfg)
    status = {}
    for n in names:
        doc, files = results[n]
        reports.write(cfg.out / f"{n}.json", doc)
        for fname, text in sorted(files.items()):
            (cfg.out / fname).write_text(text, encoding="utf-8")
        status[n] = doc["passed"]
        log.info("suite %s: %s", n, "pass" if doc["passed"] else "FAIL")
    summary = {"schema_version": reports.SCHEMA_VERSION, "generated_at": reports.timestamp(),
               "suites": status, "passed": all(status.values())}
    reports.write(cfg.out / "summary.json", summary)
    return 0 if summary["passed"] else 1


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key=value config file")
    common.add_argument("--algebra", choices=ALGEBRAS)
    common.add_argument("--c", help="central charge, p/q")
    common.add_argument("--h", help="lowest L0 weight, p/q")
    common.add_argument("--w", help="lowest W0 weight, p/q")
    common.add_argument("--max-level", dest="max_level")
    common.add_argument("--tol")
    common.add_argument("--out")
    common.add_argument("--workers")
    common.add_argument("--steps")
    common.add_argument("--grid")
    common.add_argument("--deformations", help="kappa:eta pairs separated by ';', e.g. '1:0;1:i/2'")
    common.add_argument("--seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="chiralbounds", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ALL_SUITES:
        sub.add_parser(name, parents=[common], help=f"run the {name} suite")
    run = sub.add_parser("run", parents=[common], help="run several suites")
    run.add_argument("--suites", help=f"comma list (default: {','.join(THEOREM_SUITES)})")
    sub.add_parser("schema", help="print the report JSON schema")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "schema":
        sys.stdout.write(reports.dumps(reports.SCHEMA))
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        values: dict[str, object] = {}
        if args.config is not None:
            values.update(read_config_file(args.config))
        for key in ("algebra", "c", "h", "w", "max_level", "tol", "out", "workers", "steps", "grid",
                    "deformations", "seed"):
            v = getattr(args, key, None)
            if v is not None:
                values[key] = v
        if args.command == "run":
            if getattr(args, "suites", None) is not None:
                values["suites"] = args.suites
        else:
            values["suites"] = args.command
        cfg = build_config(values)
        return run_suite(cfg)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
