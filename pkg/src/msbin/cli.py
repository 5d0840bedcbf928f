"""Command-line entry point: data ingestion, configuration, pipeline
orchestration, and report emission."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .combine import PvalTree
from .dists import ConfigurationError
from .longitudinal import (
    NetworkTestConfig,
    run_asymmetric,
    run_degree_corrected,
    run_symmetric,
    suggest_network_levels,
)
from .netstats import LongitudinalNetwork
from .partition import Domain, build_equal_count, build_equal_width
from .pointproc import PointPattern
from .simlab import ExperimentSpec, rows_to_csv, rows_to_json, run_experiment
from .twosample import default_levels, pool, run_two_sample

__all__ = ["main", "parse_events", "emit_report", "ParseError", "ValidationError"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_CONFIG = 5


class ParseError(ValueError):
    """Malformed input file; message carries the offending line number."""


class ValidationError(ValueError):
    """Structurally valid input that violates a semantic requirement."""


def _infer_domain(times: np.ndarray) -> Domain:
    if times.size == 0:
        raise ValidationError("cannot infer a domain from an empty file")
    return Domain(float(times.min()), float(np.nextafter(times.max(), np.inf)))


def parse_events(path):
    """Read an event CSV; the header decides the shape of the result.

    `t`        -> PointPattern
    `t,sample` -> (PointPattern, PointPattern), sample values 'a' / 'b'
    `u,v,t`    -> LongitudinalNetwork (1-based ids; symmetric unless the file
                  opens with a `# bipartite m n` line)
    """
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc

    bipartite_shape = None
    lines = raw.splitlines()
    start = 0
    while start < len(lines) and (not lines[start].strip()
                                  or lines[start].lstrip().startswith("#")):
        stripped = lines[start].lstrip()
        if stripped.startswith("#"):
            fields = stripped[1:].split()
            if fields[:1] == ["bipartite"]:
                if len(fields) != 3:
                    raise ParseError(f"line {start + 1}: bipartite header "
                                     "must be '# bipartite m n'")
                try:
                    bipartite_shape = (int(fields[1]), int(fields[2]))
                except ValueError as exc:
                    raise ParseError(f"line {start + 1}: {exc}") from exc
        start += 1
    if start >= len(lines):
        raise ParseError("file has no header row")

    reader = csv.reader(lines[start:])
    header = tuple(h.strip().lower() for h in next(reader))
    rows = list(reader)
    offset = start + 2  # 1-based line number of the first data row

    if header == ("t",):
        times = _parse_times(rows, offset, col=0, width=1)
        return PointPattern(np.sort(times), _infer_domain(times))

    if header == ("t", "sample"):
        times = _parse_times(rows, offset, col=0, width=2)
        labels = []
        for i, row in enumerate(rows):
            label = row[1].strip().lower()
            if label not in ("a", "b"):
                raise ParseError(f"line {offset + i}: sample must be 'a' or 'b', "
                                 f"got {row[1]!r}")
            labels.append(label)
        labels_arr = np.array(labels)
        domain = _infer_domain(times)
        return (PointPattern(np.sort(times[labels_arr == "a"]), domain),
                PointPattern(np.sort(times[labels_arr == "b"]), domain))

    if header == ("u", "v", "t"):
        us, vs, ts = [], [], []
        for i, row in enumerate(rows):
            if len(row) != 3:
                raise ParseError(f"line {offset + i}: expected 3 fields")
            try:
                u, v, t = int(row[0]), int(row[1]), float(row[2])
            except ValueError as exc:
                raise ParseError(f"line {offset + i}: {exc}") from exc
            if u < 1 or v < 1:
                raise ValidationError(f"line {offset + i}: node ids are 1-based")
            if bipartite_shape is None and u == v:
                raise ValidationError(f"line {offset + i}: self-interaction u = v")
            us.append(u)
            vs.append(v)
            ts.append(t)
        times = np.array(ts, dtype=float)
        domain = _infer_domain(times)
        return LongitudinalNetwork.from_records(
            zip(us, vs, ts), domain=domain, shape=bipartite_shape)

    raise ParseError(f"unrecognized header {','.join(header)!r}; expected "
                     "'t', 't,sample', or 'u,v,t'")


def _parse_times(rows, offset, col, width):
    times = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"line {offset + i}: expected {width} field(s)")
        try:
            times.append(float(row[col]))
        except ValueError as exc:
            raise ParseError(f"line {offset + i}: {exc}") from exc
    return np.array(times, dtype=float)


def emit_report(tree: PvalTree, fmt: str = "json") -> bytes:
    """Serialize a result tree as canonical JSON or an indented text tree."""
    if fmt == "json":
        return tree.to_json().encode()
    if fmt == "text":
        return (tree.render_text() + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")


@dataclass
class RunConfig:
    input: str | None = None
    domain: tuple[float, float] | None = None
    levels: int | None = None
    boot: int = 200
    combine: str = "fisher"
    alpha: float = 0.05
    partition: str = "equal-width"
    stat: str | None = None
    bootstrap_correct: bool = False
    seed: int = 0
    out: str | None = None
    format: str = "json"
    include_root_level: bool = False
    mcmc_burnin_factor: float = 10.0
    mcmc_thin_factor: float = 5.0
    mcmc_independent_chains: bool = False
    threads: int | None = None  # None -> available parallelism
    tw1_table: str | None = None  # override for the bundled CDF table

    def validate(self):
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.boot < 1:
            raise ValidationError("boot must be >= 1")
        if self.levels is not None and self.levels < 1:
            raise ValidationError("levels must be >= 1")
        if self.combine not in ("fisher", "min"):
            raise ValidationError("combine must be 'fisher' or 'min'")
        if self.partition not in ("equal-width", "equal-count"):
            raise ValidationError("partition must be equal-width or equal-count")
        if self.threads is not None and self.threads < 1:
            raise ValidationError("threads must be >= 1")

    def resolved_threads(self) -> int:
        import os

        return self.threads if self.threads is not None else (os.cpu_count() or 1)


_CONFIG_KEYS = set(RunConfig.__dataclass_fields__)


def _merge_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    file_values = {}
    if getattr(args, "config", None):
        try:
            file_values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot load config: {exc}") from exc
        unknown = set(file_values) - _CONFIG_KEYS
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
        elif key in file_values:
            value = file_values[key]
            if key == "domain" and value is not None:
                value = tuple(value)
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("input", nargs="?", help="event CSV file")
    parser.add_argument("--config", help="JSON config merged under the flags")
    parser.add_argument("--domain", nargs=2, type=float, metavar=("LO", "HI"))
    parser.add_argument("--levels", type=int)
    parser.add_argument("--boot", type=int)
    parser.add_argument("--combine", choices=("fisher", "min"))
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out")
    parser.add_argument("--format", choices=("json", "text"))
    parser.add_argument("--include-root-level", dest="include_root_level",
                        action="store_const", const=True)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msbin",
        description="Multiscale binning tests for point processes "
                    "and longitudinal networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p2 = sub.add_parser("two-sample", help="two-sample intensity test")
    _add_common(p2)
    p2.add_argument("--partition", choices=("equal-width", "equal-count"))

    for name in ("network-sym", "network-dc", "network-asym"):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} community test")
        _add_common(p)
        p.add_argument("--partition", choices=("equal-width", "equal-count"))
        if name == "network-sym":
            p.add_argument("--stat", choices=("eig", "eig-bootstrap"))
            p.add_argument("--bootstrap-correct", dest="bootstrap_correct",
                           action="store_const", const=True)
        elif name == "network-dc":
            p.add_argument("--stat", choices=("sgnq", "sgnt"))
            p.add_argument("--mcmc-burnin-factor", dest="mcmc_burnin_factor",
                           type=float)
            p.add_argument("--mcmc-thin-factor", dest="mcmc_thin_factor",
                           type=float)
            p.add_argument("--mcmc-independent-chains",
                           dest="mcmc_independent_chains",
                           action="store_const", const=True)

    psim = sub.add_parser("simulate", help="run a simulation study")
    psim.add_argument("--scenario", required=True)
    psim.add_argument("--reps", type=int)
    psim.add_argument("--boot", type=int)
    psim.add_argument("--alpha", type=float, action="append")
    psim.add_argument("--scale", choices=("desk", "paper"), default="desk")
    psim.add_argument("--seed", type=int, default=0)
    psim.add_argument("--set", dest="assignments", action="append", default=[],
                      metavar="KEY=VALUE", help="scenario knob")
    psim.add_argument("--out")
    psim.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _write_output(data: bytes, out: str | None):
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        if not data.endswith(b"\n"):
            sys.stdout.write("\n")


def _build_tree(cfg: RunConfig, times: np.ndarray, domain: Domain):
    levels = cfg.levels if cfg.levels is not None else default_levels(times.size)
    if cfg.partition == "equal-count":
        return build_equal_count(np.sort(times), domain, levels)
    return build_equal_width(domain, levels)


def _run_two_sample_cmd(cfg: RunConfig) -> bytes:
    parsed = parse_events(cfg.input)
    if not (isinstance(parsed, tuple) and len(parsed) == 2):
        raise ValidationError("two-sample needs a 't,sample' file")
    na, nb = parsed
    if cfg.domain is not None:
        domain = Domain(*cfg.domain)
        na = PointPattern(na.events, domain)
        nb = PointPattern(nb.events, domain)
    merged = pool(na, nb)
    tree = _build_tree(cfg, merged.positions, na.domain)
    result = run_two_sample(
        na, nb, tree, cfg.boot, combiner=cfg.combine, alpha=cfg.alpha,
        rng=np.random.default_rng(cfg.seed), include_root=cfg.include_root_level,
        threads=cfg.resolved_threads())
    return emit_report(result, cfg.format)


def _run_network_cmd(cfg: RunConfig, mode: str) -> bytes:
    parsed = parse_events(cfg.input)
    if not isinstance(parsed, LongitudinalNetwork):
        raise ValidationError(f"{mode} needs a 'u,v,t' file")
    net = parsed
    if cfg.domain is not None:
        net = LongitudinalNetwork(net.u, net.v, net.times, net.n_nodes,
                                  Domain(*cfg.domain), net.shape)
    if cfg.levels is None:
        levels = suggest_network_levels(net)
    else:
        levels = cfg.levels
    if cfg.partition == "equal-count":
        tree = build_equal_count(net.times, net.domain, levels)
    else:
        tree = build_equal_width(net.domain, levels)

    if mode == "network-sym":
        stat = cfg.stat or "eig"
        if cfg.bootstrap_correct:
            stat = "eig-bootstrap"
        runner = run_symmetric
    elif mode == "network-dc":
        stat = cfg.stat or "sgnq"
        runner = run_degree_corrected
    else:
        stat = "asym-eig"
        runner = run_asymmetric
    net_cfg = NetworkTestConfig(
        statistic=stat, levels=levels, boot=cfg.boot, combiner=cfg.combine,
        alpha=cfg.alpha, include_root=cfg.include_root_level,
        mcmc_burnin_factor=cfg.mcmc_burnin_factor,
        mcmc_thin_factor=cfg.mcmc_thin_factor,
        mcmc_independent_chains=cfg.mcmc_independent_chains,
        threads=cfg.resolved_threads())
    result = runner(net, tree, net_cfg, np.random.default_rng(cfg.seed))
    return emit_report(result, cfg.format)


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def _run_simulate_cmd(args: argparse.Namespace) -> bytes:
    params = {}
    for item in args.assignments:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        params[key] = _coerce(value)
    spec = ExperimentSpec(
        scenario=args.scenario, reps=args.reps, boot=args.boot,
        alphas=tuple(args.alpha) if args.alpha else (0.05,),
        params=params, seed=args.seed, scale=args.scale)
    rows = run_experiment(spec)
    text = rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows)
    return text.encode()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            data = _run_simulate_cmd(args)
            _write_output(data, args.out)
            return EXIT_OK
        cfg = _merge_config(args)
        if cfg.input is None:
            raise ValidationError("an input file is required")
        if cfg.tw1_table is not None:
            from .dists import load_tw1_table

            load_tw1_table(cfg.tw1_table)
        if args.command == "two-sample":
            data = _run_two_sample_cmd(cfg)
        else:
            data = _run_network_cmd(cfg, args.command)
        _write_output(data, cfg.out)
        return EXIT_OK
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
