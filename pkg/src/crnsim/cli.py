"""Command-line entry points: seeded protocol sweeps, the window optimizer, topology generation."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from crnsim.engine import SimParams, run
from crnsim.errors import ConfigError, CrnError
from crnsim.metrics import node_etx
from crnsim.protocols import NAMES, get_policy
from crnsim.topology import ChannelProcess, Deployment, DeploymentParams, generate

SWEEPS = ("channels", "buffer", "radios")
DEFAULT_CHANNEL_SWEEP = (1, 2, 3, 4, 5, 6)
DEFAULT_BUFFER_SWEEP = (10, 25, 50, 100, 200)
DEFAULT_RADIO_SWEEP = (1, 2, 3)
CSV_COLUMNS = ("row", "protocol", "sweep", "value", "seed", "throughput", "delivered", "dropped", "slots", "topology")


@dataclass(frozen=True)
class ExperimentConfig:
    num_sus: int = 30
    num_pus: int = 4
    area_width: float = 500.0
    area_height: float = 500.0
    d_s: float = 4.0
    d_i: float = 8.0
    pu_tx_range: float = 6.0
    pu_if_range: float = 12.0
    unit_length: float = 25.0
    channels: int = 4
    radios: int = 3
    loss_min: float = 0.1
    loss_max: float = 0.3
    pu_busy_prob: float = 0.3
    pu_mean_on: float = 5.0
    window_slots: int = 5
    batch_size: int = 10
    capacity: int = 100
    buffer: int = 100
    max_candidates: int = 4
    source_window: int = 4
    protocols: tuple[str, ...] = NAMES
    sweep: str = "channels"
    sweep_values: tuple[int, ...] | None = None
    seeds: tuple[int, ...] = tuple(range(20))
    horizon: int = 10000
    out: str | None = None

    def validate(self) -> None:
        for name in ("num_sus", "channels", "radios", "window_slots", "batch_size", "capacity", "buffer",
                     "max_candidates", "source_window", "horizon"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name}: expected an integer >= 1, got {v!r}")
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep: expected one of {', '.join(SWEEPS)}, got {self.sweep!r}")
        if not self.protocols:
            raise ConfigError("protocols: at least one protocol required")
        for p in self.protocols:
            if not isinstance(p, str) or p.upper() not in NAMES:
                raise ConfigError(f"protocols: unknown protocol {p!r}")
        if len({p.upper() for p in self.protocols}) != len(self.protocols):
            raise ConfigError("protocols: duplicates")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed required")
        for s in self.seeds:
            if isinstance(s, bool) or not isinstance(s, int) or s < 0:
                raise ConfigError(f"seeds: expected non-negative integers, got {s!r}")
        if self.sweep_values is not None:
            if not self.sweep_values:
                raise ConfigError("sweep_values: empty")
            for v in self.sweep_values:
                if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                    raise ConfigError(f"sweep_values: expected integers >= 1, got {v!r}")
        if not 0.0 <= self.pu_busy_prob < 1.0:
            raise ConfigError("pu_busy_prob: must lie in [0, 1)")
        try:
            self.deployment_params(self.channels, self.radios).validate()
            ChannelProcess.uniform(1, 1, self.pu_busy_prob, self.pu_mean_on)
        except CrnError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def values(self) -> tuple[int, ...]:
        if self.sweep_values is not None:
            return tuple(sorted(set(self.sweep_values)))
        return {"channels": DEFAULT_CHANNEL_SWEEP, "buffer": DEFAULT_BUFFER_SWEEP, "radios": DEFAULT_RADIO_SWEEP}[self.sweep]

    @property
    def ordered_protocols(self) -> tuple[str, ...]:
        return tuple(sorted((p.upper() for p in self.protocols), key=NAMES.index))

    def deployment_params(self, channels: int, radios: int) -> DeploymentParams:
        return DeploymentParams(num_sus=self.num_sus, num_pus=self.num_pus, area_width=self.area_width,
                                area_height=self.area_height, d_s=self.d_s, d_i=self.d_i,
                                pu_tx_range=self.pu_tx_range, pu_if_range=self.pu_if_range, num_channels=channels,
                                num_radios=radios, unit_length=self.unit_length, loss_min=self.loss_min,
                                loss_max=self.loss_max)

    def cell(self, value: int) -> tuple[DeploymentParams, SimParams]:
        channels = value if self.sweep == "channels" else self.channels
        radios = value if self.sweep == "radios" else self.radios
        buffer = value if self.sweep == "buffer" else self.buffer
        sim = SimParams(batch_size=self.batch_size, buffer_cap=buffer, window_slots=self.window_slots,
                        capacity=self.capacity, max_candidates=self.max_candidates, source_window=self.source_window)
        return self.deployment_params(channels, radios), sim

    def echo(self) -> list[str]:
        doc = dataclasses.asdict(self)
        doc["sweep_values"] = list(self.values)
        del doc["out"]  # where the CSV goes is not part of the experiment
        return [f"{k}={json.dumps(v if not isinstance(v, tuple) else list(v))}" for k, v in sorted(doc.items())]


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TUPLES = ("protocols", "sweep_values", "seeds")
_FLOATS = ("area_width", "area_height", "d_s", "d_i", "pu_tx_range", "pu_if_range", "unit_length", "loss_min",
           "loss_max", "pu_busy_prob", "pu_mean_on")


def parse_config_text(text: str, origin: str = "<config>") -> ExperimentConfig:
    """Strict parse of a flat JSON object; missing keys keep their defaults."""
    if not text.strip():
        doc = {}
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{origin}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{origin}: top level must be a JSON object")
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"{origin}: unknown key(s): {', '.join(unknown)}")
    kw = {}
    for key, value in doc.items():
        if key in _TUPLES:
            if value is not None and not isinstance(value, list):
                raise ConfigError(f"{origin}: {key}: expected a list, got {value!r}")
            value = None if value is None else tuple(value)
        elif key in _FLOATS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{origin}: {key}: expected a number, got {value!r}")
            value = float(value)
        elif key in ("sweep", "out"):
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{origin}: {key}: expected a string, got {value!r}")
        kw[key] = value
    cfg = ExperimentConfig(**kw)
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return cfg


def parse_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return parse_config_text("")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config_text(text, path)


def topology_hash(dep: Deployment) -> str:
    return hashlib.sha256(dep.to_json().encode()).hexdigest()[:16]


def _run_cell(args):
    cfg, value, seed = args
    dparams, sim = cfg.cell(value)
    dep = generate(dparams, seed)
    proc = ChannelProcess.uniform(num_pus=dparams.num_pus, num_channels=dparams.num_channels,
                                  busy_prob=cfg.pu_busy_prob, mean_on=cfg.pu_mean_on, seed=seed)
    digest = topology_hash(dep)
    out = []
    for proto in cfg.ordered_protocols:
        m = run(dep, proc, get_policy(proto), cfg.horizon, seed=seed, params=sim)
        out.append((proto, value, seed, m.throughput, m.delivered_packets, m.dropped_packets, m.slots_elapsed, digest))
    return out


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> list[tuple]:
    """One result tuple per (protocol, sweep value, seed), stably ordered.

    Every protocol of a (value, seed) cell runs on the same deployment and
    channel process.
    """
    cells = [(cfg, v, s) for v in cfg.values for s in sorted(set(cfg.seeds))]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    rows = [r for chunk in chunks for r in chunk]
    for chunk in chunks:
        assert len({r[7] for r in chunk}) == 1, "protocols of one cell saw different topologies"
    order = {p: n for n, p in enumerate(NAMES)}
    rows.sort(key=lambda r: (order[r[0]], r[1], r[2]))
    return rows


def summarize(rows) -> list[tuple]:
    """(protocol, value, stat, throughput, delivered, dropped, slots) for stat in mean, std."""
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r[0], r[1]), []).append(r)
    out = []
    for (proto, value), rs in groups.items():
        cols = [[r[i] for r in rs] for i in (3, 4, 5, 6)]
        out.append((proto, value, "mean", *[statistics.fmean(c) for c in cols]))
        out.append((proto, value, "std", *[statistics.stdev(c) if len(c) > 1 else 0.0 for c in cols]))
    return out


def format_csv(cfg: ExperimentConfig, rows) -> str:
    buf = io.StringIO()
    for line in cfg.echo():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for proto, value, seed, thr, deliv, drop, slots, digest in rows:
        w.writerow(("run", proto, cfg.sweep, value, seed, f"{thr:.6f}", deliv, drop, slots, digest))
    for proto, value, stat, thr, deliv, drop, slots in summarize(rows):
        w.writerow((stat, proto, cfg.sweep, value, "", f"{thr:.6f}", f"{deliv:.3f}", f"{drop:.3f}", f"{slots:.1f}", ""))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    overrides = {}
    if args.protocol:
        overrides["protocols"] = tuple(p.strip().upper() for p in args.protocol.split(",") if p.strip())
    if args.sweep:
        overrides["sweep"] = args.sweep
    if args.values:
        overrides["sweep_values"] = _int_list(args.values, "--values")
    if args.seeds:
        overrides["seeds"] = _int_list(args.seeds, "--seeds")
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.out:
        overrides["out"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
        cfg.validate()
    text = format_csv(cfg, run_sweep(cfg, jobs=args.jobs))
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_optimize(args) -> int:
    from crnsim import optimizer

    try:
        with open(args.instance, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{args.instance}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.instance}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    inst = optimizer.load_instance(doc)
    if "variables" in doc:
        v = doc["variables"]
        import numpy as np

        asn = optimizer.Assignment(mu=np.asarray(v["mu"], float), theta=np.asarray(v["theta"], float),
                                   f=np.asarray(v["f"], float))
        label = "given"
    else:
        asn = optimizer.solve_local(inst, seed=args.seed, budget=args.budget)
        label = "local"
    report = optimizer.check_feasible(inst, asn)
    print(f"{label} objective: {optimizer.objective(inst, asn):.6f}")
    print(f"violations: {len(report)}")
    for v in report:
        print(f"  {v}")
    if args.oracle:
        g = optimizer.grid_oracle(inst, resolution=args.resolution)
        print(f"grid objective: {g.objective:.6f} (resolution {args.resolution})")
    return 1 if report else 0


def cmd_topology(args) -> int:
    if not args.generate and not args.etx:
        raise ConfigError("topology: nothing to do (use --generate and/or --etx)")
    cfg = parse_config(args.config)
    dep = generate(cfg.deployment_params(cfg.channels, cfg.radios), args.seed)
    if args.generate:
        text = dep.to_json(indent=1) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    if args.etx:
        table = node_etx(dep)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("node", "etx", "next_hop"))
        for i, e in enumerate(table.node_etx):
            w.writerow((i, f"{e:.6f}", "" if table.next_hop[i] is None else table.next_hop[i]))
    return 0


def _int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crnsim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for a per-slot trace")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a seeded protocol sweep and write CSV")
    s.add_argument("--config", help="flat JSON config; missing keys take defaults")
    s.add_argument("--protocol", help="comma-separated subset of ornc,more,exor,single")
    s.add_argument("--sweep", choices=SWEEPS)
    s.add_argument("--values", help="comma-separated sweep values")
    s.add_argument("--seeds", help="comma-separated seeds")
    s.add_argument("--horizon", type=int, help="slots per run")
    s.add_argument("--out", help="CSV path (stdout when omitted)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("optimize", help="solve or check the per-window program for an instance")
    o.add_argument("--instance", required=True, help="topology JSON with optional nlp and variables sections")
    o.add_argument("--budget", type=int, default=2000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--oracle", action="store_true", help="also run the exhaustive grid (tiny instances only)")
    o.add_argument("--resolution", type=float, default=0.05)
    o.set_defaults(func=cmd_optimize)

    t = sub.add_parser("topology", help="generate a deployment")
    t.add_argument("--generate", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--config", help="flat JSON config for the placement parameters")
    t.add_argument("--out")
    t.add_argument("--etx", action="store_true", help="print the node ETX table as CSV")
    t.set_defaults(func=cmd_topology)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CrnError, ValueError) as exc:
        print(f"crnsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
