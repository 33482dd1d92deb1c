"""Experiment configuration files.

A config is a YAML mapping; every section and key is optional::

    seed: 0
    threads: 1
    topology:
      node_counts: [1, 4, 4, 2]
    power:
      total: 8.0
    design:
      snr_db: 10.0
      constraint: global      # global | local | individual
      iterations: 2
      solver: qr              # qr | power
    simulation:
      snr_db: [0, 5, 10, 15, 20]
      packets: 200
      symbols: 1500
      designs: [global, local, individual, equal]
    feedback:
      model: perfect          # perfect | bsc
      pe: 0.001
      bits_real: 4
      bits_imag: 4
    complexity:
      n_values: [2, 3, 4, 5, 6, 7, 8, 9, 10]
      m: 3
      n0: 1
      n_dest: 2
      n_q: 10
      n_p: 10

Errors name the file and line of the offending entry.
"""

import dataclasses
from dataclasses import dataclass, field

import yaml

from .exceptions import ConfigError, ValidationError
from .sim import BER_DESIGNS, SimConfig

__all__ = ["RunConfig", "load_config", "parse_config", "dump_config"]


@dataclass(frozen=True)
class DesignSection:
    snr_db: float = 10.0
    constraint: str = "global"
    iterations: int = 2
    solver: str = "qr"


@dataclass(frozen=True)
class SimulationSection:
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    packets: int = 200
    symbols: int = 1500
    designs: tuple = BER_DESIGNS


@dataclass(frozen=True)
class FeedbackSection:
    model: str = "perfect"
    pe: float = 1e-3
    bits_real: int = 4
    bits_imag: int = 4


@dataclass(frozen=True)
class ComplexitySection:
    n_values: tuple = tuple(range(2, 11))
    m: int = 3
    n0: int = 1
    n_dest: int = 2
    n_q: int = 10
    n_p: int = 10


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    threads: int = 1
    node_counts: tuple = (1, 4, 4, 2)
    total_power: float = 8.0
    design: DesignSection = field(default_factory=DesignSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    feedback: FeedbackSection = field(default_factory=FeedbackSection)
    complexity: ComplexitySection = field(default_factory=ComplexitySection)

    def sim_config(self, **overrides):
        cfg = SimConfig(
            node_counts=self.node_counts,
            total_power=self.total_power,
            snr_db=self.simulation.snr_db,
            packets=self.simulation.packets,
            symbols=self.simulation.symbols,
            designs=self.simulation.designs,
            iterations=self.design.iterations,
            solver=self.design.solver,
            feedback=self.feedback.model,
            pe=self.feedback.pe,
            bits_real=self.feedback.bits_real,
            bits_imag=self.feedback.bits_imag,
            seed=self.seed,
            threads=self.threads,
        )
        return cfg.with_(**overrides) if overrides else cfg

    def to_dict(self):
        return {
            "seed": self.seed,
            "threads": self.threads,
            "topology": {"node_counts": list(self.node_counts)},
            "power": {"total": self.total_power},
            "design": dataclasses.asdict(self.design),
            "simulation": {
                "snr_db": list(self.simulation.snr_db),
                "packets": self.simulation.packets,
                "symbols": self.simulation.symbols,
                "designs": list(self.simulation.designs),
            },
            "feedback": dataclasses.asdict(self.feedback),
            "complexity": {
                **dataclasses.asdict(self.complexity),
                "n_values": list(self.complexity.n_values),
            },
        }

    def replace(self, section=None, **changes):
        if section is None:
            return dataclasses.replace(self, **changes)
        return dataclasses.replace(
            self, **{section: dataclasses.replace(getattr(self, section), **changes)}
        )


# -- parsing --------------------------------------------------------------------


class _Parser:
    def __init__(self, source):
        self.source = source

    def fail(self, node, message):
        line = node.start_mark.line + 1 if node is not None else None
        raise ConfigError(message, line=line, source=self.source)

    def mapping(self, node, what, allowed):
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"{what} must be a mapping")
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key not in allowed:
                self.fail(key_node, f"unknown key {key!r} in {what}; allowed: {', '.join(allowed)}")
            if key in out:
                self.fail(key_node, f"duplicate key {key!r} in {what}")
            out[key] = value_node
        return out

    def scalar(self, node, name):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, f"{name} must be a scalar")
        return yaml.safe_load(yaml.serialize(node))

    def integer(self, node, name, minimum=None):
        val = self.scalar(node, name)
        if isinstance(val, bool) or not isinstance(val, int):
            self.fail(node, f"{name} must be an integer, got {val!r}")
        if minimum is not None and val < minimum:
            self.fail(node, f"{name} must be >= {minimum}, got {val}")
        return val

    def number(self, node, name, positive=False):
        val = self.scalar(node, name)
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(node, f"{name} must be a number, got {val!r}")
        if positive and not val > 0:
            self.fail(node, f"{name} must be positive, got {val}")
        return float(val)

    def choice(self, node, name, choices):
        val = self.scalar(node, name)
        if val not in choices:
            self.fail(node, f"{name} must be one of {', '.join(choices)}, got {val!r}")
        return val

    def sequence(self, node, name, item):
        if not isinstance(node, yaml.SequenceNode) or not node.value:
            self.fail(node, f"{name} must be a non-empty list")
        return tuple(item(n, f"{name} entry") for n in node.value)


_TOP_KEYS = ("seed", "threads", "topology", "power", "design", "simulation", "feedback", "complexity")


def parse_config(text, source="<config>"):
    """Parse config text into a :class:`RunConfig`; raises :class:`ConfigError`."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"invalid YAML: {problem}", line=line, source=source) from None
    cfg = RunConfig()
    if root is None:
        return cfg
    p = _Parser(source)
    top = p.mapping(root, "config", _TOP_KEYS)
    changes = {}
    if "seed" in top:
        changes["seed"] = p.integer(top["seed"], "seed", 0)
    if "threads" in top:
        changes["threads"] = p.integer(top["threads"], "threads", 1)
    if "topology" in top:
        sec = p.mapping(top["topology"], "topology", ("node_counts",))
        if "node_counts" in sec:
            node = sec["node_counts"]
            counts = p.sequence(node, "node_counts", lambda n, w: p.integer(n, w, 1))
            if len(counts) < 3:
                p.fail(node, "node_counts needs at least three entries (two hops)")
            changes["node_counts"] = counts
    if "power" in top:
        sec = p.mapping(top["power"], "power", ("total",))
        if "total" in sec:
            changes["total_power"] = p.number(sec["total"], "power.total", positive=True)
    cfg = dataclasses.replace(cfg, **changes)

    if "design" in top:
        sec = p.mapping(top["design"], "design", ("snr_db", "constraint", "iterations", "solver"))
        vals = {}
        if "snr_db" in sec:
            vals["snr_db"] = p.number(sec["snr_db"], "design.snr_db")
        if "constraint" in sec:
            vals["constraint"] = p.choice(
                sec["constraint"], "design.constraint", ("global", "local", "individual")
            )
        if "iterations" in sec:
            vals["iterations"] = p.integer(sec["iterations"], "design.iterations", 1)
        if "solver" in sec:
            vals["solver"] = p.choice(sec["solver"], "design.solver", ("qr", "power"))
        cfg = cfg.replace("design", **vals)
    if "simulation" in top:
        sec = p.mapping(top["simulation"], "simulation", ("snr_db", "packets", "symbols", "designs"))
        vals = {}
        if "snr_db" in sec:
            vals["snr_db"] = p.sequence(sec["snr_db"], "simulation.snr_db", p.number)
        if "packets" in sec:
            vals["packets"] = p.integer(sec["packets"], "simulation.packets", 1)
        if "symbols" in sec:
            vals["symbols"] = p.integer(sec["symbols"], "simulation.symbols", 1)
        if "designs" in sec:
            vals["designs"] = p.sequence(
                sec["designs"], "simulation.designs", lambda n, w: p.choice(n, w, BER_DESIGNS)
            )
        cfg = cfg.replace("simulation", **vals)
    if "feedback" in top:
        sec = p.mapping(top["feedback"], "feedback", ("model", "pe", "bits_real", "bits_imag"))
        vals = {}
        if "model" in sec:
            vals["model"] = p.choice(sec["model"], "feedback.model", ("perfect", "bsc"))
        if "pe" in sec:
            pe = p.number(sec["pe"], "feedback.pe")
            if not 0.0 <= pe <= 0.5:
                p.fail(sec["pe"], f"feedback.pe must lie in [0, 0.5], got {pe}")
            vals["pe"] = pe
        for key in ("bits_real", "bits_imag"):
            if key in sec:
                vals[key] = p.integer(sec[key], f"feedback.{key}", 1)
        cfg = cfg.replace("feedback", **vals)
    if "complexity" in top:
        keys = ("n_values", "m", "n0", "n_dest", "n_q", "n_p")
        sec = p.mapping(top["complexity"], "complexity", keys)
        vals = {}
        if "n_values" in sec:
            vals["n_values"] = p.sequence(
                sec["n_values"], "complexity.n_values", lambda n, w: p.integer(n, w, 1)
            )
        if "m" in sec:
            vals["m"] = p.integer(sec["m"], "complexity.m", 2)
        for key in ("n0", "n_dest", "n_q", "n_p"):
            if key in sec:
                vals[key] = p.integer(sec[key], f"complexity.{key}", 1)
        cfg = cfg.replace("complexity", **vals)

    try:
        cfg.sim_config()
    except ValidationError as exc:
        raise ConfigError(str(exc), source=source) from None
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_config(text, source=str(path))


def dump_config(cfg):
    """YAML text that parses back to ``cfg``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
