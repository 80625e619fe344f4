"""TOML run configuration, validation and run manifests."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields

import tomlkit
from tomlkit.exceptions import ParseError as _TomlParseError

from .errors import JumpCtlError
from .simulate import SCHEMES


class ParseError(JumpCtlError):
    def __init__(self, message, line=None, field=None):
        loc = f" (line {line})" if line else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.field = field


class ValidationError(JumpCtlError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class ModelSection:
    kind: str = "surplus"
    delta: float = 0.05
    beta: float = 1.0
    H: float = 1.0
    sigma: float = 0.2
    lam: float = 2.0
    mu: float = 0.0
    tau: float = 0.5
    a_max: float = 2.0
    x0: float = 0.0
    diffusion_approx: bool = True

    def surplus(self):
        from .insurance import SurplusModel

        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "kind"}
        return SurplusModel(**kw)


@dataclass(frozen=True)
class SimSection:
    T: float = 2.0
    dt: float = 0.01
    n_paths: int = 10_000
    seed: int = 0
    scheme: str = "direct_euler"


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple = ("csv", "json", "svg")


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    sim: SimSection = field(default_factory=SimSection)
    experiment: dict = field(default_factory=dict)
    output: OutputSection = field(default_factory=OutputSection)

    def sim_config(self, **overrides):
        from .simulate import SimConfig

        m = self.model.surplus()
        kw = dict(T=self.sim.T, dt=self.sim.dt, n_paths=self.sim.n_paths, seed=self.sim.seed,
                  sigma=m.sim_sigma, scheme=self.sim.scheme)
        kw.update(overrides)
        return SimConfig(**kw)


EXPERIMENT_KEYS = {
    "axis": str, "values": list, "policies": list, "convention": str, "n_values": list,
    "outer_paths": int, "inner_paths": int, "times": list, "band": float, "beta_n": int,
    "beta_t": float, "n_mc": int, "inner_dt": float,
}
MODEL_KINDS = ("surplus",)
FORMATS = ("csv", "json", "svg")
_SECTIONS = {"model": ModelSection, "sim": SimSection, "output": OutputSection}


def _line_of(text: str, key: str):
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line) or re.match(rf"\s*\[{re.escape(key)}\]", line):
            return i
    return None


def _coerce(section: str, name: str, typ, value, text: str):
    line = _line_of(text, name)
    where = f"{section}.{name}"
    if typ is bool:
        if not isinstance(value, bool):
            raise ParseError(f"{where} must be a boolean", line, where)
        return bool(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{where} must be an integer", line, where)
        return int(value)
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{where} must be a number", line, where)
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ParseError(f"{where} must be a string", line, where)
        return str(value)
    if typ in (list, tuple):
        if not isinstance(value, list):
            raise ParseError(f"{where} must be an array", line, where)
        return tuple(_plain(v) for v in value)
    raise ParseError(f"{where}: unsupported type", line, where)


def _plain(v):
    if isinstance(v, bool):
        return bool(v)
    if isinstance(v, int):
        return int(v)
    if isinstance(v, float):
        return float(v)
    if isinstance(v, str):
        return str(v)
    if isinstance(v, list):
        return tuple(_plain(u) for u in v)
    return v


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        doc = tomlkit.parse(text)
    except _TomlParseError as exc:
        raise ParseError(str(exc), getattr(exc, "line", None)) from None
    data = doc.unwrap()
    unknown = set(data) - set(_SECTIONS) - {"experiment"}
    if unknown:
        key = sorted(unknown)[0]
        raise ParseError(f"unknown section {key!r}", _line_of(text, key), key)
    built = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ParseError(f"{name} must be a table", _line_of(text, name), name)
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, value in raw.items():
            if key not in types:
                raise ParseError(f"unknown key {name}.{key}", _line_of(text, key), f"{name}.{key}")
            kw[key] = _coerce(name, key, _type_of(types[key]), value, text)
        built[name] = cls(**kw)
    exp = {}
    for key, value in data.get("experiment", {}).items():
        if key not in EXPERIMENT_KEYS:
            raise ParseError(f"unknown key experiment.{key}", _line_of(text, key), f"experiment.{key}")
        exp[key] = _coerce("experiment", key, EXPERIMENT_KEYS[key], value, text)
    cfg = RunConfig(built["model"], built["sim"], exp, built["output"])
    validate(cfg)
    return cfg


def _type_of(annotation):
    return {"float": float, "int": int, "str": str, "bool": bool, "tuple": tuple}.get(str(annotation), annotation)


def validate(cfg: RunConfig) -> None:
    """Raise ``ValidationError`` naming the first violated invariant."""
    s, m, o = cfg.sim, cfg.model, cfg.output
    checks = [
        (s.dt > 0, "dt > 0", "sim.dt"),
        (s.T > 0, "T > 0", "sim.T"),
        (s.dt <= s.T, "dt <= T", "sim.dt"),
        (s.n_paths >= 1, "n_paths >= 1", "sim.n_paths"),
        (0 <= s.seed < 2 ** 64, "0 <= seed < 2^64", "sim.seed"),
        (s.scheme in SCHEMES, f"scheme in {SCHEMES}", "sim.scheme"),
        (m.kind in MODEL_KINDS, f"kind in {MODEL_KINDS}", "model.kind"),
        (m.beta >= 0, "beta >= 0", "model.beta"),
        (m.H > 0, "H > 0", "model.H"),
        (m.a_max > 0, "a_max > 0", "model.a_max"),
        (m.lam >= 0, "lam >= 0", "model.lam"),
        (m.tau >= 0, "tau >= 0", "model.tau"),
        (m.sigma >= 0, "sigma >= 0", "model.sigma"),
        (all(f in FORMATS for f in o.formats), f"formats subset of {FORMATS}", "output.formats"),
    ]
    for ok, message, where in checks:
        if not ok:
            raise ValidationError(message, where)
    e = cfg.experiment
    if "axis" in e and e["axis"] not in ("T", "lambda", "tau"):
        raise ValidationError("axis in ('T', 'lambda', 'tau')", "experiment.axis")
    for key in ("outer_paths", "inner_paths", "n_mc", "beta_n"):
        if key in e and e[key] < 1:
            raise ValidationError(f"{key} >= 1", f"experiment.{key}")


def dump_config(cfg: RunConfig) -> str:
    """Canonical TOML text; ``parse_config(dump_config(c)) == c``."""
    doc = tomlkit.document()
    for name in ("model", "sim", "experiment", "output"):
        section = getattr(cfg, name)
        items = section if isinstance(section, dict) else asdict(section)
        table = tomlkit.table()
        for key in sorted(items) if isinstance(section, dict) else items:
            value = items[key]
            table.add(key, list(value) if isinstance(value, tuple) else value)
        doc.add(name, table)
    return tomlkit.dumps(doc)


def config_hash(cfg) -> str:
    """SHA-256 (first 16 hex digits) of the canonical text of a config."""
    text = dump_config(cfg) if isinstance(cfg, RunConfig) else str(cfg).replace("\r\n", "\n")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunManifest:
    config_hash: str
    version: str
    wall_time: float
    seeds: dict = field(default_factory=dict)
    command: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)
