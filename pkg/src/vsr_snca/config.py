"""Run configuration: INI sections with every constant defaulted.

A minimal file only needs the morphology, an NCA preset and a seed::

    [run]
    morphology = worm
    preset = ud
    seed = 1

Sections ``[nca]``, ``[es]``, ``[protocol]``, ``[material]`` and ``[sim]``
override individual values; with ``preset = custom`` the ``[nca]`` keys
define the controller from scratch.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields

from .assessment import TERRAIN_SUITES, LocomotionProtocol
from .errors import ConfigError, InvalidBody, InvalidProtocol, MalformedSpec
from .evolution import EsParams
from .morphology import MorphologyGrid, parse_morphology
from .nca import PRESETS, NcaConfig, genotype_length
from .neuro import ModelKind
from .physics import SimParams, VoxelMaterial

PRESET_NAMES = tuple(PRESETS) + ("custom",)


@dataclass(frozen=True)
class RunConfig:
    morphology: str = "worm"
    preset: str = "ud"
    nca: NcaConfig = field(default_factory=lambda: PRESETS["ud"])
    es: EsParams = field(default_factory=EsParams)
    protocol: LocomotionProtocol = field(default_factory=LocomotionProtocol)
    material: VoxelMaterial = field(default_factory=VoxelMaterial)
    sim: SimParams = field(default_factory=SimParams)
    terrain_suite: str = "v1"

    @property
    def grid(self) -> MorphologyGrid:
        return parse_morphology(self.morphology)

    @property
    def seed(self) -> int:
        return self.es.seed

    @property
    def genotype_length(self) -> int:
        return genotype_length(self.nca, self.grid)

    def with_overrides(self, seed: int | None = None, evals: int | None = None) -> "RunConfig":
        es = self.es
        try:
            if seed is not None:
                es = dataclasses.replace(es, seed=seed)
            if evals is not None:
                es = dataclasses.replace(es, n_evals=evals)
        except ValueError as exc:
            raise _as_config_error(exc, "es") from None
        return dataclasses.replace(self, es=es)


def _as_config_error(exc: Exception, section: str) -> ConfigError:
    if isinstance(exc, ConfigError):
        return exc
    msg = str(exc)
    key = section
    if msg.startswith(("material.", "es.", "nca.", "sim.", "protocol.")):
        key = msg.split()[0]
    return ConfigError(key, msg)


def _convert(parser: configparser.ConfigParser, section: str, key: str, kind):
    try:
        if kind is bool:
            return parser.getboolean(section, key)
        if kind is int:
            return parser.getint(section, key)
        if kind is float:
            return parser.getfloat(section, key)
        return parser.get(section, key).strip()
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}", f"cannot parse value: {exc}") from None


def _field_types(cls) -> dict:
    hints = {"bool": bool, "int": int, "float": float, "str": str}
    return {f.name: hints.get(f.type, str) if isinstance(f.type, str) else f.type
            for f in fields(cls)}


def _section_values(parser, section, cls, aliases=None) -> dict:
    if not parser.has_section(section):
        return {}
    types = _field_types(cls)
    aliases = aliases or {}
    out = {}
    for key in parser.options(section):
        name = aliases.get(key, key)
        if name not in types:
            raise ConfigError(f"{section}.{key}", f"unknown key; expected one of "
                              f"{sorted(set(types) | set(aliases))}")
        out[name] = _convert(parser, section, key, types[name])
    return out


_NCA_KEYS = {"uniform": bool, "directional": bool, "channels": int, "model": str}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("config", f"malformed config file: {exc}") from None

    known = {"run", "nca", "es", "protocol", "material", "sim", "manifest"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(section, f"unknown section [{section}]")

    run = {"morphology": "worm", "preset": "ud", "seed": "0", "terrain_suite": "v1"}
    if parser.has_section("run"):
        for key in parser.options("run"):
            if key not in run:
                raise ConfigError(f"run.{key}", f"unknown key; expected one of {sorted(run)}")
            run[key] = parser.get("run", key).strip()

    morphology = run["morphology"]
    try:
        parse_morphology(morphology)
    except (MalformedSpec, InvalidBody) as exc:
        raise ConfigError("run.morphology", str(exc)) from None

    preset = run["preset"]
    if preset not in PRESET_NAMES:
        raise ConfigError("run.preset", f"unknown preset {preset!r}; expected one of {PRESET_NAMES}")
    base = PRESETS.get(preset, NcaConfig())
    nca_kw = {"uniform": base.uniform, "directional": base.directional, "n_c": base.n_c,
              "model": base.model.value}
    if parser.has_section("nca"):
        for key in parser.options("nca"):
            if key not in _NCA_KEYS:
                raise ConfigError(f"nca.{key}", f"unknown key; expected one of {sorted(_NCA_KEYS)}")
            value = _convert(parser, "nca", key, _NCA_KEYS[key])
            nca_kw["n_c" if key == "channels" else key] = value
    if nca_kw["model"] not in [m.value for m in ModelKind]:
        raise ConfigError("nca.model", f"unknown model {nca_kw['model']!r}; "
                          f"expected one of {[m.value for m in ModelKind]}")
    nca = NcaConfig(**nca_kw)

    try:
        seed = int(run["seed"])
    except ValueError:
        raise ConfigError("run.seed", f"not an integer: {run['seed']!r}") from None
    es_kw = _section_values(parser, "es", EsParams)
    es_kw.pop("seed", None)
    try:
        es = EsParams(seed=seed, **es_kw)
    except ConfigError as exc:
        if exc.key == "es.seed":
            raise ConfigError("run.seed", exc.message) from None
        raise

    try:
        protocol = LocomotionProtocol(**_section_values(parser, "protocol", LocomotionProtocol))
    except InvalidProtocol as exc:
        raise ConfigError("protocol", str(exc)) from None
    try:
        material = VoxelMaterial(**_section_values(parser, "material", VoxelMaterial))
    except ValueError as exc:
        raise _as_config_error(exc, "material") from None
    sim_kw = _section_values(parser, "sim", SimParams)
    if "control_hz" in sim_kw:
        raise ConfigError("sim.control_hz", "set the control rate in [protocol] control_hz")
    sim = SimParams(control_hz=protocol.control_hz, **sim_kw)
    if sim.substeps < 1:
        raise ConfigError("sim.substeps", "must be >= 1")

    suite = run["terrain_suite"]
    if suite not in TERRAIN_SUITES:
        raise ConfigError("run.terrain_suite", f"unknown suite {suite!r}; known: {sorted(TERRAIN_SUITES)}")
    return RunConfig(morphology=morphology, preset=preset, nca=nca, es=es, protocol=protocol,
                     material=material, sim=sim, terrain_suite=suite)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_sections(cfg: RunConfig) -> dict[str, dict[str, str]]:
    """Fully resolved config as INI sections; re-parsing reproduces ``cfg``."""
    nca = cfg.nca
    out = {
        "run": {"morphology": cfg.morphology, "preset": cfg.preset, "seed": str(cfg.es.seed),
                "terrain_suite": cfg.terrain_suite},
        "nca": {"uniform": _fmt(nca.uniform), "directional": _fmt(nca.directional),
                "channels": str(nca.n_c), "model": nca.model.value},
        "es": {"n_pop": str(cfg.es.n_pop), "n_evals": str(cfg.es.n_evals),
               "sigma": _fmt(cfg.es.sigma)},
        "protocol": {f.name: _fmt(getattr(cfg.protocol, f.name)) for f in fields(cfg.protocol)},
        "material": {f.name: _fmt(getattr(cfg.material, f.name)) for f in fields(cfg.material)},
        "sim": {f.name: _fmt(getattr(cfg.sim, f.name)) for f in fields(cfg.sim)
                if f.name != "control_hz"},
    }
    return out
