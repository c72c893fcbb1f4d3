"""Plain-text case and campaign configuration files.

The format is INI with optional top-level keys before the first section::

    preset = pedrosa-28d
    i_a_uA_cm2 = 10

    [geometry]
    cover = 0.02

    [solver]
    t_cor_end = 8e-6

Top-level keys: ``preset``, ``i_a`` (A/m2) and ``i_a_uA_cm2``.  Sections
map onto the dataclass fields listed in :data:`SECTIONS`; every value is SI
except keys ending in ``_uA_cm2``.  Unknown sections or keys are errors.
Anything left out is taken from the preset and the class defaults.
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .chemistry import UA_CM2, ChemistryConstants
from .errors import ConfigError, CorroCrackError
from .mechanics import MATERIAL_PRESETS, MaterialSet
from .mesh import SpecimenGeometry
from .solver import CaseConfig
from .transport import TransportProps

DEFAULT_PRESET = "pedrosa-28d"
TOP = "__top__"
THICK_COVER = 0.03           # covers above this default to the longer run
T_COR_END_THIN = 8e-6
T_COR_END_THICK = 12e-6

SOLVER_KEYS = ("t_cor_end", "t_end", "dt_init", "dt_min", "dt_max", "dtcor_init", "dtcor_min",
               "dtcor_max", "h_fine", "h_coarse", "dphi_max", "dtheta_max", "grow_after",
               "grow_factor", "max_steps", "record_every", "residual_stiffness", "w_min",
               "rust_contact", "phi_predictor", "deterministic")

SECTIONS = {
    "geometry": [f.name for f in fields(SpecimenGeometry)],
    "concrete": ["E_c", "nu_c", "f_t", "G_f", "ell"],
    "rust": ["E_r", "nu_r", "kappa_override"],
    "chemistry": [f.name for f in fields(ChemistryConstants)] + [f.name for f in fields(TransportProps)],
    "solver": list(SOLVER_KEYS),
    "campaign": ["i_a", "i_a_uA_cm2", "jobs", "i_ref", "i_ref_uA_cm2"],
}
TOP_KEYS = ("preset", "i_a", "i_a_uA_cm2")


@dataclass(frozen=True)
class CampaignConfig:
    """A base case swept over several current densities.

    ``i_a`` is normalised to a sorted tuple of distinct positive values in A/m2.
    """

    base: CaseConfig
    i_a: tuple
    jobs: int = 0            # 0: number of cases capped at the hardware threads
    i_ref: float = UA_CM2
    out_dir: Optional[str] = None

    def __post_init__(self):
        vals = tuple(sorted(set(float(v) for v in self.i_a)))
        if not vals:
            raise ConfigError("campaign.i_a: at least one current density is required")
        if vals[0] <= 0.0:
            raise ConfigError("campaign.i_a: current densities must be > 0")
        if self.jobs < 0:
            raise ConfigError("campaign.jobs must be >= 0")
        if not self.i_ref > 0.0:
            raise ConfigError("campaign.i_ref must be > 0")
        object.__setattr__(self, "i_a", vals)

    def effective_jobs(self) -> int:
        cap = os.cpu_count() or 1
        env = os.environ.get("CORROCRACK_THREADS")
        if env:
            try:
                cap = max(1, min(cap, int(env)))
            except ValueError:
                raise ConfigError("CORROCRACK_THREADS must be an integer") from None
        want = self.jobs or len(self.i_a)
        return max(1, min(want, cap, len(self.i_a)))

    def cases(self) -> list:
        return [self.base.with_(i_a=i) for i in self.i_a]


# -- value conversion ----------------------------------------------------
def _number(key: str, text: str, kind=float):
    t = text.strip()
    if t.lower() in ("none", ""):
        return None
    try:
        if kind is int:
            v = float(t)
            if v != int(v):
                raise ValueError
            return int(v)
        v = float(t)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite")
    return v


def _boolean(key: str, text: str) -> bool:
    states = configparser.ConfigParser.BOOLEAN_STATES
    if text.strip().lower() not in states:
        raise ConfigError(f"{key}: cannot parse {text!r} as a boolean")
    return states[text.strip().lower()]


def _list(key: str, text: str) -> list:
    parts = [p for p in text.replace(",", " ").split() if p]
    return [_number(key, p) for p in parts]


def _convert(dc_type, section: str, name: str, text: str):
    key = f"{section}.{name}"
    f = {f.name: f for f in fields(dc_type)}[name]
    ann = str(f.type)
    if "bool" in ann:
        return _boolean(key, text)
    if "str" in ann:
        return text.strip()
    if "int" in ann and "float" not in ann:
        return _number(key, text, int)
    return _number(key, text)


def _build(dc_type, base, section: str, items: dict, allowed: Sequence[str]):
    """``replace`` ``base`` with the converted ``items`` that belong to ``dc_type``."""
    own = {f.name for f in fields(dc_type)}
    kw = {k: _convert(dc_type, section, k, v) for k, v in items.items() if k in own and k in allowed}
    if not kw:
        return base
    try:
        if dc_type is ChemistryConstants and not ({"rho_o", "rho_h"} & kw.keys()):
            return base.with_(**kw)
        return replace(base, **kw)
    except ConfigError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _read(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__defaults_unused__")
    cp.optionxform = str     # keys are case sensitive
    try:
        cp.read_string(f"[{TOP}]\n" + text, source=source)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        msg = getattr(exc, "message", str(exc)).splitlines()[0]
        if isinstance(exc, configparser.ParsingError) and exc.errors:
            lineno, line = exc.errors[0]
            msg = f"cannot parse {line}"
        where = f" at line {lineno - 1}" if lineno else ""
        raise ConfigError(f"{source}: syntax error{where}: {msg}") from None
    return cp


def parse_config_text(text: str, source: str = "<string>") -> Union[CaseConfig, CampaignConfig]:
    """Parse configuration text; see the module docstring for the format."""
    cp = _read(text, source)
    for sec in cp.sections():
        if sec != TOP and sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        allowed = TOP_KEYS if sec == TOP else SECTIONS[sec]
        for key in cp[sec]:
            if key not in allowed:
                where = "top level" if sec == TOP else f"[{sec}]"
                raise ConfigError(f"unknown key {key!r} in {where}")
    top = dict(cp[TOP]) if cp.has_section(TOP) else {}
    sec = {s: dict(cp[s]) if cp.has_section(s) else {} for s in SECTIONS}

    preset = top.get("preset", DEFAULT_PRESET).strip().strip('"').strip("'")
    if preset not in MATERIAL_PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(MATERIAL_PRESETS)}")
    mat = _build(MaterialSet, MATERIAL_PRESETS[preset], "concrete", sec["concrete"], SECTIONS["concrete"])
    mat = _build(MaterialSet, mat, "rust", sec["rust"], SECTIONS["rust"])
    geom = _build(SpecimenGeometry, SpecimenGeometry(), "geometry", sec["geometry"], SECTIONS["geometry"])
    chem = _build(ChemistryConstants, ChemistryConstants(), "chemistry", sec["chemistry"], SECTIONS["chemistry"])
    trans = _build(TransportProps, TransportProps(), "chemistry", sec["chemistry"], SECTIONS["chemistry"])

    if "i_a" in top and "i_a_uA_cm2" in top:
        raise ConfigError("i_a: give either i_a or i_a_uA_cm2, not both")
    i_a = None
    if "i_a" in top:
        i_a = _number("i_a", top["i_a"])
    elif "i_a_uA_cm2" in top:
        v = _number("i_a_uA_cm2", top["i_a_uA_cm2"])
        i_a = None if v is None else v * UA_CM2

    kw = {}
    for k, v in sec["solver"].items():
        kw[k] = _convert(CaseConfig, "solver", k, v)
    if "kappa_override" in sec["rust"]:
        kw["kappa_override"] = _number("rust.kappa_override", sec["rust"]["kappa_override"])
    if kw.get("t_cor_end") is None and kw.get("t_end") is None:
        kw["t_cor_end"] = T_COR_END_THICK if geom.cover > THICK_COVER else T_COR_END_THIN
        kw.pop("t_end", None)

    camp = sec["campaign"]
    if camp and i_a is None:
        i_a = UA_CM2       # placeholder for the base case, replaced per campaign case
    if i_a is None:
        raise ConfigError("i_a: a current density (i_a or i_a_uA_cm2) is required")
    try:
        cfg = CaseConfig(geometry=geom, materials=replace(mat), chemistry=chem, transport=trans,
                         i_a=i_a, **kw)
    except ConfigError as exc:
        raise ConfigError(f"[solver] {exc}") from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if not camp:
        return cfg

    if "i_a" in camp and "i_a_uA_cm2" in camp:
        raise ConfigError("campaign.i_a: give either i_a or i_a_uA_cm2, not both")
    if "i_a" in camp:
        values = _list("campaign.i_a", camp["i_a"])
    elif "i_a_uA_cm2" in camp:
        values = [v * UA_CM2 for v in _list("campaign.i_a_uA_cm2", camp["i_a_uA_cm2"])]
    else:
        values = [cfg.i_a]
    if any(v is None for v in values):
        raise ConfigError("campaign.i_a: empty entry")
    i_ref = UA_CM2
    if "i_ref" in camp:
        i_ref = _number("campaign.i_ref", camp["i_ref"])
    elif "i_ref_uA_cm2" in camp:
        i_ref = _number("campaign.i_ref_uA_cm2", camp["i_ref_uA_cm2"]) * UA_CM2
    jobs = _number("campaign.jobs", camp["jobs"], int) if "jobs" in camp else 0
    return CampaignConfig(cfg, tuple(values), jobs or 0, i_ref)


def parse_config(path) -> Union[CaseConfig, CampaignConfig]:
    """Read and parse a configuration file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
    return parse_config_text(text, str(p))


# -- emission ------------------------------------------------------------
def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg: Union[CaseConfig, CampaignConfig]) -> str:
    """Complete configuration text that parses back to an equal object."""
    camp = cfg if isinstance(cfg, CampaignConfig) else None
    case = camp.base if camp else cfg
    preset = next((k for k, m in MATERIAL_PRESETS.items() if m == case.materials), DEFAULT_PRESET)
    out = [f"preset = {preset}", f"i_a = {_fmt(case.i_a)}", ""]

    def section(name, pairs):
        out.append(f"[{name}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in pairs)
        out.append("")

    section("geometry", [(k, getattr(case.geometry, k)) for k in SECTIONS["geometry"]])
    section("concrete", [(k, getattr(case.materials, k)) for k in SECTIONS["concrete"]])
    section("rust", [("E_r", case.materials.E_r), ("nu_r", case.materials.nu_r),
                     ("kappa_override", case.kappa_override)])
    section("chemistry", [(f.name, getattr(case.chemistry, f.name)) for f in fields(ChemistryConstants)]
            + [(f.name, getattr(case.transport, f.name)) for f in fields(TransportProps)])
    section("solver", [(k, getattr(case, k)) for k in SOLVER_KEYS])
    if camp:
        section("campaign", [("i_a", " ".join(_fmt(v) for v in camp.i_a)),
                             ("jobs", camp.jobs), ("i_ref", camp.i_ref)])
    return "\n".join(out)


def load_any(path) -> Union[CaseConfig, CampaignConfig]:
    """:func:`parse_config` that also accepts an already parsed object."""
    if isinstance(path, (CaseConfig, CampaignConfig)):
        return path
    try:
        return parse_config(path)
    except CorroCrackError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
