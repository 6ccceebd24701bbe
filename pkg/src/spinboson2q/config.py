"""Model configuration: dataclasses, regime presets and strict INI parsing.

A configuration fully determines a run: qubit energies and tunnelings, the
exchange coupling, two bath specifications, the initial state, the backend
selection and the numerical block.  Parsing is strict -- unknown sections
or keys are errors, presets never silently override explicit keys
(explicit wins and the override is logged).
"""

import configparser
import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .bath import BathSpec
from .qops import validate_density_matrix

log = logging.getLogger("spinboson2q")


class ConfigError(ValueError):
    """Structured configuration failure; message carries the key path."""


@dataclass(frozen=True)
class NumericsConfig:
    n_exp: int = 4
    scheme: str = "pade"
    depth: int = 6
    fock: int = 8
    fock2: int = 0  # 0 means "same as fock"
    rtol: float = 1e-8
    atol: float = 1e-10
    rcm_tol: float = 1e-10
    rcm_method: str = "krylov"
    freq_factor: float = 20.0
    scaled: bool = False
    max_bytes: int = 2**32
    steady_method: str = "auto"
    steady_depth: int = 0  # 0 means "same as depth"
    validate_bath: bool = True

    def __post_init__(self):
        if self.n_exp < 0:
            raise ConfigError("numerics.n_exp must be >= 0")
        if self.scheme not in ("pade", "matsubara"):
            raise ConfigError(f"numerics.scheme must be pade|matsubara, got {self.scheme}")
        if self.depth < 0:
            raise ConfigError("numerics.depth must be >= 0")
        if self.fock < 2:
            raise ConfigError("numerics.fock must be >= 2")
        if self.rcm_method not in ("krylov", "rk45"):
            raise ConfigError("numerics.rcm_method must be krylov|rk45")
        if self.steady_method not in ("auto", "direct", "iterative"):
            raise ConfigError("numerics.steady_method must be auto|direct|iterative")
        for name in ("rtol", "atol", "rcm_tol", "freq_factor"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"numerics.{name} must be a positive finite number")


INITIAL_STATES = ("ground", "excited", "plusplus", "custom")
METHODS = ("heom", "rcm", "both")


@dataclass(frozen=True)
class ModelConfig:
    eps1: float
    delta1: float
    eps2: float
    delta2: float
    coupling_j: float
    bath1: BathSpec
    bath2: BathSpec
    initial_state: str = "excited"
    custom_state: tuple = ()
    method: str = "heom"
    t_max: float = 30.0
    dt: float = 0.05
    numerics: NumericsConfig = field(default_factory=NumericsConfig)

    def __post_init__(self):
        for name in ("eps1", "delta1", "eps2", "delta2", "coupling_j", "t_max", "dt"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigError(f"system.{name} must be finite, got {v}")
        if self.t_max <= 0 or self.dt <= 0:
            raise ConfigError("run.t_max and run.dt must be positive")
        if self.initial_state not in INITIAL_STATES:
            raise ConfigError(
                f"initial_state must be one of {INITIAL_STATES}, got {self.initial_state}"
            )
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method}")
        if self.initial_state == "custom":
            mat = self.initial_matrix()
            try:
                validate_density_matrix(mat, herm_tol=1e-10)
            except ValueError as exc:
                raise ConfigError(f"system.custom_state: {exc}") from exc

    def initial_matrix(self):
        """The 4x4 initial density matrix selected by the config."""
        if self.initial_state == "excited":
            vec = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
        elif self.initial_state == "ground":
            vec = np.array([0.0, 0.0, 0.0, 1.0], dtype=complex)
        elif self.initial_state == "plusplus":
            vec = 0.5 * np.ones(4, dtype=complex)
        else:
            if len(self.custom_state) != 16:
                raise ConfigError(
                    "system.custom_state needs 16 comma-separated complex entries"
                )
            return np.array(self.custom_state, dtype=complex).reshape(4, 4)
        return np.outer(vec, vec.conj())

    @property
    def fock2(self):
        return self.numerics.fock2 or self.numerics.fock

    @property
    def steady_depth(self):
        return self.numerics.steady_depth or self.numerics.depth


# --- presets ----------------------------------------------------------------

_REGIME_BASE = dict(
    eps1=1.0, delta1=2.0, eps2=0.75, delta2=1.6,
    cutoff1=0.1, cutoff2=0.16, temp1=1.04, temp2=1.39,
)
_WEAK = 0.05 / math.pi
_STRONG = 2.5 / math.pi
_NESS_WEAK = 0.01 / math.pi
_NESS_STRONG = 1.5 / math.pi


def _regime(alpha, j):
    d = dict(_REGIME_BASE)
    d.update(alpha1=alpha, alpha2=alpha, coupling_j=j)
    return d


def _ness_regime(alpha, j):
    d = _regime(alpha, j)
    d.update(temp1=1.0, temp2=1.5)
    return d


PRESETS = {
    # dynamics regimes: qubit-bath / inter-qubit / qubit-bath coupling strengths
    "WWW": _regime(_WEAK, _WEAK),
    "SWS": _regime(_STRONG, _WEAK),
    "WSW": _regime(_WEAK, _STRONG),
    "SSS": _regime(_STRONG, _STRONG),
    # steady-state variants: softer couplings, cold side fixed at T=1
    "WWW-ness": _ness_regime(_NESS_WEAK, _NESS_WEAK),
    "SWS-ness": _ness_regime(_NESS_STRONG, _NESS_WEAK),
    "WSW-ness": _ness_regime(_NESS_WEAK, _NESS_STRONG),
    "SSS-ness": _ness_regime(_NESS_STRONG, _NESS_STRONG),
    # the cross-validation point: both backends on one easier parameter set
    "figure2": dict(
        eps1=0.5, delta1=1.0, eps2=0.4, delta2=1.0,
        coupling_j=0.1 / math.pi, alpha1=0.2 / math.pi, alpha2=0.2 / math.pi,
        cutoff1=0.05, cutoff2=0.1, temp1=1.04, temp2=1.39,
        initial_state="excited",
    ),
}

_SYSTEM_KEYS = {
    "eps1": float, "delta1": float, "eps2": float, "delta2": float,
    "coupling_j": float, "initial_state": str, "custom_state": str,
}
_BATH_KEYS = {"coupling": float, "cutoff": float, "temperature": float}
_RUN_KEYS = {"method": str, "t_max": float, "dt": float}
_NUMERICS_KEYS = {
    "n_exp": int, "scheme": str, "depth": int, "fock": int, "fock2": int,
    "rtol": float, "atol": float, "rcm_tol": float, "rcm_method": str,
    "freq_factor": float, "scaled": bool, "max_bytes": int,
    "steady_method": str, "steady_depth": int, "validate_bath": bool,
}
_SECTIONS = {
    "system": _SYSTEM_KEYS,
    "bath1": _BATH_KEYS,
    "bath2": _BATH_KEYS,
    "run": _RUN_KEYS,
    "numerics": _NUMERICS_KEYS,
}


def _convert(section, key, raw):
    spec_map = _SECTIONS[section]
    if key not in spec_map:
        raise ConfigError(f"unknown key [{section}] {key}")
    typ = spec_map[key]
    try:
        if typ is bool:
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if typ is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("non-finite value")
            return v
        if typ is int:
            return int(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _preset_values(name):
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    p = PRESETS[name]
    values = {
        ("system", "eps1"): p["eps1"],
        ("system", "delta1"): p["delta1"],
        ("system", "eps2"): p["eps2"],
        ("system", "delta2"): p["delta2"],
        ("system", "coupling_j"): p["coupling_j"],
        ("bath1", "coupling"): p["alpha1"],
        ("bath1", "cutoff"): p["cutoff1"],
        ("bath1", "temperature"): p["temp1"],
        ("bath2", "coupling"): p["alpha2"],
        ("bath2", "cutoff"): p["cutoff2"],
        ("bath2", "temperature"): p["temp2"],
    }
    if "initial_state" in p:
        values[("system", "initial_state")] = p["initial_state"]
    return values


def _parse_custom_state(raw):
    try:
        entries = tuple(complex(tok.strip().replace("i", "j")) for tok in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"system.custom_state: {exc}") from exc
    return entries


def build_config(preset=None, ini_path=None, overrides=None):
    """Resolve a full ModelConfig from preset, INI file and overrides.

    Precedence (lowest to highest): preset values, INI file keys,
    ``overrides`` given as ``{"section.key": "value"}`` strings (the CLI's
    ``--set``).  Explicit keys shadowing a preset are logged.
    """
    resolved = {}
    preset_keys = set()
    if preset:
        resolved.update(_preset_values(preset))
        preset_keys = set(resolved)

    if ini_path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        read = parser.read(ini_path, encoding="utf-8")
        if not read:
            raise ConfigError(f"cannot read config file {ini_path}")
        for section in parser.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser.items(section):
                value = _convert(section, key, raw)
                if (section, key) in preset_keys:
                    log.info(
                        "config %s.%s=%r overrides preset %s", section, key, value, preset
                    )
                resolved[(section, key)] = value

    for spec, raw in (overrides or {}).items():
        if "." not in spec:
            raise ConfigError(f"override {spec!r} must look like section.key")
        section, key = spec.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in override {spec!r}")
        value = _convert(section, key, raw)
        if (section, key) in preset_keys:
            log.info("override %s.%s=%r shadows preset %s", section, key, value, preset)
        resolved[(section, key)] = value

    return _assemble(resolved)


def _require(resolved, section, key):
    try:
        return resolved[(section, key)]
    except KeyError:
        raise ConfigError(f"missing required key [{section}] {key}") from None


def _assemble(resolved):
    def get(section, key, default=None):
        return resolved.get((section, key), default)

    num_kwargs = {}
    for key in _NUMERICS_KEYS:
        val = get("numerics", key)
        if val is not None:
            num_kwargs[key] = val
    numerics = NumericsConfig(**num_kwargs)

    custom_raw = get("system", "custom_state")
    custom = _parse_custom_state(custom_raw) if custom_raw else ()

    try:
        bath1 = BathSpec(
            coupling=_require(resolved, "bath1", "coupling"),
            cutoff=_require(resolved, "bath1", "cutoff"),
            temperature=_require(resolved, "bath1", "temperature"),
        )
        bath2 = BathSpec(
            coupling=_require(resolved, "bath2", "coupling"),
            cutoff=_require(resolved, "bath2", "cutoff"),
            temperature=_require(resolved, "bath2", "temperature"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return ModelConfig(
        eps1=_require(resolved, "system", "eps1"),
        delta1=_require(resolved, "system", "delta1"),
        eps2=_require(resolved, "system", "eps2"),
        delta2=_require(resolved, "system", "delta2"),
        coupling_j=_require(resolved, "system", "coupling_j"),
        bath1=bath1,
        bath2=bath2,
        initial_state=get("system", "initial_state", "excited"),
        custom_state=custom,
        method=get("run", "method", "heom"),
        t_max=get("run", "t_max", 30.0),
        dt=get("run", "dt", 0.05),
        numerics=numerics,
    )


def config_to_dict(cfg: ModelConfig):
    """Flat JSON-friendly snapshot, sufficient to rebuild the config."""
    out = {
        "system": {
            "eps1": cfg.eps1, "delta1": cfg.delta1,
            "eps2": cfg.eps2, "delta2": cfg.delta2,
            "coupling_j": cfg.coupling_j,
            "initial_state": cfg.initial_state,
        },
        "bath1": {
            "coupling": cfg.bath1.coupling, "cutoff": cfg.bath1.cutoff,
            "temperature": cfg.bath1.temperature,
        },
        "bath2": {
            "coupling": cfg.bath2.coupling, "cutoff": cfg.bath2.cutoff,
            "temperature": cfg.bath2.temperature,
        },
        "run": {"method": cfg.method, "t_max": cfg.t_max, "dt": cfg.dt},
        "numerics": {
            f.name: getattr(cfg.numerics, f.name) for f in fields(NumericsConfig)
        },
    }
    if cfg.initial_state == "custom":
        out["system"]["custom_state"] = ",".join(
            f"{z.real:.17g}{z.imag:+.17g}j" for z in cfg.custom_state
        )
    return out


def config_from_dict(data):
    """Rebuild a ModelConfig from a RunRecord snapshot."""
    resolved = {}
    for section, kv in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in record")
        for key, value in kv.items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key [{section}] {key} in record")
            resolved[(section, key)] = (
                _convert(section, key, value) if isinstance(value, str) else value
            )
    return _assemble(resolved)


def with_updates(cfg: ModelConfig, **kwargs):
    """Functional update helper used by sweeps (axis values, numerics)."""
    num_updates = {k[4:]: v for k, v in kwargs.items() if k.startswith("num_")}
    plain = {k: v for k, v in kwargs.items() if not k.startswith("num_")}
    if num_updates:
        plain["numerics"] = replace(cfg.numerics, **num_updates)
    return replace(cfg, **plain)
