"""Flat ``key = value`` run configuration and its reproducibility manifest.

Frequencies accept the suffixes ``GHz``, ``MHz`` and ``kHz`` (internal unit:
MHz-scale angular frequency, so only the scaling matters), or a multiple of an
already given frequency, e.g. ``params.kappa = 0.5 j_r``. Times accept a
``/kappa`` suffix. Angles accept ``pi`` forms such as ``pi/2`` or ``0.25 pi``.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..models import HamiltonianKind, ModelParams
from ..solver import METHODS, IntegratorConfig

SCENARIOS = (
    "fig1_trajectory",
    "fig2_qnd_sweep",
    "fig3_snr_sweep",
    "fig4_qnd_sweep_wide",
    "fig5_snr_sweep_wide",
    "transverse_rabi",
    "dispersive_compare",
    "custom",
)
SWEEP_SCENARIOS = SCENARIOS[1:5]
UNITS = {"ghz": 1e3, "mhz": 1.0, "khz": 1e-3}
FREQUENCY_KEYS = ("omega_c", "delta_h", "j0", "j_r", "kappa", "omega_d", "drive_E")
QUANTITIES = ("qnd", "snr")
NOISE_MODELS = ("regression", "coherent", "double_integral")
FORMATS = ("csv", "gnuplot")


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class SweepSpec:
    delta_h_min: float = 0.0
    delta_h_max: float = 250.0
    points: int = 51
    taus: tuple[float, ...] = (1.0, 2.0)  # multiples of 1/kappa
    quantities: tuple[str, ...] = ("qnd",)


@dataclass(frozen=True)
class ConvergenceSpec:
    enabled: bool = True
    extra: int = 5
    tol: float = 1e-4


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    params: ModelParams
    kinds: tuple[HamiltonianKind, ...]
    integrator: IntegratorConfig = IntegratorConfig()
    fock_cutoff: int = 15
    output_dir: Path | None = None
    sweep: SweepSpec = SweepSpec()
    t_final: float | None = 16.0  # multiples of 1/kappa unless kappa = 0
    qubit: str = "plus"
    wigner_points: int = 81
    wigner_extent: float | None = None
    snr_taus: tuple[float, ...] = ()
    noise: str = "regression"
    outer_points: int = 200
    convergence: ConvergenceSpec = ConvergenceSpec()
    format: str = "csv"
    workers: int = 1
    seedless: bool = True

    @property
    def time_unit(self) -> float:
        """Physical time per unit of the ``/kappa`` time fields."""
        return 1 / self.params.kappa if self.params.kappa > 0 else 1.0

    @property
    def final_time(self) -> float:
        if self.t_final is None:
            # two vacuum-Rabi periods of the transverse exchange
            return 4 * math.pi / self.params.j_r
        return self.t_final * self.time_unit

    def with_overrides(self, **changes) -> RunConfig:
        return replace(self, **changes)


# -- scenario defaults (MHz-scale angular units) ---------------------------------------

_FIG2 = {"omega_c": 5000.0, "delta_h": 2500.0, "j_r": 50.0, "kappa": 25.0}
_FIG4 = {"omega_c": 5000.0, "delta_h": 2500.0, "j_r": 500.0, "kappa": 250.0}
K = HamiltonianKind
DEFAULTS: dict[str, dict] = {
    "fig1_trajectory": {
        "params": {"omega_c": 5000.0, "delta_h": 750.0, "j_r": 250.0, "kappa": 125.0},
        "kinds": (K.RotTwoToneExact, K.RotEffH0),
        "t_final": 16.0,
    },
    "fig2_qnd_sweep": {
        "params": _FIG2,
        "kinds": (K.RotTwoToneExact, K.RotSingleToneRwa),
        "sweep": SweepSpec(0.0, 250.0, 51, (2.0,), ("qnd",)),
    },
    "fig3_snr_sweep": {
        "params": _FIG2,
        "kinds": (K.RotTwoToneExact, K.RotSingleToneRwa),
        "sweep": SweepSpec(0.0, 250.0, 51, (2.0,), ("snr",)),
    },
    "fig4_qnd_sweep_wide": {
        "params": _FIG4,
        "kinds": (K.RotTwoToneExact, K.RotEffH0, K.RwaDeltaBranch, K.RwaCavityMinusDeltaBranch,
                  K.RwaCavityBranch, K.VanVleck),
        "sweep": SweepSpec(0.0, 5000.0, 51, (2.0,), ("qnd",)),
    },
    "fig5_snr_sweep_wide": {
        "params": _FIG4,
        "kinds": (K.RotTwoToneExact, K.RotEffH0, K.RwaDeltaBranch, K.RwaCavityMinusDeltaBranch,
                  K.RwaCavityBranch, K.VanVleck),
        "sweep": SweepSpec(0.0, 5000.0, 51, (1.0, 2.0), ("snr",)),
    },
    "transverse_rabi": {
        "params": {"omega_c": 1000.0, "delta_h": 100.0, "j_r": 10.0, "kappa": 0.0,
                   "omega_d": 900.0},
        "kinds": (K.RotSingleToneRwa, K.LabSingleTone),
        "qubit": "up",
        "t_final": None,
    },
    "dispersive_compare": {
        "params": _FIG2,
        "kinds": (K.RotEffH0, K.DispersiveDriven),
    },
    "custom": {},
}


# -- value parsing ---------------------------------------------------------------------

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"


def _number(text: str) -> float:
    if not re.fullmatch(_NUM, text.strip()):
        raise ValueError(f"not a number: {text!r}")
    return float(text)


def parse_frequency(text: str, known: dict[str, float] | None = None) -> float:
    """``'5 GHz'`` -> 5000.0; ``'0.5 j_r'`` -> 0.5 * known['j_r']."""
    s = text.strip()
    m = re.fullmatch(rf"({_NUM})?\s*\*?\s*([A-Za-z_]+)?", s)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ValueError(f"cannot parse frequency {text!r}")
    value = float(m.group(1)) if m.group(1) is not None else 1.0
    unit = m.group(2)
    if unit is None:
        return value
    if unit.lower() in UNITS:
        return value * UNITS[unit.lower()]
    if known is not None and unit in known:
        return value * known[unit]
    raise ValueError(f"unknown unit or reference {unit!r} in {text!r}")


def parse_time(text: str, kappa: float | None = None) -> float:
    """Time in units of ``1/kappa``: ``'2/kappa'`` -> 2; a bare number is absolute."""
    s = text.strip().replace(" ", "")
    if s.endswith("/kappa"):
        head = s[: -len("/kappa")]
        return _number(head) if head else 1.0
    t = _number(s)
    if kappa is None:
        raise ValueError("absolute times need params.kappa")
    return t * kappa if kappa > 0 else t


def parse_angle(text: str) -> float:
    s = text.strip().replace(" ", "")
    m = re.fullmatch(rf"({_NUM})?\*?pi(?:/({_NUM}))?", s)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / div
    if s in ("-pi",):
        return -math.pi
    return _number(s)


def _bool(text: str) -> bool:
    s = text.strip().lower()
    if s in ("true", "yes", "1", "on"):
        return True
    if s in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def read_pairs(text: str) -> list[tuple[int, str, str]]:
    pairs, seen = [], set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in seen:
            raise ConfigError("duplicate key", lineno, key)
        seen.add(key)
        pairs.append((lineno, key, value))
    return pairs


def parse_config(source) -> RunConfig:
    """Parse a config file path or text into a validated :class:`RunConfig`."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and "=" not in source):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    else:
        text = str(source)
    pairs = read_pairs(text)
    table = {k: (ln, v) for ln, k, v in pairs}
    if "scenario" not in table:
        raise ConfigError("missing required key", key="scenario")
    ln, scenario = table["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}", ln, "scenario")
    d = DEFAULTS[scenario]

    def fail(key, exc):
        raise ConfigError(str(exc), table[key][0], key) from None

    # params: defaults, then file values in file order so references resolve
    known = dict(d.get("params", {}))
    extra: dict[str, object] = {}
    for lineno, key, value in pairs:
        if not key.startswith("params."):
            continue
        name = key[len("params."):]
        try:
            if name in FREQUENCY_KEYS:
                known[name] = parse_frequency(value, known)
            elif name == "homodyne_phase":
                extra[name] = parse_angle(value)
            else:
                raise ValueError(f"unknown parameter {name!r}")
        except ValueError as exc:
            fail(key, exc)
    missing = [k for k in ("omega_c", "delta_h", "j_r", "kappa") if k not in known]
    if missing:
        raise ConfigError(f"scenario {scenario!r} needs params.{', params.'.join(missing)}")
    try:
        params = ModelParams(**known, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from None

    kw: dict[str, object] = {k: v for k, v in d.items() if k not in ("params", "sweep")}
    integ: dict[str, object] = {}
    sweep = dict(vars(d.get("sweep", SweepSpec())))
    conv = dict(vars(ConvergenceSpec()))
    kappa = params.kappa
    handlers = {
        "kinds": lambda v: tuple(HamiltonianKind.parse(s) for s in _list(v)),
        "fock_cutoff": int,
        "output_dir": Path,
        "trajectory.t_final": lambda v: parse_time(v, kappa),
        "trajectory.qubit": str,
        "wigner.points": int,
        "wigner.extent": _number,
        "snr.taus": lambda v: tuple(parse_time(s, kappa) for s in _list(v)),
        "noise": str,
        "noise.outer_points": int,
        "format": str,
        "workers": int,
        "seedless": _bool,
        "integrator.method": str,
        "integrator.dt_max": _number,
        "integrator.rel_tol": _number,
        "integrator.abs_tol": _number,
        "integrator.oscillation_resolution": int,
        "sweep.delta_h_min": lambda v: parse_frequency(v, known),
        "sweep.delta_h_max": lambda v: parse_frequency(v, known),
        "sweep.points": int,
        "sweep.taus": lambda v: tuple(parse_time(s, kappa) for s in _list(v)),
        "sweep.quantities": lambda v: tuple(_list(v)),
        "convergence.enabled": _bool,
        "convergence.extra": int,
        "convergence.tol": _number,
    }
    targets = {
        "trajectory.t_final": "t_final",
        "trajectory.qubit": "qubit",
        "wigner.points": "wigner_points",
        "wigner.extent": "wigner_extent",
        "snr.taus": "snr_taus",
        "noise.outer_points": "outer_points",
    }
    for lineno, key, value in pairs:
        if key == "scenario" or key.startswith("params."):
            continue
        if key not in handlers:
            raise ConfigError("unknown key", lineno, key)
        try:
            parsed = handlers[key](value)
        except ValueError as exc:
            fail(key, exc)
        section, _, name = key.partition(".")
        if section == "integrator":
            integ[name] = parsed
        elif section == "sweep":
            sweep[name] = parsed
        elif section == "convergence":
            conv[name] = parsed
        else:
            kw[targets.get(key, key)] = parsed
    try:
        integrator = IntegratorConfig(**integ)
    except ValueError as exc:
        raise ConfigError(f"invalid integrator settings: {exc}") from None
    cfg = RunConfig(
        scenario=scenario,
        params=params,
        integrator=integrator,
        sweep=SweepSpec(**sweep),
        convergence=ConvergenceSpec(**conv),
        **{"kinds": (), **kw},
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Scenario-specific completeness and range checks, run before any integration."""
    if not cfg.seedless:
        raise ConfigError("runs are deterministic; seedless cannot be false", key="seedless")
    if cfg.fock_cutoff < 2:
        raise ConfigError("must be >= 2", key="fock_cutoff")
    if cfg.integrator.method not in METHODS:
        raise ConfigError(f"must be one of {METHODS}", key="integrator.method")
    if cfg.noise not in NOISE_MODELS:
        raise ConfigError(f"must be one of {NOISE_MODELS}", key="noise")
    if cfg.format not in FORMATS:
        raise ConfigError(f"must be one of {FORMATS}", key="format")
    if cfg.workers < 1:
        raise ConfigError("must be >= 1", key="workers")
    if not cfg.kinds:
        raise ConfigError(f"scenario {cfg.scenario!r} needs at least one entry", key="kinds")
    if cfg.qubit not in ("up", "down", "plus", "minus"):
        raise ConfigError("must be one of up, down, plus, minus", key="trajectory.qubit")
    sw = cfg.sweep
    if cfg.scenario in SWEEP_SCENARIOS:
        if sw.points < 2:
            raise ConfigError("a sweep needs at least 2 axis points", key="sweep.points")
        if not sw.delta_h_min <= sw.delta_h_max:
            raise ConfigError("sweep.delta_h_min exceeds sweep.delta_h_max", key="sweep.delta_h_min")
        if sw.delta_h_min < 0:
            raise ConfigError("must be >= 0", key="sweep.delta_h_min")
        if not sw.taus or any(t <= 0 for t in sw.taus):
            raise ConfigError("needs positive times", key="sweep.taus")
        bad = [q for q in sw.quantities if q not in QUANTITIES]
        if bad or not sw.quantities:
            raise ConfigError(f"quantities must be drawn from {QUANTITIES}", key="sweep.quantities")
        if "snr" in sw.quantities and cfg.params.kappa <= 0:
            raise ConfigError("SNR sweeps need kappa > 0", key="params.kappa")
    if cfg.t_final is None and not (cfg.scenario == "transverse_rabi" and cfg.params.j_r > 0):
        raise ConfigError("required for this scenario", key="trajectory.t_final")
    if cfg.t_final is not None and not cfg.t_final > 0:
        raise ConfigError("must be > 0", key="trajectory.t_final")
    if cfg.scenario == "dispersive_compare":
        if cfg.params.kappa <= 0:
            raise ConfigError("dispersive comparison needs kappa > 0", key="params.kappa")
        if cfg.params.omega_c == cfg.params.delta_h:
            raise ConfigError("zero qubit-cavity detuning", key="params.delta_h")
    if cfg.scenario == "fig1_trajectory" and cfg.params.kappa <= 0:
        raise ConfigError("needs kappa > 0", key="params.kappa")


# -- manifest ----------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def render_manifest(cfg: RunConfig) -> str:
    """Config text that reproduces ``cfg`` exactly (the output location is excluded)."""
    p = cfg.params
    lines = [f"scenario = {cfg.scenario}"]
    for f in fields(p):
        v = getattr(p, f.name)
        if v is None:
            continue
        lines.append(f"params.{f.name} = {_fmt(float(v))}")
    lines.append(f"kinds = {', '.join(k.value for k in cfg.kinds)}")
    lines.append(f"fock_cutoff = {cfg.fock_cutoff}")
    for f in fields(cfg.integrator):
        v = getattr(cfg.integrator, f.name)
        if v is not None:
            lines.append(f"integrator.{f.name} = {_fmt(v)}")
    sw = cfg.sweep
    lines += [
        f"sweep.delta_h_min = {_fmt(float(sw.delta_h_min))}",
        f"sweep.delta_h_max = {_fmt(float(sw.delta_h_max))}",
        f"sweep.points = {sw.points}",
        f"sweep.taus = {', '.join(f'{float(t)!r}/kappa' for t in sw.taus)}",
        f"sweep.quantities = {', '.join(sw.quantities)}",
    ]
    if cfg.t_final is not None:
        t = float(cfg.t_final)
        lines.append(f"trajectory.t_final = {f'{t!r}/kappa' if p.kappa > 0 else _fmt(t)}")
    lines.append(f"trajectory.qubit = {cfg.qubit}")
    lines.append(f"wigner.points = {cfg.wigner_points}")
    if cfg.wigner_extent is not None:
        lines.append(f"wigner.extent = {_fmt(float(cfg.wigner_extent))}")
    if cfg.snr_taus:
        lines.append(f"snr.taus = {', '.join(f'{float(t)!r}/kappa' for t in cfg.snr_taus)}")
    lines += [
        f"noise = {cfg.noise}",
        f"noise.outer_points = {cfg.outer_points}",
        f"convergence.enabled = {_fmt(cfg.convergence.enabled)}",
        f"convergence.extra = {cfg.convergence.extra}",
        f"convergence.tol = {_fmt(float(cfg.convergence.tol))}",
        f"format = {cfg.format}",
        f"seedless = {_fmt(cfg.seedless)}",
    ]
    return "\n".join(lines) + "\n"


def manifest_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(render_manifest(cfg).encode("utf-8")).hexdigest()


__all__ = [
    "ConfigError",
    "ConvergenceSpec",
    "DEFAULTS",
    "RunConfig",
    "SCENARIOS",
    "SweepSpec",
    "manifest_hash",
    "parse_angle",
    "parse_config",
    "parse_frequency",
    "parse_time",
    "render_manifest",
    "validate",
]
