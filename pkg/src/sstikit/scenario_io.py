"""Scenario files: strict TOML documents mirroring the in-memory model.

Each section maps onto one parameter type.  Unknown sections or keys, and
values of the wrong type, are rejected with the file position; physical
invariants are re-checked by the types themselves and reported with the
offending field.  Missing keys take the type's default; a missing optional
section (``shaft``, ``hvdc``, ``ssdc``, ``filter``, ``standin``) means the
element is absent.

Who supplies what (the data-exchange split of an interaction study):

==============  ==============================================
section         supplied by
==============  ==============================================
scenario        study engineer
shaft, machine  plant operator (generator manufacturer data)
transformer     plant operator
gen_line        TSO
hvdc_line       TSO
grid            TSO (short-circuit levels and contingencies)
hvdc, ssdc      HVDC operator (converter vendor model)
filter          plant operator
scan, tuning    study engineer
protection      plant operator
injection       study engineer
==============  ==============================================
"""

from __future__ import annotations

import re
import sys
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import tomli_w

from . import engine as en
from . import plant as pl
from .errors import InvalidModelError, ScenarioError
from .protection import DetectionCurve, default_curve
from .scan import ScanPlan, default_grid
from .shaft import ModalResult, ShaftModel

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

OWNERS = {
    "scenario": "study engineer",
    "shaft": "plant operator",
    "machine": "plant operator",
    "transformer": "plant operator",
    "gen_line": "TSO",
    "hvdc_line": "TSO",
    "grid": "TSO",
    "hvdc": "HVDC operator",
    "ssdc": "HVDC operator",
    "filter": "plant operator",
    "standin": "study engineer",
    "scan": "study engineer",
    "tuning": "study engineer",
    "protection": "plant operator",
    "injection": "study engineer",
}


@dataclass(frozen=True)
class ScanSettings:
    """ScanPlan without a mandatory frequency list: an empty list means the
    default grid (1 Hz coarse plus a fine grid around every mode)."""

    frequencies: tuple[float, ...] = ()
    amplitude: float = 1e-3
    settle_periods: int = 10
    measure_periods: int = 20
    variant: str = "restart"
    tones_per_batch: int = 3
    min_settle_s: float = 3.0
    preroll_s: float = 0.2
    settle_tol: float = 2e-3
    resid_tol: float = 1e-3
    max_settle_s: float = 48.0
    lumped_rotor: bool = True
    coarse_start: float = 1.0
    coarse_stop: float = 59.0
    coarse_step: float = 1.0
    refine_span: float = 1.0
    refine_step: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        self.plan((14.0,) if not self.frequencies else ())  # validate eagerly

    def plan(self, mode_hz=(), base_frequency: float = 50.0, **overrides) -> ScanPlan:
        freqs = self.frequencies or default_grid(
            mode_hz, (self.coarse_start, self.coarse_stop), self.coarse_step, self.refine_span, self.refine_step)
        kw = dict(amplitude=self.amplitude, settle_periods=self.settle_periods,
                  measure_periods=self.measure_periods, variant=self.variant,
                  tones_per_batch=self.tones_per_batch, min_settle_s=self.min_settle_s,
                  preroll_s=self.preroll_s, settle_tol=self.settle_tol, resid_tol=self.resid_tol,
                  max_settle_s=self.max_settle_s,
                  lumped_rotor=self.lumped_rotor, base_frequency=base_frequency)
        kw.update(overrides)
        return ScanPlan(tuple(freqs), **kw)


@dataclass(frozen=True)
class TuningSettings:
    mode: int = 1  # 1-based torsional mode the SSDC targets
    centering: str = "classic"
    gain_fixed: float = 0.1
    phase_grid: tuple[float, ...] = ()  # empty -> -80..80 step 10
    gain_grid: tuple[float, ...] = ()  # empty -> logspace 0.05..5, 12 points
    filter_mode: int = 1
    filter_quality: float = 200.0
    filter_peak_impedance: float = 3.0

    def __post_init__(self):
        for name in ("phase_grid", "gain_grid"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.mode < 1 or self.filter_mode < 1:
            raise InvalidModelError("tuning.mode: 1-based mode index required")
        if self.centering not in ("classic", "geometric"):
            raise InvalidModelError("tuning.centering: one of classic, geometric")
        if self.gain_fixed <= 0:
            raise InvalidModelError("tuning.gain_fixed: must be > 0")


@dataclass(frozen=True)
class ProtectionSettings:
    """Detection function per monitored mode.  With ``allowance`` empty the
    exponential default is derived from the mode's modal inertia."""

    channel: str = "p_gen"
    modes: tuple[int, ...] = (1,)
    pickup: float = 0.01
    reset: float = 0.005
    multiple: float = 5.0
    damping_pu: float = 0.1
    allowance: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        object.__setattr__(self, "allowance", tuple((float(t), float(v)) for t, v in self.allowance))
        if not self.modes or min(self.modes) < 1:
            raise InvalidModelError("protection.modes: 1-based mode indices required")
        if self.multiple < 1:
            raise InvalidModelError("protection.multiple: must be >= 1")
        # let the curve type check pickup/reset/allowance
        DetectionCurve(self.pickup, self.allowance or ((0.0, self.multiple * self.pickup),), self.reset)

    def curve(self, modal: ModalResult | None, mode: int) -> DetectionCurve:
        f = float(modal.frequency_hz[mode - 1]) if modal is not None else None
        if self.allowance:
            return DetectionCurve(self.pickup, self.allowance, self.reset, f)
        if modal is None:
            raise InvalidModelError("protection: a shaft model is needed for the default allowance")
        c = default_curve(float(modal.modal_inertia[mode - 1]), pickup=self.pickup, multiple=self.multiple,
                          damping_pu=self.damping_pu, reset_ratio=self.reset / self.pickup, mode_hz=f)
        return c


@dataclass(frozen=True)
class Study:
    """Everything a scenario file holds."""

    scenario: en.Scenario
    scan: ScanSettings = field(default_factory=ScanSettings)
    tuning: TuningSettings = field(default_factory=TuningSettings)
    protection: ProtectionSettings = field(default_factory=ProtectionSettings)
    source: str | None = field(default=None, compare=False)


# section -> (type, optional)
_SECTIONS: dict[str, tuple[type, bool]] = {
    "shaft": (ShaftModel, True),
    "machine": (pl.MachineElec, False),
    "transformer": (pl.Transformer, False),
    "gen_line": (pl.Line, False),
    "hvdc_line": (pl.Line, False),
    "grid": (pl.GridEquivalent, False),
    "hvdc": (pl.HvdcConverter, True),
    "ssdc": (pl.SSDCParams, True),
    "filter": (pl.BlockingFilter, True),
    "standin": (en.LinearStandin, True),
}
_SCENARIO_KEYS = ("name", "description", "base_frequency", "single_mass", "inertia_h", "dt", "duration",
                  "decimation")
_EXTRA = {"scan": ScanSettings, "tuning": TuningSettings, "protection": ProtectionSettings}
# base frequency lives once, in [scenario]
_INHERITED = {"shaft": "base_frequency", "filter": "base_frequency"}


# ---------------------------------------------------------------------------
# typed coercion

def _hints(cls) -> dict:
    mod = sys.modules[cls.__module__]
    return typing.get_type_hints(cls, vars(mod))


def _locate(text: str | None, section: str, key: str | None = None, index: int = 0) -> str:
    if not text:
        return ""
    lines = text.splitlines()
    header = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"\s*\]\]?\s*(#.*)?$")
    seen = -1
    start = None
    for i, ln in enumerate(lines):
        if header.match(ln):
            seen += 1
            if seen == index:
                start = i
                break
    if start is None:
        return ""
    if key is None:
        return f"line {start + 1}, column 1: "
    pat = re.compile(r"^(\s*)" + re.escape(key) + r"\s*=")
    for i in range(start + 1, len(lines)):
        if re.match(r"^\s*\[", lines[i]):
            break
        m = pat.match(lines[i])
        if m:
            return f"line {i + 1}, column {len(m.group(1)) + 1}: "
    return f"line {start + 1}, column 1: "


def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (sys.version_info >= (3, 10) and origin is __import__("types").UnionType):
        non_none = [a for a in args if a is not type(None)]
        for a in non_none:
            try:
                return _coerce(value, a, where)
            except ScenarioError:
                continue
        raise ScenarioError(f"{where}: unexpected value {value!r}")
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ScenarioError(f"{where}: expected true or false, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ScenarioError(f"{where}: expected a string, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ScenarioError(f"{where}: expected an array, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ScenarioError(f"{where}: expected {len(args)} entries, got {len(value)}")
        return tuple(_coerce(v, a, f"{where}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    raise ScenarioError(f"{where}: unsupported field type")


def _build(cls, table: dict, section: str, text: str | None, index: int = 0, extra: dict | None = None):
    if not isinstance(table, dict):
        raise ScenarioError(f"{_locate(text, section, None, index)}[{section}] must be a table")
    hints = _hints(cls)
    names = {f.name for f in fields(cls) if f.init}
    skip = {_INHERITED.get(section)} - {None}
    kw = dict(extra or {})
    for key, value in table.items():
        if key not in names or key in skip:
            raise ScenarioError(f"{_locate(text, section, key, index)}{section}.{key}: unknown key")
        kw[key] = _coerce(value, hints[key], f"{_locate(text, section, key, index)}{section}.{key}")
    try:
        return cls(**kw)
    except (InvalidModelError, ValueError) as exc:
        msg = str(exc)
        field_name = next((k for k in table if re.search(r"\b" + re.escape(k) + r"\b", msg)), None)
        raise ScenarioError(f"{_locate(text, section, field_name, index)}[{section}] {msg}") from exc


# ---------------------------------------------------------------------------
# load / save

def loads(text: str, source: str | None = None) -> Study:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{source or '<string>'}: {exc}") from exc
    try:
        return _from_dict(doc, text, source)
    except ScenarioError as exc:
        if source:
            raise ScenarioError(f"{source}: {exc}") from exc
        raise


def load(path) -> Study:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), str(path))


def _from_dict(doc: dict, text: str | None, source: str | None) -> Study:
    allowed = {"scenario", "injection"} | set(_SECTIONS) | set(_EXTRA)
    for key in doc:
        if key not in allowed:
            raise ScenarioError(f"{_locate(text, key)}[{key}]: unknown section")
    top = doc.get("scenario", {})
    if not isinstance(top, dict):
        raise ScenarioError("[scenario] must be a table")
    hints = _hints(en.Scenario)
    kw = {}
    for key, value in top.items():
        if key not in _SCENARIO_KEYS:
            raise ScenarioError(f"{_locate(text, 'scenario', key)}scenario.{key}: unknown key")
        kw[key] = _coerce(value, hints[key], f"{_locate(text, 'scenario', key)}scenario.{key}")
    fb = kw.get("base_frequency", 50.0)
    inherited = {"base_frequency": fb}
    for sec, (cls, optional) in _SECTIONS.items():
        if sec in doc:
            kw[sec] = _build(cls, doc[sec], sec, text, extra=inherited if sec in _INHERITED else None)
        elif optional:
            kw[sec] = None
    inj = doc.get("injection", [])
    if not isinstance(inj, list):
        raise ScenarioError("injection: use [[injection]] array-of-tables")
    kw["injections"] = tuple(_build(en.Tone, t, "injection", text, i) for i, t in enumerate(inj))
    try:
        scenario = en.Scenario(**kw)
    except InvalidModelError as exc:
        raise ScenarioError(f"{_locate(text, 'scenario')}{exc}") from exc
    extras = {}
    for sec, cls in _EXTRA.items():
        extras[sec] = _build(cls, doc[sec], sec, text) if sec in doc else cls()
    return Study(scenario, source=source, **extras)


def _table(obj, section: str) -> dict:
    skip = _INHERITED.get(section)
    out = {}
    for f in fields(obj):
        if not f.init or f.name == skip:
            continue
        v = getattr(obj, f.name)
        if v is None:
            continue
        out[f.name] = _plain(v)
    return out


def _plain(v):
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def to_dict(study: Study) -> dict:
    sc = study.scenario
    doc = {"scenario": {k: _plain(getattr(sc, k)) for k in _SCENARIO_KEYS}}
    for sec in _SECTIONS:
        obj = getattr(sc, sec)
        if obj is not None:
            doc[sec] = _table(obj, sec)
    for sec in _EXTRA:
        doc[sec] = _table(getattr(study, sec), sec)
    if sc.injections:
        doc["injection"] = [_table(t, "injection") for t in sc.injections]
    return doc


def dumps(study: Study) -> str:
    head = "# sstikit scenario file (TOML). Unknown keys are rejected.\n\n"
    return head + tomli_w.dumps(to_dict(study))


def save(study: Study, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(study))


def with_scenario(study: Study, scenario: en.Scenario) -> Study:
    return replace(study, scenario=scenario)


# ---------------------------------------------------------------------------
# bundled study case

def bundled_path(name: str = "aramon.scn") -> Path:
    return Path(__file__).with_name("data") / name


def bundled(name: str = "aramon.scn") -> Study:
    return load(bundled_path(name))


def section_owner(section: str) -> str:
    return OWNERS[section]
