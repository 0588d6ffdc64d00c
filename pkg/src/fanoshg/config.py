"""TOML run configuration, bundled presets and result serialisation.

A config file has a ``[params]`` table (all frequencies in units of the
drive frequency) plus optional ``[integrator]``, ``[calibrate]``,
``[search]``, ``[sweep]`` and ``[output]`` tables. Complex numbers are
written either as ``[re, im]`` or ``{ re = .., im = .. }``.
"""

import dataclasses
import json
import math
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import IntegratorConfig
from .errors import ConfigError, ParameterError
from .explore import DEFAULT_BOUNDS, SearchSpec
from .model import SystemParams

SCHEMA_VERSION = 1

_COMPLEX = {"f1", "f2", "g", "eps_p"}
_PARAM_FIELDS = {f.name for f in dataclasses.fields(SystemParams)}
_INTEGRATOR_FIELDS = {f.name for f in dataclasses.fields(IntegratorConfig)}
_CALIBRATE_FIELDS = {"target_y2", "bracket", "method", "tol"}
_SEARCH_FIELDS = {"variables", "strategy", "objective", "restarts", "max_evals", "seed",
                  "grid_points", "threads"}
_SWEEP_FIELDS = {"variable", "values", "start", "stop", "num", "full"}
_OUTPUT_FIELDS = {"dir", "csv_digits", "dump_trajectory"}
_SECTIONS = {"params", "integrator", "calibrate", "search", "sweep", "output"}


@dataclass(frozen=True)
class CalibrateSpec:
    target_y2: float = -0.764
    bracket: tuple = (1e-3, 2.0)
    method: str = "fixed_point"
    tol: float = 1e-3


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    full: bool = False


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    integrator: IntegratorConfig = IntegratorConfig()
    calibrate: CalibrateSpec = None
    search: SearchSpec = None
    sweep: SweepSpec = None
    out_dir: str = "out"
    csv_digits: int = 12
    dump_trajectory: bool = False
    source: str = None


def _line_of(text, section, key=None):
    """Best-effort 1-based line of ``[section]`` or of ``key`` inside it."""
    if text is None:
        return None
    lines = text.splitlines()
    start = None
    head = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]")
    for i, line in enumerate(lines):
        if head.match(line):
            start = i
            break
    if start is None:
        return None
    if key is None:
        return start + 1
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i in range(start + 1, len(lines)):
        if lines[i].lstrip().startswith("["):
            break
        if pat.match(lines[i]):
            return i + 1
    return start + 1


def _complex(value, path, line):
    if isinstance(value, bool):
        raise ConfigError("expected a number or [re, im]", path, line)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(value.get("re", 0.0), value.get("im", 0.0))
    raise ConfigError("expected a number, [re, im] or {re, im}", path, line)


def _real(value, path, line):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a real number, got {value!r}", path, line)
    return float(value)


def _check_keys(table, allowed, section, text):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key; allowed: {sorted(allowed)}",
                              f"{section}.{key}", _line_of(text, section, key))


def parse_params(table, text=None, section="params"):
    _check_keys(table, _PARAM_FIELDS, section, text)
    kw = {}
    for key, value in table.items():
        line = _line_of(text, section, key)
        kw[key] = (_complex if key in _COMPLEX else _real)(value, f"{section}.{key}", line)
    try:
        return SystemParams(**kw)
    except ParameterError as exc:
        raise ConfigError(str(exc), f"{section}.{exc.field}",
                          _line_of(text, section, exc.field)) from exc
    except TypeError as exc:
        missing = sorted(_PARAM_FIELDS - set(kw) - {"f1", "f2", "g", "chi2", "eps_p",
                                                    "omega_drive"})
        raise ConfigError(f"missing required field(s) {missing}", section,
                          _line_of(text, section)) from exc


def _parse_integrator(table, text):
    _check_keys(table, _INTEGRATOR_FIELDS, "integrator", text)
    kw = {}
    for k, v in table.items():
        line = _line_of(text, "integrator", k)
        kw[k] = int(_real(v, f"integrator.{k}", line)) if k == "max_steps" else _real(
            v, f"integrator.{k}", line)
    try:
        return IntegratorConfig(**kw)
    except ParameterError as exc:
        raise ConfigError(str(exc), f"integrator.{exc.field}",
                          _line_of(text, "integrator", exc.field)) from exc


def _parse_calibrate(table, text):
    _check_keys(table, _CALIBRATE_FIELDS, "calibrate", text)
    kw = dict(table)
    if "bracket" in kw:
        b = kw["bracket"]
        if not (isinstance(b, list) and len(b) == 2):
            raise ConfigError("expected [lower, upper]", "calibrate.bracket",
                              _line_of(text, "calibrate", "bracket"))
        kw["bracket"] = (float(b[0]), float(b[1]))
    if kw.get("method", "fixed_point") not in ("fixed_point", "time_evolution"):
        raise ConfigError("expected 'fixed_point' or 'time_evolution'", "calibrate.method",
                          _line_of(text, "calibrate", "method"))
    return CalibrateSpec(**kw)


def _parse_search(table, text, params, integrator):
    _check_keys(table, _SEARCH_FIELDS, "search", text)
    raw = table.get("variables")
    line = _line_of(text, "search", "variables")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("expected a non-empty list of names or [name, lower, upper]",
                          "search.variables", line)
    variables = []
    for item in raw:
        if isinstance(item, str):
            if item not in DEFAULT_BOUNDS:
                raise ConfigError(f"unknown search variable {item!r}", "search.variables", line)
            variables.append((item, *DEFAULT_BOUNDS[item]))
        elif isinstance(item, list) and len(item) == 3 and isinstance(item[0], str):
            variables.append((item[0], float(item[1]), float(item[2])))
        else:
            raise ConfigError(f"bad variable entry {item!r}", "search.variables", line)
    kw = {k: v for k, v in table.items() if k != "variables"}
    try:
        return SearchSpec(base_params=params, variables=tuple(variables), integrator=integrator,
                          **kw)
    except ParameterError as exc:
        key = exc.field.split(".")[0]
        raise ConfigError(str(exc), f"search.{exc.field}", _line_of(text, "search", key)) from exc


def _parse_sweep(table, text):
    _check_keys(table, _SWEEP_FIELDS, "sweep", text)
    if "variable" not in table:
        raise ConfigError("missing 'variable'", "sweep", _line_of(text, "sweep"))
    if "values" in table:
        values = tuple(float(v) for v in table["values"])
    elif {"start", "stop", "num"} <= set(table):
        values = tuple(np.linspace(table["start"], table["stop"], int(table["num"])).tolist())
    else:
        raise ConfigError("give either 'values' or 'start', 'stop' and 'num'", "sweep",
                          _line_of(text, "sweep"))
    return SweepSpec(table["variable"], values, bool(table.get("full", False)))


def parse_config(text, source=None):
    """Build a :class:`RunConfig` from TOML source text."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", source, int(m.group(1)) if m else None)
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section; allowed: {sorted(_SECTIONS)}", key,
                              _line_of(text, key))
    if "params" not in doc:
        raise ConfigError("missing [params] section", "params")
    params = parse_params(doc["params"], text)
    integrator = _parse_integrator(doc.get("integrator", {}), text)
    out = doc.get("output", {})
    _check_keys(out, _OUTPUT_FIELDS, "output", text)
    return RunConfig(
        params=params,
        integrator=integrator,
        calibrate=_parse_calibrate(doc["calibrate"], text) if "calibrate" in doc else None,
        search=_parse_search(doc["search"], text, params, integrator) if "search" in doc else None,
        sweep=_parse_sweep(doc["sweep"], text) if "sweep" in doc else None,
        out_dir=str(out.get("dir", "out")),
        csv_digits=int(out.get("csv_digits", 12)),
        dump_trajectory=bool(out.get("dump_trajectory", False)),
        source=source,
    )


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return parse_config(text, str(path))


def preset_names():
    files = resources.files("fanoshg").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".toml"))


def load_preset(name):
    res = resources.files("fanoshg").joinpath("presets", f"{name}.toml")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}", "preset")
    return parse_config(res.read_text(), f"preset:{name}")


# ---- serialisation ---------------------------------------------------------

def _jsonable(value):
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def dump_json(payload, path):
    """Write a schema-versioned JSON report; floats keep round-trip precision."""
    doc = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return doc


def params_table(params):
    return {k: _jsonable(v) for k, v in params.to_dict().items()}
