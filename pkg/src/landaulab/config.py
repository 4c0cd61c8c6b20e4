"""Run configuration: strict JSON parsing, defaults, and round-trip
serialization.

Grammar (JSON object, all sections except ``grid``, ``initial`` and
``time.T`` optional):

    {
      "grid":        {"n": <even int >= 8>, "L": <float > 0>},
      "initial":     {"kind": "maxwellian" | "spike" | "maxwellian_plus_spike",
                      "normalize": <bool, default true>, ...kind fields...},
      "time":        {"T": <float > 0>, "scheme": "explicit" | "semi_implicit",
                      "cfl": <0 < float <= 1>, "snapshots": <int >= 2>,
                      "snapshot_span": <0 < float < 1>},
      "diagnostics": {"p_list": [floats > 1], "k_list": [floats > 0]},
      "tolerances":  {"undershoot": float, "blowup_guard": float,
                      "linear_solver": float},
      "verify":      {... pre-registered pass thresholds, see VerifyThresholds ...},
      "seed":        <int>
    }

Kind fields: maxwellian(rho, u, theta); spike(p, delta, center, core_radius);
maxwellian_plus_spike(weight, maxwellian{...}, spike{...}).  Unknown keys are
errors anywhere (no silent defaults for misspellings).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields as dc_fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class VerifyThresholds:
    """Pre-registered pass criteria for the verification harness."""

    mass_rel: float = 1e-12               # relative mass drift budget
    momentum_energy_rel: float = 1e-3     # relative drift per unit time
    entropy_slack: float = 1e-10          # absolute per-step entropy slack
    kappa: float = 3.0                    # sup_t ||f||_p <= kappa ||f_in||_p
    slope_slack: float = 0.1              # smoothing slope >= -beta* - slack
    moment_window_fraction: float = 0.2   # running-max window for moment ratio
    majorant_slack: float = 1e-6          # relative slack for ODE domination
    lp_fit_fraction: float = 0.1          # share of the run used to fit ODE constants
    smoothing_window_factor: float = 10.0  # window: ||f(t)||_inf >= factor * ||f(T)||_inf
    p: float = 2.0                        # Lebesgue exponent under test
    m: float = 10.0                       # moment order under test
    r: float = 5.0                        # Prodi-Serrin time exponent
    moment_k: float = 3.0                 # moment order for the growth check
    degiorgi_t_fraction: float = 0.25     # iteration target time t = fraction * T
    degiorgi_n_max: int = 12


_DEFAULTS = {
    "scheme": "explicit",
    "cfl": 0.8,
    "snapshots": 40,
    "snapshot_span": 1e-4,
    "stabilization": 1e-3,
    "p_list": (2.0,),
    "k_list": (3.0,),
    "undershoot": 1e-12,
    "blowup_guard": 1e6,
    "linear_solver": 1e-10,
    "seed": 0,
}

_INITIAL_KEYS = {
    "maxwellian": {"rho", "u", "theta"},
    "spike": {"p", "delta", "center", "core_radius"},
    "maxwellian_plus_spike": {"weight", "maxwellian", "spike"},
}


@dataclass(frozen=True)
class RunConfig:
    grid_n: int
    grid_half_width: float
    initial_kind: str
    initial_params: dict
    end_time: float
    initial_normalize: bool = True
    scheme: str = _DEFAULTS["scheme"]
    cfl: float = _DEFAULTS["cfl"]
    snapshot_count: int = _DEFAULTS["snapshots"]
    snapshot_span: float = _DEFAULTS["snapshot_span"]
    stabilization: float = _DEFAULTS["stabilization"]
    p_list: tuple = _DEFAULTS["p_list"]
    k_list: tuple = _DEFAULTS["k_list"]
    undershoot_tol: float = _DEFAULTS["undershoot"]
    blowup_guard: float = _DEFAULTS["blowup_guard"]
    linear_tol: float = _DEFAULTS["linear_solver"]
    seed: int = _DEFAULTS["seed"]
    verify: VerifyThresholds = field(default_factory=VerifyThresholds)


def snapshot_schedule(end_time: float, count: int, span: float) -> list[float]:
    """Geometric snapshot times T * span^{(count-j)/(count-1)}, j = 1..count.

    The earliest entry is span * T, the last is exactly T, and the spacing
    resolves the t -> 0+ behavior on a log scale.
    """
    if count < 2:
        raise ConfigError(f"need at least 2 snapshots (got {count})")
    if not 0.0 < span < 1.0:
        raise ConfigError(f"snapshot_span must lie in (0, 1) (got {span})")
    times = [end_time * span ** ((count - j) / (count - 1)) for j in range(1, count)]
    times.append(end_time)
    return times


def _require(mapping: dict, path: str, allowed: set, required: set) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    missing = sorted(required - set(mapping))
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {missing}")


def _number(value, path: str, *, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number (got {value!r})")
    if integer and int(value) != value:
        raise ConfigError(f"{path}: expected an integer (got {value!r})")
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be positive (got {value!r})")
    return int(value) if integer else float(value)


def _vec3(value, path: str) -> list:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{path}: expected a 3-vector")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _validate_initial(spec: dict, path: str) -> tuple[str, dict, bool]:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{path}: expected an object with a 'kind' key")
    kind = spec["kind"]
    if kind not in _INITIAL_KEYS:
        raise ConfigError(f"{path}.kind: unknown kind {kind!r}; "
                          f"valid: {sorted(_INITIAL_KEYS)}")
    allowed = _INITIAL_KEYS[kind] | {"kind", "normalize"}
    _require(spec, path, allowed, {"kind"})
    normalize = spec.get("normalize", True)
    if not isinstance(normalize, bool):
        raise ConfigError(f"{path}.normalize: expected a boolean")
    params = {}
    if kind == "maxwellian":
        params["rho"] = _number(spec.get("rho", 1.0), f"{path}.rho", positive=True)
        params["u"] = _vec3(spec.get("u", [0.0, 0.0, 0.0]), f"{path}.u")
        params["theta"] = _number(spec.get("theta", 1.0), f"{path}.theta", positive=True)
    elif kind == "spike":
        params["p"] = _number(spec["p"], f"{path}.p", positive=True)
        params["delta"] = _number(spec["delta"], f"{path}.delta", positive=True)
        params["center"] = _vec3(spec.get("center", [0.0, 0.0, 0.0]), f"{path}.center")
        params["core_radius"] = _number(spec.get("core_radius", 1.0),
                                        f"{path}.core_radius", positive=True)
    else:
        params["weight"] = _number(spec["weight"], f"{path}.weight")
        mx_kind, mx_params, _ = _validate_initial(
            {"kind": "maxwellian", **spec.get("maxwellian", {})}, f"{path}.maxwellian")
        sp_kind, sp_params, _ = _validate_initial(
            {"kind": "spike", **spec["spike"]}, f"{path}.spike")
        params["maxwellian"] = mx_params
        params["spike"] = sp_params
    return kind, params, normalize


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    _require(data, source, {"grid", "initial", "time", "diagnostics",
                            "tolerances", "verify", "seed"},
             {"grid", "initial", "time"})

    grid = data["grid"]
    _require(grid, f"{source}.grid", {"n", "L"}, {"n", "L"})
    n = _number(grid["n"], f"{source}.grid.n", positive=True, integer=True)
    if n % 2 != 0 or n < 8:
        raise ConfigError(f"{source}.grid.n: must be even and >= 8 (got {n})")
    half_width = _number(grid["L"], f"{source}.grid.L", positive=True)

    kind, params, do_normalize = _validate_initial(data["initial"], f"{source}.initial")

    time_sec = data["time"]
    _require(time_sec, f"{source}.time",
             {"T", "scheme", "cfl", "snapshots", "snapshot_span", "stabilization"}, {"T"})
    end_time = _number(time_sec["T"], f"{source}.time.T", positive=True)
    scheme = time_sec.get("scheme", _DEFAULTS["scheme"])
    if scheme not in ("explicit", "semi_implicit"):
        raise ConfigError(f"{source}.time.scheme: unknown scheme {scheme!r}")
    cfl = _number(time_sec.get("cfl", _DEFAULTS["cfl"]), f"{source}.time.cfl", positive=True)
    if cfl > 1.0:
        raise ConfigError(f"{source}.time.cfl: must be <= 1 (got {cfl})")
    snapshots = _number(time_sec.get("snapshots", _DEFAULTS["snapshots"]),
                        f"{source}.time.snapshots", positive=True, integer=True)
    span = _number(time_sec.get("snapshot_span", _DEFAULTS["snapshot_span"]),
                   f"{source}.time.snapshot_span", positive=True)
    snapshot_schedule(end_time, snapshots, span)  # validates the pair
    stabilization = _number(time_sec.get("stabilization", _DEFAULTS["stabilization"]),
                            f"{source}.time.stabilization")
    if stabilization < 0:
        raise ConfigError(f"{source}.time.stabilization: must be >= 0")

    diag = data.get("diagnostics", {})
    _require(diag, f"{source}.diagnostics", {"p_list", "k_list"}, set())
    p_list = tuple(_number(p, f"{source}.diagnostics.p_list[{i}]", positive=True)
                   for i, p in enumerate(diag.get("p_list", _DEFAULTS["p_list"])))
    k_list = tuple(_number(k, f"{source}.diagnostics.k_list[{i}]", positive=True)
                   for i, k in enumerate(diag.get("k_list", _DEFAULTS["k_list"])))

    tol = data.get("tolerances", {})
    _require(tol, f"{source}.tolerances", {"undershoot", "blowup_guard", "linear_solver"}, set())
    undershoot = _number(tol.get("undershoot", _DEFAULTS["undershoot"]),
                         f"{source}.tolerances.undershoot", positive=True)
    guard = _number(tol.get("blowup_guard", _DEFAULTS["blowup_guard"]),
                    f"{source}.tolerances.blowup_guard", positive=True)
    lin = _number(tol.get("linear_solver", _DEFAULTS["linear_solver"]),
                  f"{source}.tolerances.linear_solver", positive=True)

    verify_sec = data.get("verify", {})
    verify_fields = {f.name: f for f in dc_fields(VerifyThresholds)}
    _require(verify_sec, f"{source}.verify", set(verify_fields), set())
    verify_kwargs = {}
    for key, value in verify_sec.items():
        integer = verify_fields[key].type == "int"
        verify_kwargs[key] = _number(value, f"{source}.verify.{key}", integer=integer)
    verify = VerifyThresholds(**verify_kwargs)

    seed = _number(data.get("seed", _DEFAULTS["seed"]), f"{source}.seed", integer=True)

    return RunConfig(grid_n=n, grid_half_width=half_width, initial_kind=kind,
                     initial_params=params, initial_normalize=do_normalize,
                     end_time=end_time, scheme=scheme, cfl=cfl,
                     snapshot_count=snapshots, snapshot_span=span,
                     stabilization=stabilization,
                     p_list=p_list, k_list=k_list, undershoot_tol=undershoot,
                     blowup_guard=guard, linear_tol=lin, seed=seed, verify=verify)


def parse_config(path: Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), source=str(path))


def serialize_config(config: RunConfig) -> str:
    """Canonical JSON text; parse(serialize(c)) == c."""
    initial = {"kind": config.initial_kind, "normalize": config.initial_normalize}
    if config.initial_kind == "maxwellian_plus_spike":
        initial["weight"] = config.initial_params["weight"]
        initial["maxwellian"] = config.initial_params["maxwellian"]
        initial["spike"] = config.initial_params["spike"]
    else:
        initial.update(config.initial_params)
    data = {
        "grid": {"n": config.grid_n, "L": config.grid_half_width},
        "initial": initial,
        "time": {"T": config.end_time, "scheme": config.scheme, "cfl": config.cfl,
                 "snapshots": config.snapshot_count,
                 "snapshot_span": config.snapshot_span,
                 "stabilization": config.stabilization},
        "diagnostics": {"p_list": list(config.p_list), "k_list": list(config.k_list)},
        "tolerances": {"undershoot": config.undershoot_tol,
                       "blowup_guard": config.blowup_guard,
                       "linear_solver": config.linear_tol},
        "verify": asdict(config.verify),
        "seed": config.seed,
    }
    return json.dumps(data, indent=2) + "\n"
