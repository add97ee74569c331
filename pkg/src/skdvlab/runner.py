"""Config-driven experiment runs with deterministic, bit-stable artifacts.

The runner is plumbing, not mathematics: it turns a flat TOML file and/or
command-line flag overrides into a validated :class:`ExperimentConfig`,
dispatches to the owning module, and writes

* one or more CSV files (17 significant digits, fixed row order),
* a ``manifest.json`` that places the claimed exponent next to every
  measured one, and
* a human-readable ``summary.txt`` with one PASS/FAIL line per check.

Reruns with the same config and seed produce byte-identical files: nothing
time- or path-dependent is emitted, floats are formatted with ``%.17g``,
and all reductions happen in a fixed order.  Artifacts are staged under a
``.partial`` suffix and renamed only when the whole run succeeds, so a
failed run leaves its partial output behind for inspection instead of a
truncated file that looks complete.

Precedence for configuration values: flags beat environment variables
(``SKDVLAB_OUT_DIR``, ``SKDVLAB_THREADS``) beat the config file beat the
documented defaults.  The thread hint is validated and recorded in the
manifest; the numerical backends are vectorized and reduce serially, which
is what keeps the byte-identical-rerun guarantee cheap to uphold.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .catalog import catalog_json, catalog_lookup, estimate_ids
from .counterex import (
    FAMILIES,
    GROWTH_CSV_HEADER,
    GrowthExperiment,
    growth_csv_rows,
    growth_fit_json,
    predicted_exponent,
    run_growth_experiment,
)
from .evolve import CouplingParams, EvolveConfig, conservation_report, evolve, write_run_csv
from .fre import (
    SWEEP_CSV_HEADER,
    FreGrid,
    FreQuery,
    cutoff_divergence_probe,
    fit_report_json,
    sweep_and_fit,
    sweep_csv_rows,
)
from .grid import Grid, Regularity, SpectralField, random_sobolev_data
from .phases import RegionParams
from .smoothing import NAMED_COMPONENTS, smoothing_probe

__all__ = [
    "COMMANDS",
    "ENV_OUT_DIR",
    "ENV_THREADS",
    "CheckResult",
    "ConfigError",
    "ExperimentConfig",
    "RunReport",
    "RunnerError",
    "command_schema",
    "parse_config",
    "run",
]

COMMANDS = ("evolve", "fre", "counterexample", "smoothing", "bourgain", "catalog")

ENV_OUT_DIR = "SKDVLAB_OUT_DIR"
ENV_THREADS = "SKDVLAB_THREADS"

_NJ_COMPONENT = re.compile(r"N_[0-5]_[uv]\Z")


class ConfigError(ValueError):
    """A config file or flag set that cannot be turned into a valid run."""


class RunnerError(RuntimeError):
    """A validated run that failed while executing or writing artifacts."""


# ---------------------------------------------------------------------------
# Config schema: one flat key/value table per command.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Field:
    kind: str  # "int" | "float" | "str" | "int_list" | "float_list"
    default: Any = None
    required: bool = False
    help: str = ""


def _core_fields() -> dict[str, _Field]:
    return {
        "out_dir": _Field("str", "runs", help="artifact directory (env SKDVLAB_OUT_DIR overrides)"),
        "seed": _Field("int", 0, help="base seed for randomized data"),
        "threads": _Field("int", 1, help="worker hint (env SKDVLAB_THREADS overrides); recorded in the manifest"),
    }


def _shared_fields(delta_default: float = 0.05) -> dict[str, _Field]:
    # The evolution keeps the documented region default 0.05 (floor 1/delta = 20).
    # The fre sweep defaults to 0.5 so that dyadic modulation windows down to
    # 2^6 still intersect the attainable phase values above the region floor.
    return {
        "delta_u": _Field("float", delta_default,
                          help=f"Schrodinger-side region threshold (default {delta_default})"),
        "delta_v": _Field("float", delta_default,
                          help=f"KdV-side region threshold (default {delta_default})"),
        "b": _Field("float", 0.51, help="temporal exponent b (default 0.51)"),
        "bprime": _Field("float", -0.49, help="temporal exponent b' (default -0.49)"),
        "eta_plus": _Field("float", 0.01, help="numerical stand-in for every 0+ exponent (default 0.01)"),
    }


_SCHEMAS: dict[str, dict[str, _Field]] = {
    "evolve": {
        **_core_fields(),
        **_shared_fields(),
        "mode": _Field("str", "classical", help="classical | ibp_u | ibp_v"),
        "n": _Field("int", 256, help="grid points (power of two)"),
        "length": _Field("float", 128.0, help="torus circumference"),
        "dt": _Field("float", 1e-3, help="time step (must divide t_final)"),
        "t_final": _Field("float", 1.0, help="final time"),
        "k": _Field("float", 1.0, help="Schrodinger regularity for data and norms"),
        "s": _Field("float", 0.0, help="KdV regularity for data and norms"),
        "amplitude": _Field("float", 0.1, help="scale applied to the random initial data"),
        "alpha": _Field("float", 1.0, help="coupling u*v -> u"),
        "beta": _Field("float", 1.0, help="cubic self-coupling of u"),
        "gamma": _Field("float", 1.0, help="coupling |u|^2 -> v"),
        "record_stride": _Field("int", 0, help="store every k-th step; 0 = auto (<= 1000 samples)"),
        "mass_drift_tol": _Field("float", 1e-9, help="pass threshold for relative mass drift"),
    },
    "fre": {
        **_core_fields(),
        **_shared_fields(delta_default=0.5),
        "id": _Field("str", required=True, help="catalog estimate id, e.g. lem:probU"),
        "k": _Field("float", 1.0, help="Schrodinger regularity"),
        "s": _Field("float", 0.0, help="KdV regularity"),
        "eps": _Field("float", 0.3, help="smoothing gain inserted into the weight"),
        "fixed_slot": _Field("str", "out", help="which frequency slot carries the window"),
        "M_values": _Field("float_list", (16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0),
                           help="window sizes for the M sweep"),
        "alpha_values": _Field("float_list", (64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0,
                                              4096.0, 8192.0, 16384.0),
                               help="modulation centers for the alpha sweep"),
        "xi_max": _Field("float", 16384.0, help="frequency cutoff of the quadrature"),
        "slope_tol": _Field("float", 1.05, help="pass threshold for both fitted exponents"),
    },
    "counterexample": {
        **_core_fields(),
        **_shared_fields(),
        "family": _Field("str", required=True,
                         help="cor41 | cor42 | sec6_region1 | sec6_region2"),
        "k": _Field("float", None, help="Schrodinger regularity (default per family)"),
        "s": _Field("float", None, help="KdV regularity (default per family)"),
        "kminus_s": _Field("float", None,
                           help="set the gap k-s directly (k=max(gap,0), s=max(-gap,0))"),
        "rho": _Field("float", None, help="data decay rate (sec6_region2 only)"),
        "c_time": _Field("float", 0.1, help="evaluation time as a fraction of the phase period"),
        "N_values": _Field("int_list", None, help="dyadic frequencies (default per family)"),
        "quad_scale": _Field("int", 1, help="quadrature refinement multiplier"),
        "slope_tol": _Field("float", None,
                            help="pass threshold for |measured - predicted| (default 0.1 pairings, 0.15 iterates)"),
    },
    "smoothing": {
        **_core_fields(),
        **_shared_fields(),
        "component": _Field("str", required=True,
                            help="duhamel_*_*, boundary_u, boundary_v, or N_<j>_<u|v>"),
        "k": _Field("float", 1.0, help="Schrodinger regularity of the data"),
        "s": _Field("float", 0.0, help="KdV regularity of the data"),
        "n_seeds": _Field("int", 10, help="number of random draws averaged"),
        "t_final": _Field("float", 0.2, help="Duhamel horizon"),
        "nj_step": _Field("float", 1e-3, help="short evolution step for the N_j components"),
        "amplitude": _Field("float", 1.0, help="scale applied to the random data"),
        "gain_margin": _Field("float", 0.1, help="allowed overshoot above the claimed gain supremum"),
    },
    "bourgain": {
        **_core_fields(),
        **_shared_fields(),
        "id": _Field("str", required=True, help="catalog estimate id"),
        "k": _Field("float", 1.0, help="Schrodinger regularity"),
        "s": _Field("float", 0.0, help="KdV regularity"),
        "eps": _Field("float", 0.0, help="smoothing gain inserted into the weight"),
        "fixed_slot": _Field("str", "out", help="which frequency slot carries the window"),
        "M": _Field("float", 64.0, help="window size held fixed while the cutoff grows"),
        "xi_values": _Field("float_list", (1024.0, 2048.0, 4096.0),
                            help="increasing frequency cutoffs"),
        "growth_margin": _Field("float", 0.05, help="monotone-growth margin for the diverging flag"),
        "expect": _Field("str", "diverging", help="diverging | bounded"),
    },
    "catalog": {
        **_core_fields(),
        "id": _Field("str", None, help="restrict the listing to one estimate"),
        "k": _Field("float", 1.0, help="Schrodinger regularity for the validity/gain columns"),
        "s": _Field("float", 0.0, help="KdV regularity for the validity/gain columns"),
    },
}


def command_schema(command: str) -> Mapping[str, _Field]:
    """Schema of one command's parameter block (used by the CLI to build flags)."""
    if command not in _SCHEMAS:
        raise ConfigError(f"command: unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    return MappingProxyType(_SCHEMAS[command])


# ---------------------------------------------------------------------------
# Coercion and validation.
# ---------------------------------------------------------------------------


def _coerce_scalar(key: str, value: Any, kind: str) -> Any:
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind == "int":
        if isinstance(value, int):
            return value
        if isinstance(value, float):
            if value != int(value):
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
            return int(value)
        try:
            return int(str(value).strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r} as an integer") from None
    if kind == "float":
        if isinstance(value, (int, float)):
            return float(value)
        try:
            return float(str(value).strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r} as a number") from None
    raise ConfigError(f"{key}: unsupported field kind {kind!r}")


def _coerce(key: str, value: Any, fs: _Field) -> Any:
    if fs.kind in ("int_list", "float_list"):
        element = fs.kind.split("_")[0]
        if isinstance(value, str):
            items: Sequence[Any] = [p for p in value.strip().strip("[]").split(",") if p.strip()]
        elif isinstance(value, (list, tuple)):
            items = value
        else:
            items = [value]
        if not items:
            raise ConfigError(f"{key}: expected a nonempty list")
        return tuple(_coerce_scalar(key, item, element) for item in items)
    return _coerce_scalar(key, value, fs.kind)


def _require_positive(params: dict, key: str) -> None:
    if not params[key] > 0:
        raise ConfigError(f"{key} must be positive, got {params[key]}")


def _regularity(params: dict, k: float, s: float, eps: float = 0.0) -> Regularity:
    try:
        return Regularity(k=k, s=s, b=params["b"], b_prime=params["bprime"],
                          eps=eps, eta_plus=params["eta_plus"])
    except ValueError as exc:
        raise ConfigError(f"b/bprime/eps/eta_plus: {exc}") from exc


def _region_params(params: dict) -> RegionParams:
    try:
        return RegionParams(params["delta_u"], params["delta_v"])
    except ValueError as exc:
        raise ConfigError(f"delta_u/delta_v: {exc}") from exc


def _validate_evolve(params: dict) -> list[str]:
    if not params["dt"] > 0:
        raise ConfigError(f"dt must be positive, got {params['dt']}")
    _require_positive(params, "t_final")
    _require_positive(params, "amplitude")
    _require_positive(params, "mass_drift_tol")
    if params["record_stride"] < 0:
        raise ConfigError(f"record_stride must be >= 0 (0 = auto), got {params['record_stride']}")
    try:
        Grid(params["n"], params["length"])
    except ValueError as exc:
        raise ConfigError(f"n/length: {exc}") from exc
    try:
        CouplingParams(params["alpha"], params["beta"], params["gamma"])
    except ValueError as exc:
        raise ConfigError(f"alpha/beta/gamma: {exc}") from exc
    reg = _regularity(params, params["k"], params["s"])
    if params["record_stride"] == 0:
        n_steps = int(round(params["t_final"] / params["dt"]))
        params["record_stride"] = max(1, math.ceil(n_steps / 1000))
    try:
        EvolveConfig(dt=params["dt"], t_end=params["t_final"], mode=params["mode"],
                     region_params=_region_params(params),
                     record_stride=params["record_stride"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    advisories = []
    gap = reg.k - reg.s
    if params["mode"] == "ibp_u" and not (2.0 <= gap < 3.0):
        advisories.append(
            f"mode ibp_u pairs with 2 <= k-s < 3 but k-s = {gap:g}; proceeding"
        )
    if params["mode"] == "ibp_v" and not (-2.0 < gap <= -1.0):
        advisories.append(
            f"mode ibp_v pairs with -2 < k-s <= -1 but k-s = {gap:g}; proceeding"
        )
    return advisories


def _known_estimate(key: str, estimate_id: str) -> None:
    if estimate_id not in estimate_ids():
        known = ", ".join(estimate_ids())
        raise ConfigError(f"{key}: unknown estimate {estimate_id!r}; known ids: {known}")


def _validity_advisories(estimate_id: str, k: float, s: float, eps: float) -> list[str]:
    entry = catalog_lookup(estimate_id)
    advisories = []
    if not entry.in_validity(k, s):
        broken = "; ".join(c.label for c in entry.validity if not bool(c.holds(k, s)))
        advisories.append(
            f"{estimate_id}: stated validity fails at k={k:g}, s={s:g} ({broken}); "
            "measured exponents may exceed the claims"
        )
    else:
        sup = entry.eps_sup(k, s)
        if sup is not None and eps >= sup:
            advisories.append(
                f"{estimate_id}: eps={eps:g} is at or above the admissible supremum "
                f"{sup:g} at k={k:g}, s={s:g}"
            )
    return advisories


def _fre_query(params: dict, eps: float, m_value: float, xi_max: float) -> FreQuery:
    reg = _regularity(params, params["k"], params["s"], eps)
    try:
        return FreQuery(
            estimate_id=params["id"],
            fixed_slot=params["fixed_slot"],
            M=m_value,
            regularity=reg,
            grid=FreGrid(xi_max=xi_max),
            region_params=_region_params(params),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _validate_fre(params: dict) -> list[str]:
    _known_estimate("id", params["id"])
    _require_positive(params, "xi_max")
    _require_positive(params, "slope_tol")
    if params["eps"] < 0:
        raise ConfigError(f"eps must be >= 0, got {params['eps']}")
    for key in ("M_values", "alpha_values"):
        values = params[key]
        if any(v <= 0 for v in values):
            raise ConfigError(f"{key}: entries must be positive, got {values}")
        if list(values) != sorted(set(values)):
            raise ConfigError(f"{key}: entries must be strictly increasing, got {values}")
    _fre_query(params, params["eps"], params["M_values"][0], params["xi_max"])
    return _validity_advisories(params["id"], params["k"], params["s"], params["eps"])


_FAMILY_DEFAULTS: dict[str, dict[str, Any]] = {
    "cor41": {"k": 3.0, "s": 0.0, "N_values": (16, 32, 64, 128, 256, 512, 1024)},
    "cor42": {"k": 0.0, "s": 1.5, "N_values": (16, 32, 64, 128, 256, 512, 1024)},
    "sec6_region1": {"k": 0.25, "s": 3.0, "N_values": (8, 16, 32, 64, 128, 256, 512)},
    "sec6_region2": {"k": 0.25, "s": 4.0, "rho": 2.0,
                     "N_values": (64, 128, 256, 512, 1024, 2048, 4096)},
}


def _validate_counterexample(params: dict) -> list[str]:
    family = params["family"]
    if family not in FAMILIES:
        raise ConfigError(f"family: unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    defaults = _FAMILY_DEFAULTS[family]
    if params["kminus_s"] is not None:
        if params["k"] is not None or params["s"] is not None:
            raise ConfigError("kminus_s: conflicts with explicit k/s; set one or the other")
        gap = params["kminus_s"]
        params["k"] = max(gap, 0.0)
        params["s"] = max(-gap, 0.0)
    if params["k"] is None:
        params["k"] = defaults["k"]
    if params["s"] is None:
        params["s"] = defaults["s"]
    if params["N_values"] is None:
        params["N_values"] = defaults["N_values"]
    if params["rho"] is None and family == "sec6_region2":
        params["rho"] = defaults["rho"]
    if params["slope_tol"] is None:
        params["slope_tol"] = 0.1 if family.startswith("cor") else 0.15
    _require_positive(params, "slope_tol")
    if params["quad_scale"] < 1:
        raise ConfigError(f"quad_scale must be >= 1, got {params['quad_scale']}")
    reg = _regularity(params, params["k"], params["s"])
    try:
        experiment = GrowthExperiment(
            family=family,
            N_values=tuple(params["N_values"]),
            regularity=reg,
            c_time=params["c_time"],
            rho=params["rho"],
            b=params["b"],
            bprime=params["bprime"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    advisories = []
    predicted = predicted_exponent(experiment)
    if family.startswith("cor") and predicted <= 0:
        advisories.append(
            f"{family}: predicted growth exponent {predicted:g} is not positive at "
            f"k={reg.k:g}, s={reg.s:g}; values should stay bounded"
        )
    return advisories


def _validate_smoothing(params: dict) -> list[str]:
    component = params["component"]
    if component not in NAMED_COMPONENTS and not _NJ_COMPONENT.match(component):
        known = ", ".join(sorted(NAMED_COMPONENTS))
        raise ConfigError(
            f"component: unknown component {component!r}; choose one of {known} or N_<j>_<u|v>"
        )
    if params["n_seeds"] < 1:
        raise ConfigError(f"n_seeds must be >= 1, got {params['n_seeds']}")
    _require_positive(params, "t_final")
    _require_positive(params, "nj_step")
    _require_positive(params, "amplitude")
    if params["gain_margin"] < 0:
        raise ConfigError(f"gain_margin must be >= 0, got {params['gain_margin']}")
    _regularity(params, params["k"], params["s"])
    _region_params(params)
    return []


def _validate_bourgain(params: dict) -> list[str]:
    _known_estimate("id", params["id"])
    _require_positive(params, "M")
    _require_positive(params, "growth_margin")
    if params["eps"] < 0:
        raise ConfigError(f"eps must be >= 0, got {params['eps']}")
    xi = params["xi_values"]
    if len(xi) < 2 or list(xi) != sorted(set(xi)) or xi[0] <= 0:
        raise ConfigError(f"xi_values: need >= 2 strictly increasing positive cutoffs, got {xi}")
    if params["expect"] not in ("diverging", "bounded"):
        raise ConfigError(f"expect must be 'diverging' or 'bounded', got {params['expect']!r}")
    _fre_query(params, params["eps"], params["M"], xi[-1])

    entry = catalog_lookup(params["id"])
    valid = bool(entry.in_validity(params["k"], params["s"]))
    advisories = []
    if params["expect"] == "diverging" and valid:
        advisories.append(
            f"{params['id']}: parameters lie inside the stated validity region; "
            "the divergence probe is expected to come back bounded"
        )
    if params["expect"] == "bounded" and not valid:
        advisories.append(
            f"{params['id']}: parameters violate the stated validity region; "
            "the divergence probe is expected to come back diverging"
        )
    return advisories


def _validate_catalog(params: dict) -> list[str]:
    if params["id"] is not None:
        _known_estimate("id", params["id"])
    return []


_VALIDATORS: dict[str, Callable[[dict], list[str]]] = {
    "evolve": _validate_evolve,
    "fre": _validate_fre,
    "counterexample": _validate_counterexample,
    "smoothing": _validate_smoothing,
    "bourgain": _validate_bourgain,
    "catalog": _validate_catalog,
}


# ---------------------------------------------------------------------------
# ExperimentConfig and parsing.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated run: command, resolved parameter block, plumbing."""

    command: str
    params: Mapping[str, Any]
    out_dir: Path
    seed: int
    threads: int
    advisories: tuple[str, ...] = ()


def parse_config(
    path: str | os.PathLike | None = None,
    overrides: Mapping[str, Any] | None = None,
    *,
    command: str | None = None,
) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a TOML file and/or overrides.

    Precedence (lowest to highest): schema defaults, config file, the
    ``SKDVLAB_OUT_DIR`` / ``SKDVLAB_THREADS`` environment variables, and
    explicit overrides (CLI flags).  Unknown keys are rejected by name;
    every numeric value is checked against the owning module's
    preconditions before anything runs.  Advisory conditions (for example
    a normal-form mode outside its natural regularity regime) are recorded
    on the config and issued as warnings, but do not fail the parse.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        for key, value in data.items():
            if isinstance(value, dict):
                raise ConfigError(f"{key}: nested tables are not supported; use flat keys")
            raw[key] = value

    file_command = raw.pop("command", None)
    if file_command is not None and not isinstance(file_command, str):
        raise ConfigError(f"command: expected a string, got {file_command!r}")
    if command is not None and file_command is not None and command != file_command:
        raise ConfigError(
            f"command: config file says {file_command!r} but {command!r} was requested"
        )
    resolved_command = command or file_command
    if resolved_command is None:
        raise ConfigError("command: missing; choose from " + ", ".join(COMMANDS))
    if resolved_command not in _SCHEMAS:
        raise ConfigError(
            f"command: unknown command {resolved_command!r}; choose from {', '.join(COMMANDS)}"
        )
    schema = _SCHEMAS[resolved_command]

    if ENV_OUT_DIR in os.environ:
        raw["out_dir"] = os.environ[ENV_OUT_DIR]
    if ENV_THREADS in os.environ:
        raw["threads"] = os.environ[ENV_THREADS]
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(
            f"unknown key {unknown[0]!r} for command {resolved_command!r}"
            + (f" (also: {', '.join(unknown[1:])})" if len(unknown) > 1 else "")
            + f"; known keys: {', '.join(sorted(schema))}"
        )

    params: dict[str, Any] = {}
    for key, fs in schema.items():
        if key in raw:
            params[key] = _coerce(key, raw[key], fs)
        elif fs.required:
            raise ConfigError(f"{key}: required for command {resolved_command!r}")
        else:
            params[key] = fs.default

    if params["seed"] < 0:
        raise ConfigError(f"seed must be >= 0, got {params['seed']}")
    if params["threads"] < 1:
        raise ConfigError(f"threads must be >= 1, got {params['threads']}")

    advisories = _VALIDATORS[resolved_command](params)
    for message in advisories:
        warnings.warn(message, stacklevel=2)

    return ExperimentConfig(
        command=resolved_command,
        params=MappingProxyType(params),
        out_dir=Path(params["out_dir"]),
        seed=params["seed"],
        threads=params["threads"],
        advisories=tuple(advisories),
    )


# ---------------------------------------------------------------------------
# Checks, artifacts, and the run itself.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    """One measured quantity next to its claim and the rule that judged it."""

    name: str
    measured: Any
    claimed: Any
    tolerance: float | None
    rule: str
    passed: bool

    def as_json(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "claimed": self.claimed,
            "tolerance": self.tolerance,
            "rule": self.rule,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class RunReport:
    """Everything run() produced: checks, artifact names, and the summary."""

    config: ExperimentConfig
    checks: tuple[CheckResult, ...]
    diagnostics: Mapping[str, Any]
    advisories: tuple[str, ...]
    artifacts: tuple[str, ...]
    ok: bool
    summary_text: str

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


class _ArtifactWriter:
    """Single writer for all artifacts; stages under .partial, renames on success."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self._staged: list[str] = []

    def stage(self, name: str) -> Path:
        if name in self._staged:
            raise RunnerError(f"artifact {name!r} written twice")
        self._staged.append(name)
        return self.out_dir / (name + ".partial")

    def write_text(self, name: str, text: str) -> None:
        self.stage(name).write_text(text, encoding="utf-8", newline="\n")

    def finalize(self) -> tuple[str, ...]:
        for name in self._staged:
            (self.out_dir / (name + ".partial")).replace(self.out_dir / name)
        return tuple(self._staged)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._staged)


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _run_evolve(cfg: ExperimentConfig, writer: _ArtifactWriter):
    p = cfg.params
    grid = Grid(p["n"], p["length"])
    u0 = random_sobolev_data(grid, p["k"], cfg.seed, "u", p["eta_plus"])
    v0 = random_sobolev_data(grid, p["s"], cfg.seed + 1, "v", p["eta_plus"])
    u0 = SpectralField(grid, p["amplitude"] * u0.coeffs, "u")
    v0 = SpectralField(grid, p["amplitude"] * v0.coeffs, "v")
    coupling = CouplingParams(p["alpha"], p["beta"], p["gamma"])
    config = EvolveConfig(
        dt=p["dt"], t_end=p["t_final"], mode=p["mode"],
        region_params=RegionParams(p["delta_u"], p["delta_v"]),
        record_stride=p["record_stride"],
    )
    reg = Regularity(k=p["k"], s=p["s"], b=p["b"], b_prime=p["bprime"], eta_plus=p["eta_plus"])
    with warnings.catch_warnings():
        # the regime advisory was already issued (and recorded) at parse time
        warnings.simplefilter("ignore", UserWarning)
        record = evolve(u0, v0, coupling, config, reg)
    write_run_csv(record, writer.stage("series.csv"))
    report = conservation_report(record)
    drift = report["mass_drift"]
    checks = [
        CheckResult(
            name="mass_drift",
            measured=drift,
            claimed=0.0,
            tolerance=p["mass_drift_tol"],
            rule="measured <= tolerance",
            passed=bool(drift <= p["mass_drift_tol"]),
        )
    ]
    diagnostics = dict(report)
    diagnostics["n_samples"] = int(record.times.size)
    diagnostics["record_stride"] = p["record_stride"]
    return checks, diagnostics, []


def _run_fre(cfg: ExperimentConfig, writer: _ArtifactWriter):
    p = cfg.params
    query = _fre_query(dict(p), p["eps"], p["M_values"][0], p["xi_max"])
    fit = sweep_and_fit(query, p["M_values"], p["alpha_values"])
    reg = query.regularity
    writer.write_text(
        "sweep.csv",
        "\n".join([SWEEP_CSV_HEADER, *sweep_csv_rows(p["id"], reg, fit)]) + "\n",
    )
    writer.write_text("fit.json", fit_report_json(p["id"], reg, fit) + "\n")
    entry = catalog_lookup(p["id"])
    checks = [
        CheckResult(
            name="exponent_M",
            measured=fit.exponent_M,
            claimed=entry.claimed_M_exponent,
            tolerance=p["slope_tol"],
            rule="measured <= tolerance",
            passed=bool(fit.exponent_M <= p["slope_tol"]),
        ),
        CheckResult(
            name="exponent_alpha",
            measured=fit.exponent_alpha,
            claimed=entry.claimed_alpha_exponent,
            tolerance=p["slope_tol"],
            rule="measured <= tolerance",
            passed=bool(fit.exponent_alpha <= p["slope_tol"]),
        ),
    ]
    diagnostics = {
        "r_squared": fit.r_squared,
        "n_points": len(fit.points),
        "n_excluded": fit.n_excluded,
    }
    return checks, diagnostics, []


def _run_counterexample(cfg: ExperimentConfig, writer: _ArtifactWriter):
    p = cfg.params
    experiment = GrowthExperiment(
        family=p["family"],
        N_values=tuple(p["N_values"]),
        regularity=Regularity(k=p["k"], s=p["s"], b=p["b"], b_prime=p["bprime"],
                              eta_plus=p["eta_plus"]),
        c_time=p["c_time"],
        rho=p["rho"],
        b=p["b"],
        bprime=p["bprime"],
    )
    sweep = run_growth_experiment(experiment, quad_scale=p["quad_scale"])
    writer.write_text(
        "growth.csv",
        "\n".join([GROWTH_CSV_HEADER, *growth_csv_rows(experiment, sweep.values)]) + "\n",
    )
    writer.write_text("fit.json", growth_fit_json(sweep) + "\n")
    deviation = abs(sweep.fit.slope - sweep.predicted)
    checks = [
        CheckResult(
            name="growth_exponent",
            measured=sweep.fit.slope,
            claimed=sweep.predicted,
            tolerance=p["slope_tol"],
            rule="|measured - claimed| <= tolerance",
            passed=bool(deviation <= p["slope_tol"]),
        )
    ]
    diagnostics = {
        "r_squared": sweep.fit.r_squared,
        "ci95_half_width": sweep.fit.ci95_half_width,
        "deviation": deviation,
    }
    return checks, diagnostics, []


def _run_smoothing(cfg: ExperimentConfig, writer: _ArtifactWriter):
    p = cfg.params
    reg = Regularity(k=p["k"], s=p["s"], b=p["b"], b_prime=p["bprime"], eta_plus=p["eta_plus"])
    seeds = range(cfg.seed, cfg.seed + p["n_seeds"])
    result = smoothing_probe(
        reg,
        p["component"],
        seeds,
        region_params=RegionParams(p["delta_u"], p["delta_v"]),
        t_final=p["t_final"],
        nj_step=p["nj_step"],
        amplitude=p["amplitude"],
    )
    rows = ["component,seed,gain,r_squared"]
    for seed, gain, r2 in zip(seeds, result.per_seed_gain, result.per_seed_r2):
        rows.append(f"{result.component},{seed},{_g17(gain)},{_g17(r2)}")
    writer.write_text("gains.csv", "\n".join(rows) + "\n")
    payload = dataclasses.asdict(result)
    payload["seeds"] = list(seeds)
    writer.write_text("probe.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")

    claimed = result.claimed_eps_sup
    out_of_range = "out of lemma range" in result.flags
    finite = bool(math.isfinite(result.gain_mean))
    if claimed is None or out_of_range:
        checks = [
            CheckResult(
                name="smoothing_gain",
                measured=result.gain_mean,
                claimed=claimed,
                tolerance=None,
                rule="informational (no claim applies); measured must be finite",
                passed=finite,
            )
        ]
    else:
        window_ok = finite and 0.0 < result.gain_mean <= claimed + p["gain_margin"]
        checks = [
            CheckResult(
                name="smoothing_gain",
                measured=result.gain_mean,
                claimed=claimed,
                tolerance=p["gain_margin"],
                rule="0 < measured <= claimed + tolerance",
                passed=bool(window_ok),
            )
        ]
    diagnostics = {
        "gain_std": result.gain_std,
        "n_seeds_used": result.n_seeds_used,
        "claim_id": result.claim_id,
        "base_symbol": result.base_symbol,
        "base_regularity": result.base_regularity,
    }
    advisories = [f"{result.component}: {flag}" for flag in result.flags]
    return checks, diagnostics, advisories


def _run_bourgain(cfg: ExperimentConfig, writer: _ArtifactWriter):
    p = cfg.params
    query = _fre_query(dict(p), p["eps"], p["M"], p["xi_values"][-1])
    report = cutoff_divergence_probe(query, p["xi_values"], p["growth_margin"])
    rows = ["estimate_id,k,s,eps,xi_max,alpha,value,ratio"]
    for xi, alpha, value, ratio in zip(
        report.xi_max_values, report.alpha_values, report.values, report.ratios
    ):
        rows.append(
            f"{p['id']},{_g17(p['k'])},{_g17(p['s'])},{_g17(p['eps'])},"
            f"{_g17(xi)},{_g17(alpha)},{_g17(value)},{_g17(ratio)}"
        )
    writer.write_text("divergence.csv", "\n".join(rows) + "\n")
    payload = dataclasses.asdict(report)
    payload["estimate_id"] = p["id"]
    writer.write_text("report.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    verdict = "diverging" if report.diverging else "bounded"
    checks = [
        CheckResult(
            name="cutoff_divergence",
            measured=verdict,
            claimed=p["expect"],
            tolerance=None,
            rule="measured == claimed",
            passed=bool(verdict == p["expect"]),
        )
    ]
    growth = report.ratios[-1] / report.ratios[0] if report.ratios[0] != 0 else float("inf")
    diagnostics = {"ratio_growth_factor": growth}
    return checks, diagnostics, []


def _run_catalog(cfg: ExperimentConfig, writer: _ArtifactWriter):
    p = cfg.params
    ids = (p["id"],) if p["id"] is not None else estimate_ids()
    k, s = p["k"], p["s"]
    rows = ["estimate_id,k,s,in_validity,eps_sup,claimed_M_exponent,claimed_alpha_exponent"]
    for estimate_id in ids:
        entry = catalog_lookup(estimate_id)
        sup = entry.eps_sup(k, s)
        rows.append(
            f"{estimate_id},{_g17(k)},{_g17(s)},{int(bool(entry.in_validity(k, s)))},"
            f"{'' if sup is None else _g17(sup)},"
            f"{_g17(entry.claimed_M_exponent)},{_g17(entry.claimed_alpha_exponent)}"
        )
    writer.write_text("catalog.csv", "\n".join(rows) + "\n")
    writer.write_text("catalog.json", catalog_json() + "\n")
    checks = [
        CheckResult(
            name="catalog_entries",
            measured=len(ids),
            claimed=len(ids),
            tolerance=None,
            rule="informational listing",
            passed=True,
        )
    ]
    return checks, {"n_entries": len(ids)}, []


_DISPATCH = {
    "evolve": _run_evolve,
    "fre": _run_fre,
    "counterexample": _run_counterexample,
    "smoothing": _run_smoothing,
    "bourgain": _run_bourgain,
    "catalog": _run_catalog,
}

_HEADLINE_KEY = {
    "evolve": "mode",
    "fre": "id",
    "counterexample": "family",
    "smoothing": "component",
    "bourgain": "id",
    "catalog": "id",
}


def _summary_text(
    cfg: ExperimentConfig,
    checks: Sequence[CheckResult],
    advisories: Sequence[str],
    artifacts: Sequence[str],
    ok: bool,
) -> str:
    headline = cfg.params.get(_HEADLINE_KEY[cfg.command])
    lines = [f"skdvlab {cfg.command}"
             + (f" [{headline}]" if headline is not None else "")
             + f" (seed {cfg.seed})"]
    for message in advisories:
        lines.append(f"advisory: {message}")
    for check in checks:
        lines.append(
            f"{check.name}: measured {_fmt(check.measured)} vs claimed {_fmt(check.claimed)}"
            + (f", tolerance {_fmt(check.tolerance)}" if check.tolerance is not None else "")
            + f" [{check.rule}] -> {'PASS' if check.passed else 'FAIL'}"
        )
    lines.append("artifacts: " + " ".join(artifacts))
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines) + "\n"


def run(config: ExperimentConfig) -> RunReport:
    """Execute a validated config and write its artifacts.

    On success every staged file loses its ``.partial`` suffix and a
    :class:`RunReport` comes back with ``exit_code`` 0 iff all checks
    passed.  On an executor error the partial files are left in place and
    a :class:`RunnerError` carries the original exception as context.
    """
    config.out_dir.mkdir(parents=True, exist_ok=True)
    writer = _ArtifactWriter(config.out_dir)
    try:
        checks, diagnostics, extra_advisories = _DISPATCH[config.command](config, writer)
    except RunnerError:
        raise
    except Exception as exc:
        staged = ", ".join(writer.names) if writer.names else "none"
        raise RunnerError(
            f"command {config.command!r} failed: {exc} "
            f"(partial artifacts kept with '.partial' suffix: {staged})"
        ) from exc

    advisories = tuple(config.advisories) + tuple(extra_advisories)
    ok = all(check.passed for check in checks)
    artifact_names = writer.names + ("summary.txt", "manifest.json")

    summary = _summary_text(config, checks, advisories, artifact_names, ok)
    writer.write_text("summary.txt", summary)
    manifest = {
        "command": config.command,
        "config": dict(config.params),
        "seed": config.seed,
        "threads": config.threads,
        "advisories": list(advisories),
        "checks": [check.as_json() for check in checks],
        "diagnostics": dict(diagnostics),
        "artifacts": list(artifact_names),
        "ok": ok,
    }
    writer.write_text("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    writer.finalize()

    return RunReport(
        config=config,
        checks=tuple(checks),
        diagnostics=MappingProxyType(dict(diagnostics)),
        advisories=advisories,
        artifacts=artifact_names,
        ok=ok,
        summary_text=summary,
    )
