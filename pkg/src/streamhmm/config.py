"""Experiment configuration: one JSON document per run.

A configuration is a single JSON object.  ``kind`` selects the experiment
family; the ``dataset`` section configures the generator; command-specific
sections (``method``, ``methods``, ``theorem``, ...) configure what runs on
it.  Parsing is strict: unknown keys and type mismatches raise
``ConfigError`` with the JSON path of the offending entry, and JSON syntax
errors carry the line and column from the decoder.
"""

import dataclasses
import json
from dataclasses import dataclass

from .datagen import GaussHmmConfig, GpDgpConfig
from .errors import ConfigError
from .prequential import METHOD_NAMES, MethodSettings
from .regimes import DEFAULT_WINDOW_CAP, KernelHyper

SCHEMA_VERSION = "1"

DATASET_KINDS = ("gauss-hmm", "gp-hmm")
EXPERIMENT_KINDS = DATASET_KINDS + ("verify-theorem", "sweep")
ERROR_TARGETS = ("observations", "true-means")


def load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: top-level config must be a JSON object")
    return document


def _reject_unknown(section: dict, allowed, path: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")


def _typed(section: dict, key: str, types, default, path: str):
    if key not in section or section[key] is None:
        return default
    value = section[key]
    if types is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
        raise ConfigError(f"{path}.{key}: expected {getattr(types, '__name__', types)}")
    return value


def _number_list(section: dict, key: str, default, path: str, *, integer=False):
    if key not in section or section[key] is None:
        return default
    value = section[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}.{key}: expected a non-empty list")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"{path}.{key}[{i}]: expected a number")
        if integer and not isinstance(item, int):
            raise ConfigError(f"{path}.{key}[{i}]: expected an integer")
        out.append(int(item) if integer else float(item))
    return out


def experiment_kind(document: dict) -> str:
    kind = document.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"kind: expected one of {EXPERIMENT_KINDS}, got {kind!r}")
    return kind


def check_schema_version(document: dict, path: str = "config") -> None:
    version = document.get("schema_version", SCHEMA_VERSION)
    if str(version) != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}.schema_version: got {version!r}, this build reads {SCHEMA_VERSION!r}"
        )


def parse_dataset(document: dict, seed: int):
    """Build the dataset generator config for the document's kind."""
    kind = document.get("kind")
    section = document.get("dataset", {})
    if not isinstance(section, dict):
        raise ConfigError("dataset: expected an object")
    dataset_kind = section.get("kind", kind if kind in DATASET_KINDS else None)
    if dataset_kind not in DATASET_KINDS:
        raise ConfigError(f"dataset.kind: expected one of {DATASET_KINDS}, got {dataset_kind!r}")
    initial = section.get("initial")
    if initial is not None:
        initial = tuple(_number_list(section, "initial", None, "dataset"))
    try:
        if dataset_kind == "gauss-hmm":
            _reject_unknown(
                section,
                ("kind", "means", "sigma", "self_prob", "length", "initial"),
                "dataset",
            )
            return GaussHmmConfig(
                means=tuple(_number_list(section, "means", [-3.0, 0.0, 3.0], "dataset")),
                sigma=_typed(section, "sigma", float, 1.0, "dataset"),
                self_prob=_typed(section, "self_prob", float, 0.98, "dataset"),
                length=_typed(section, "length", int, 2000, "dataset"),
                seed=seed,
                initial=initial,
            )
        _reject_unknown(
            section,
            ("kind", "slopes", "w1", "w2", "dt", "sigma", "self_prob", "length", "initial"),
            "dataset",
        )
        return GpDgpConfig(
            slopes=tuple(_number_list(section, "slopes", [0.15, -0.15], "dataset")),
            w1=_typed(section, "w1", float, 0.3, "dataset"),
            w2=_typed(section, "w2", float, 0.5, "dataset"),
            dt=_typed(section, "dt", float, 0.1, "dataset"),
            sigma=_typed(section, "sigma", float, 0.05, "dataset"),
            self_prob=_typed(section, "self_prob", float, 0.99, "dataset"),
            length=_typed(section, "length", int, 1000, "dataset"),
            seed=seed,
            initial=initial,
        )
    except AssertionError as exc:
        raise ConfigError(f"dataset: {exc}") from exc


def parse_kernel(section: dict, path: str) -> KernelHyper:
    _reject_unknown(
        section,
        ("rbf_variance", "rbf_lengthscale", "per_variance", "per_lengthscale", "per_period"),
        path,
    )
    defaults = KernelHyper()
    try:
        return KernelHyper(
            rbf_variance=_typed(section, "rbf_variance", float, defaults.rbf_variance, path),
            rbf_lengthscale=_typed(section, "rbf_lengthscale", float, defaults.rbf_lengthscale, path),
            per_variance=_typed(section, "per_variance", float, defaults.per_variance, path),
            per_lengthscale=_typed(section, "per_lengthscale", float, defaults.per_lengthscale, path),
            per_period=_typed(section, "per_period", float, defaults.per_period, path),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_settings(document: dict, *, gp_dataset: bool) -> MethodSettings:
    """Method settings; GP datasets get a GP summary kernel by default."""
    section = document.get("settings", {})
    if not isinstance(section, dict):
        raise ConfigError("settings: expected an object")
    _reject_unknown(
        section,
        (
            "prior_mean",
            "prior_var",
            "step_exponent",
            "ess_threshold",
            "window_cap",
            "noise_var",
            "kernel",
        ),
        "settings",
    )
    kernel = None
    if "kernel" in section and section["kernel"] is not None:
        if not isinstance(section["kernel"], dict):
            raise ConfigError("settings.kernel: expected an object")
        kernel = parse_kernel(section["kernel"], "settings.kernel")
    elif gp_dataset:
        kernel = KernelHyper()
    return MethodSettings(
        prior_mean=_typed(section, "prior_mean", float, None, "settings"),
        prior_var=_typed(section, "prior_var", float, None, "settings"),
        step_exponent=_typed(section, "step_exponent", float, 0.6, "settings"),
        ess_threshold=_typed(section, "ess_threshold", float, 0.5, "settings"),
        window_cap=_typed(section, "window_cap", int, DEFAULT_WINDOW_CAP, "settings"),
        noise_var=_typed(section, "noise_var", float, None, "settings"),
        kernel=kernel,
    )


def parse_methods(document: dict) -> list[str]:
    methods = document.get("methods", ["shmm", "online-em", "rbpf"])
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods: expected a non-empty list")
    for name in methods:
        if name not in METHOD_NAMES:
            raise ConfigError(f"methods: unknown method {name!r}, expected {METHOD_NAMES}")
    return methods


def parse_seeds(document: dict, base_seed: int) -> list[int]:
    if "seeds" in document and document["seeds"] is not None:
        return _number_list(document, "seeds", None, "config", integer=True)
    count = _typed(document, "n_seeds", int, 20, "config")
    return [base_seed + i for i in range(count)]


def parse_error_target(document: dict) -> str:
    target = document.get("error_target", "observations")
    if target not in ERROR_TARGETS:
        raise ConfigError(f"error_target: expected one of {ERROR_TARGETS}, got {target!r}")
    return target


@dataclass(frozen=True)
class TheoremGridConfig:
    """Random-instance grid for the truncation-bound verification run."""

    k_values: tuple[int, ...] = (2, 3)
    t_values: tuple[int, ...] = (3, 4, 5, 6, 7)
    s_values: tuple[int, ...] = (1, 2, 4)
    configs_per_cell: int = 2
    probe_trials: int = 200
    sweep_instances: tuple[tuple[int, int, int], ...] = ()
    tol: float = 1e-9


def parse_theorem_grid(document: dict) -> TheoremGridConfig:
    section = document.get("theorem", {})
    if not isinstance(section, dict):
        raise ConfigError("theorem: expected an object")
    _reject_unknown(
        section,
        ("k_values", "t_values", "s_values", "configs_per_cell", "probe_trials", "sweep_instances", "tol"),
        "theorem",
    )
    defaults = TheoremGridConfig()
    sweep_instances = defaults.sweep_instances
    if "sweep_instances" in section and section["sweep_instances"] is not None:
        raw = section["sweep_instances"]
        if not isinstance(raw, list):
            raise ConfigError("theorem.sweep_instances: expected a list of [k, t, s] triples")
        triples = []
        for i, item in enumerate(raw):
            if not (isinstance(item, list) and len(item) == 3 and all(isinstance(v, int) for v in item)):
                raise ConfigError(f"theorem.sweep_instances[{i}]: expected [k, t, s] integers")
            triples.append(tuple(item))
        sweep_instances = tuple(triples)
    return TheoremGridConfig(
        k_values=tuple(_number_list(section, "k_values", list(defaults.k_values), "theorem", integer=True)),
        t_values=tuple(_number_list(section, "t_values", list(defaults.t_values), "theorem", integer=True)),
        s_values=tuple(_number_list(section, "s_values", list(defaults.s_values), "theorem", integer=True)),
        configs_per_cell=_typed(section, "configs_per_cell", int, defaults.configs_per_cell, "theorem"),
        probe_trials=_typed(section, "probe_trials", int, defaults.probe_trials, "theorem"),
        sweep_instances=sweep_instances,
        tol=_typed(section, "tol", float, defaults.tol, "theorem"),
    )


def resolved_config(document: dict, *, seed: int, **sections) -> dict:
    """Echo of the fully resolved configuration for embedding in outputs."""
    out = {"schema_version": SCHEMA_VERSION, "kind": document.get("kind"), "seed": seed}
    for name, value in sections.items():
        out[name] = _plain(value)
    return out


def _plain(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            field.name: _plain(getattr(value, field.name))
            for field in dataclasses.fields(value)
            if field.init
        }
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item") and callable(getattr(value, "item", None)) and getattr(value, "ndim", None) == 0:
        return value.item()
    if hasattr(value, "tolist"):
        return value.tolist()
    return value
