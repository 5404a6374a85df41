"""Run configuration: flat ``key = value`` files with dotted section prefixes.

Every knob has an explicit default; :meth:`RunConfig.resolved` returns the
complete key/value mapping (defaults included) that gets echoed into each
result document, so any run is reproducible from its output alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


MODEL_KINDS = ("multinomial-dirichlet", "gaussian-conjugate", "poisson-gamma", "gmrf")
DATA_FORMATS = ("fasta", "numeric", "event-dates")
LATENT_KINDS = ("ar1", "rw1")
OBS_KINDS = ("gaussian-identity", "poisson-log", "sv-zero-mean")
K_PRIOR_KINDS = ("uniform", "poisson")


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _to_bool(key, value):
    low = value.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _to_int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")


def _to_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}")


@dataclass
class RunConfig:
    """Fully validated settings for one detection run."""

    data_path: str
    data_format: str
    model_kind: str
    grid_g: int
    k_max: int
    # model parameters (union over kinds; unused ones stay at defaults)
    alpha: float = 1.0
    prior_mean: float = 0.0
    prior_kappa: float = 0.01
    prior_shape: float = 1.0
    prior_rate: float = 1.0
    latent_kind: str = "ar1"
    latent_prec_shape: float = 1.0
    latent_prec_rate: float = 0.01
    kappa_mean: float = 3.0
    kappa_sd: float = 1.89
    anchor_sd: float = 10.0
    intercept_enabled: bool | None = None
    intercept_mean: float = 0.0
    intercept_sd: float | None = None
    obs_kind: str = "poisson-log"
    noise_prec_shape: float = 1.0
    noise_prec_rate: float = 0.01
    # inference settings
    k_prior_kind: str = "uniform"
    k_prior_mean: float | None = None
    refine_enabled: bool = True
    refine_max_sweeps: int = 10
    hyper_nodes: int = 9
    scaling_enabled: bool | None = None
    field_enabled: bool = True
    samples_count: int = 0
    seed: int = 0
    workers: int = 1
    output_path: str = "result.json"

    def __post_init__(self):
        if self.data_format not in DATA_FORMATS:
            raise ConfigError(f"data.format must be one of {DATA_FORMATS}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {MODEL_KINDS}")
        if self.grid_g < 1:
            raise ConfigError("grid.g must be a positive integer")
        if self.k_max < 0:
            raise ConfigError("k.max must be nonnegative")
        if self.k_prior_kind not in K_PRIOR_KINDS:
            raise ConfigError(f"k.prior.kind must be one of {K_PRIOR_KINDS}")
        if self.k_prior_kind == "poisson" and (
            self.k_prior_mean is None or self.k_prior_mean <= 0
        ):
            raise ConfigError("poisson k prior requires k.prior.mean > 0")
        if self.model_kind == "gmrf":
            if self.latent_kind not in LATENT_KINDS:
                raise ConfigError(f"model.latent.kind must be one of {LATENT_KINDS}")
            if self.obs_kind not in OBS_KINDS:
                raise ConfigError(f"model.obs.kind must be one of {OBS_KINDS}")
            if self.hyper_nodes < 1:
                raise ConfigError("hyper.nodes_per_dim must be at least 1")
        if self.model_kind == "multinomial-dirichlet" and self.alpha <= 0:
            raise ConfigError("model.alpha must be positive")
        if self.refine_max_sweeps < 1:
            raise ConfigError("refine.max_sweeps must be at least 1")
        if self.samples_count < 0:
            raise ConfigError("samples.count must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        # kind-aware defaults
        if self.intercept_enabled is None:
            self.intercept_enabled = self.model_kind == "gmrf" and self.obs_kind in (
                "poisson-log",
                "sv-zero-mean",
            )
        if self.intercept_sd is None:
            self.intercept_sd = 3.0 if self.obs_kind == "sv-zero-mean" else 10.0
        if self.intercept_sd <= 0:
            raise ConfigError("model.intercept.prior.sd must be positive")
        if self.scaling_enabled is None:
            self.scaling_enabled = (
                self.model_kind == "gmrf" and self.obs_kind == "gaussian-identity"
            )

    _KEYMAP = {
        "data.path": ("data_path", str),
        "data.format": ("data_format", str),
        "model.kind": ("model_kind", str),
        "model.alpha": ("alpha", _to_float),
        "model.prior_mean": ("prior_mean", _to_float),
        "model.prior_kappa": ("prior_kappa", _to_float),
        "model.prior_shape": ("prior_shape", _to_float),
        "model.prior_rate": ("prior_rate", _to_float),
        "model.latent.kind": ("latent_kind", str),
        "model.latent.precision_prior.shape": ("latent_prec_shape", _to_float),
        "model.latent.precision_prior.rate": ("latent_prec_rate", _to_float),
        "model.latent.kappa_prior.mean": ("kappa_mean", _to_float),
        "model.latent.kappa_prior.sd": ("kappa_sd", _to_float),
        "model.latent.anchor_sd": ("anchor_sd", _to_float),
        "model.intercept.enabled": ("intercept_enabled", _to_bool),
        "model.intercept.prior.mean": ("intercept_mean", _to_float),
        "model.intercept.prior.sd": ("intercept_sd", _to_float),
        "model.obs.kind": ("obs_kind", str),
        "model.obs.noise_precision_prior.shape": ("noise_prec_shape", _to_float),
        "model.obs.noise_precision_prior.rate": ("noise_prec_rate", _to_float),
        "grid.g": ("grid_g", _to_int),
        "k.max": ("k_max", _to_int),
        "k.prior.kind": ("k_prior_kind", str),
        "k.prior.mean": ("k_prior_mean", _to_float),
        "refine.enabled": ("refine_enabled", _to_bool),
        "refine.max_sweeps": ("refine_max_sweeps", _to_int),
        "hyper.nodes_per_dim": ("hyper_nodes", _to_int),
        "scaling.enabled": ("scaling_enabled", _to_bool),
        "field.enabled": ("field_enabled", _to_bool),
        "samples.count": ("samples_count", _to_int),
        "seed": ("seed", _to_int),
        "workers": ("workers", _to_int),
        "output.path": ("output_path", str),
    }

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "RunConfig":
        kwargs = {}
        for key, value in raw.items():
            if key not in cls._KEYMAP:
                raise ConfigError(f"unknown config key {key!r}")
            attr, conv = cls._KEYMAP[key]
            kwargs[attr] = conv(key, value) if conv is not str else value
        for required in ("data.path", "data.format", "model.kind", "grid.g", "k.max"):
            attr = cls._KEYMAP[required][0]
            if attr not in kwargs:
                raise ConfigError(f"missing required config key {required!r}")
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved(self) -> dict[str, object]:
        """Flat mapping of every setting, defaults included."""
        out = {}
        for key, (attr, _) in self._KEYMAP.items():
            out[key] = getattr(self, attr)
        return dict(sorted(out.items()))


def load_config(path, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read, override and validate a config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = parse_config_text(text)
    if overrides:
        raw.update(overrides)
    return RunConfig.from_mapping(raw)
