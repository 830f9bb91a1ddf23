"""Experiment configuration: flat INI-style files with strict schemas.

A config file has a ``[experiment]`` section naming the experiment kind
plus kind-specific sections. Keys hold scalars or space-separated number
lists; nesting is not supported. Unknown sections or keys are rejected
with the offending name, and every run echoes the fully resolved config
(defaults filled in) next to its outputs so results are self-describing.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_value(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "str":
        return raw.strip()
    if kind == "bool":
        return _parse_bool(raw)
    if kind == "floats":
        return [float(tok) for tok in raw.split()]
    if kind == "ints":
        return [int(tok) for tok in raw.split()]
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split("|")
        val = raw.strip()
        if val not in options:
            raise ValueError(f"must be one of {options}, got {val!r}")
        return val
    raise AssertionError(f"unknown schema type {kind}")


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, list):
        return " ".join(_format_value(v) for v in val)
    if isinstance(val, float):
        return format(val, ".17g")
    return str(val)


# Schema entries: (type, required, default). Optional keys with default
# None are simply absent when not given.
_COMMON = {
    "experiment": {
        "kind": ("str", True, None),
        "seed": ("int", False, 0),
        "threads": ("int", False, 1),
    }
}

_KERNEL = {
    "kernel": {
        "family": ("choice:matern12|matern32|matern52|sqexp", False, "sqexp"),
        "lengthscale": ("float", False, 1.0),
        "variance": ("float", False, 1.0),
        "fit": ("bool", False, False),
        "lengthscale_bounds": ("floats", False, [1e-2, 1e1]),
        "variance_bounds": ("floats", False, [1e-2, 1e1]),
    }
}

_FORWARD = {
    "forward": {
        "type": ("choice:identity|scalar1d|darcy1d", True, None),
        "dim": ("int", False, 1),
        "function": ("str", False, "identity"),
        "breakpoints": ("floats", False, []),
        "observe_at": ("floats", False, [0.25, 0.5, 0.75]),
        "grid_size": ("int", False, 256),
        "p_left": ("float", False, 0.0),
        "p_right": ("float", False, 1.0),
        "source": ("float", False, 0.0),
    }
}

_PRIOR = {
    "prior": {
        "type": ("choice:gaussian|uniform|lognormal", True, None),
        "means": ("floats", False, None),
        "variances": ("floats", False, None),
        "lower": ("floats", False, None),
        "upper": ("floats", False, None),
        "log_means": ("floats", False, None),
        "log_variances": ("floats", False, None),
    }
}

_NOISE = {
    "noise": {
        "gamma_diag": ("floats", True, None),
    }
}

_DATA = {
    "data": {
        "y": ("floats", False, None),
        "synthesize_true_u": ("floats", False, None),
        "synthesize_noise_seed": ("int", False, 0),
    }
}

_DOMAIN = {
    "domain": {
        "box_lo": ("floats", False, None),
        "box_hi": ("floats", False, None),
        "quad_points": ("int", False, None),
    }
}

SCHEMAS = {
    "sample-paths": {
        **_COMMON,
        "grid": {
            "lo": ("float", False, 0.0),
            "hi": ("float", False, 5.0),
            "points": ("int", False, 201),
        },
        "paths": {"count": ("int", False, 5)},
        "conditioning": {
            "function": ("str", False, "sin_shifted_square"),
            "design": ("floats", False, [1.25, 2.5, 3.75]),
        },
    },
    "regress": {
        **_COMMON,
        **_KERNEL,
        "regress": {
            "function": ("str", True, None),
            "design": ("floats", True, None),
            "noise_variance": ("float", False, 0.0),
            "n_paths": ("int", False, 0),
        },
        "grid": {
            "lo": ("float", False, 0.0),
            "hi": ("float", False, 5.0),
            "points": ("int", False, 201),
        },
    },
    "invert": {
        **_COMMON,
        **_KERNEL,
        **_FORWARD,
        **_PRIOR,
        **_NOISE,
        **_DATA,
        **_DOMAIN,
        "surrogate": {
            "kind": ("choice:mean|marginal|sample", False, "mean"),
            "target": ("choice:phi|forward", False, "phi"),
            "n_train": ("int", False, 20),
            "design_measure": ("choice:prior|posterior-truncated|gaussian|uniform", False, "posterior-truncated"),
            "design_center": ("floats", False, None),
            "design_sd": ("floats", False, None),
            "design_lower": ("floats", False, None),
            "design_upper": ("floats", False, None),
            "threshold": ("float", False, None),
            "threshold_rule_c": ("float", False, None),
            "threshold_rule_tau": ("float", False, 1.0),
            "design_density_power": ("float", False, 0.5),
            "sample_seed": ("int", False, 0),
        },
        "mcmc": {
            "steps": ("int", False, 20000),
            "step_size": ("floats", False, None),
            "burn_in_fraction": ("float", False, 0.2),
            "init": ("floats", False, None),
            "run_true_chain": ("bool", False, True),
        },
    },
    "design-study": {
        **_COMMON,
        "measure": {
            "type": ("choice:uniform|gaussian", True, None),
            "center": ("floats", False, None),
            "sd": ("floats", False, None),
            "lower": ("floats", False, None),
            "upper": ("floats", False, None),
        },
        "region": {
            "box_lo": ("floats", True, None),
            "box_hi": ("floats", True, None),
        },
        "study": {
            "n_list": ("ints", True, None),
            "replications": ("int", False, 200),
            "resolution": ("int", False, 512),
            "tail_threshold": ("float", False, None),
        },
    },
    "design-study-gaussian": {
        **_COMMON,
        **_KERNEL,
        "study": {
            "sigma_lo": ("float", False, 0.1),
            "sigma_hi": ("float", False, 10.0),
            "sigma_count": ("int", False, 13),
            "n_list": ("ints", False, [2, 4, 8, 16]),
            "replications": ("int", False, 1000),
            "quad_points": ("int", False, 2048),
        },
    },
    "design-study-uniform": {
        **_COMMON,
        **_KERNEL,
        "study": {
            "epsilons": ("floats", False, [0.25, 0.5, 1.0, 2.0]),
            "n_list": ("ints", False, [2, 4, 8, 16]),
            "replications": ("int", False, 1000),
            "quad_points": ("int", False, 2048),
        },
    },
    "hellinger-convergence": {
        **_COMMON,
        **_KERNEL,
        "study": {
            "n_list": ("ints", False, [4, 8, 16, 32, 64]),
            "design_lo": ("float", False, -6.0),
            "design_hi": ("float", False, 7.0),
        },
    },
    "darcy-demo": {
        **_COMMON,
        "darcy": {
            "permeabilities": ("floats", True, None),
            "breakpoints": ("floats", False, []),
            "observe_at": ("floats", False, [0.25, 0.5, 0.75]),
            "grid_size": ("int", False, 256),
            "p_left": ("float", False, 0.0),
            "p_right": ("float", False, 1.0),
            "source": ("float", False, 0.0),
        },
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    values: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[section][key]

    def resolved_text(self) -> str:
        buf = io.StringIO()
        for section in self.values:
            buf.write(f"[{section}]\n")
            for key, val in self.values[section].items():
                if val is None:
                    continue
                buf.write(f"{key} = {_format_value(val)}\n")
            buf.write("\n")
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()


def parse_config(path, seed_override: int | None = None,
                 threads_override: int | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config file against its schema."""
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    if not parser.has_section("experiment") or not parser.has_option("experiment", "kind"):
        raise ConfigError("missing required key experiment.kind")
    kind = parser.get("experiment", "kind").strip()
    if kind not in SCHEMAS:
        raise ConfigError(
            f"experiment.kind: unknown kind {kind!r}; choose from {sorted(SCHEMAS)}"
        )
    schema = SCHEMAS[kind]

    for section in parser.sections():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for kind {kind}")
        for key in parser.options(section):
            if key not in schema[section]:
                raise ConfigError(f"unknown key {section}.{key} for kind {kind}")

    values: dict = {}
    for section, keys in schema.items():
        values[section] = {}
        for key, (typ, required, default) in keys.items():
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    values[section][key] = _parse_value(typ, raw)
                except ValueError as exc:
                    raise ConfigError(f"invalid value for {section}.{key}: {exc}") from exc
            elif key == "kind":
                values[section][key] = kind
            elif required:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                values[section][key] = default

    if seed_override is not None:
        values["experiment"]["seed"] = int(seed_override)
    if threads_override is not None:
        values["experiment"]["threads"] = int(threads_override)

    _validate_semantics(kind, values)
    return ExperimentConfig(kind=kind, values=values)


def _validate_semantics(kind: str, values: dict):
    """Cross-key checks that the per-key parser cannot express."""
    if "kernel" in values:
        k = values["kernel"]
        if k["lengthscale"] <= 0:
            raise ConfigError("kernel.lengthscale must be positive")
        if k["variance"] <= 0:
            raise ConfigError("kernel.variance must be positive")
    if kind == "invert":
        prior = values["prior"]
        needed = {
            "gaussian": ("means", "variances"),
            "uniform": ("lower", "upper"),
            "lognormal": ("log_means", "log_variances"),
        }[prior["type"]]
        for key in needed:
            if prior[key] is None:
                raise ConfigError(f"missing required key prior.{key} for {prior['type']} prior")
        data = values["data"]
        if data["y"] is None and data["synthesize_true_u"] is None:
            raise ConfigError("missing required key data.y (or data.synthesize_true_u)")
    if kind == "design-study":
        m = values["measure"]
        if m["type"] == "uniform" and (m["lower"] is None or m["upper"] is None):
            raise ConfigError("measure.lower/measure.upper required for uniform measure")
        if m["type"] == "gaussian" and (m["center"] is None or m["sd"] is None):
            raise ConfigError("measure.center/measure.sd required for gaussian measure")
        if values["study"]["n_list"] != sorted(values["study"]["n_list"]):
            raise ConfigError("study.n_list must be increasing")
    if kind == "darcy-demo":
        d = values["darcy"]
        if len(d["permeabilities"]) != len(d["breakpoints"]) + 1:
            raise ConfigError(
                "darcy.permeabilities must have one more entry than darcy.breakpoints"
            )
        if any(p <= 0 for p in d["permeabilities"]):
            raise ConfigError("darcy.permeabilities must be positive")
