"""Flat ``key=value`` run configuration with dotted namespaces.

Blank lines and ``#`` comments are ignored. Unknown keys are rejected.
List values are comma separated; single elements of ``scenario.beta`` and
``scenario.gamma`` can be set with an index suffix (``scenario.beta.1=-1``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .errors import InputError
from .mm import MMConfig
from .pipeline import FitOptions
from .sim import DEFAULT_BETA, DEFAULT_GAMMA, KINDS, RE_DISTS, ScenarioConfig


@dataclass(frozen=True)
class Key:
    name: str
    type: str  # int, float, str, bool, floats, opt_int, opt_str
    default: object = None
    choices: tuple = ()


KEYS = {k.name: k for k in [
    Key("scenario.kind", "str", "latent_subgroup", KINDS),
    Key("scenario.K", "opt_int"),
    Key("scenario.beta", "floats"),
    Key("scenario.gamma", "floats", DEFAULT_GAMMA),
    Key("scenario.gamma_scale", "float", 1.0),
    Key("scenario.sigma2", "float", 2.0),
    Key("scenario.n_min", "opt_int"),
    Key("scenario.n_max", "opt_int"),
    Key("scenario.alpha1", "float", 0.0),
    Key("scenario.alpha2", "float", 0.0),
    Key("scenario.re_dist", "str", "normal", RE_DISTS),
    Key("scenario.tau2_true", "float", 1.0),
    Key("scenario.replicates", "int", 100),
    Key("scenario.seed", "int", 20240101),
    Key("scenario.covariates", "opt_str"),
    Key("fit.tau_method", "str", "reml", ("reml", "nn", "both")),
    Key("fit.order_h", "int", 1),
    Key("fit.standardize", "bool", False),
    Key("fit.nn_seed", "int", 0),
    Key("fit.intercept", "bool", False),
    Key("mm.max_iter", "int", 500),
    Key("mm.tol_beta", "float", 1e-9),
    Key("mm.tol_q", "float", 1e-12),
    Key("mm.init", "str", "mle", ("mle", "zeros")),
    Key("mm.multistart", "int", 0),
    Key("mm.multistart_scale", "float", 1.0),
    Key("mm.seed", "opt_int"),
    Key("sweep.key", "opt_str"),
    Key("sweep.values", "floats", ()),
    Key("output.dir", "str", "."),
]}

_INDEXED = re.compile(r"^scenario\.(beta|gamma)\.(\d+)$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_lines(text: str, source: str = "<config>") -> list:
    """``[(key, value, line_no)]`` in file order; syntax errors name the line."""
    out = []
    seen = {}
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise InputError(f"{source}:{no}: expected key=value, got {s!r}")
        key, value = (part.strip() for part in s.split("=", 1))
        if not key:
            raise InputError(f"{source}:{no}: empty key")
        check_key(key, f"{source}:{no}")
        if key in seen:
            raise InputError(f"{source}:{no}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = no
        out.append((key, value, no))
    return out


def check_key(key: str, where: str = "") -> None:
    if key in KEYS or _INDEXED.match(key):
        return
    prefix = f"{where}: " if where else ""
    raise InputError(f"{prefix}unknown config key {key!r}")


def convert(key: str, value: str):
    if _INDEXED.match(key):
        return _float(key, value)
    spec = KEYS[key]
    t = spec.type
    if t == "int":
        v = _int(key, value)
    elif t == "opt_int":
        v = None if value.lower() in ("", "none") else _int(key, value)
    elif t == "float":
        v = _float(key, value)
    elif t == "bool":
        low = value.lower()
        if low not in _TRUE | _FALSE:
            raise InputError(f"{key}: expected a boolean, got {value!r}")
        v = low in _TRUE
    elif t == "floats":
        v = tuple(_float(key, x) for x in value.split(",") if x.strip()) if value.strip() else ()
    elif t == "opt_str":
        v = None if value.lower() in ("", "none") else value
    else:
        v = value
    if spec.choices and v not in spec.choices:
        raise InputError(f"{key}: {v!r} is not one of {spec.choices}")
    return v


def _int(key, value):
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{key}: expected an integer, got {value!r}") from None


def _float(key, value):
    try:
        return float(value)
    except ValueError:
        raise InputError(f"{key}: expected a number, got {value!r}") from None


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(float(x)) for x in value)
    return str(value)


def resolve(pairs) -> dict:
    """Typed, fully populated settings from ``(key, value)`` pairs.

    Per-kind defaults (K, n range, beta) are filled in, and index overrides
    are folded into their vectors, so the result is self-contained.
    """
    cfg = {name: spec.default for name, spec in KEYS.items()}
    indexed = []
    for key, value, *_ in pairs:
        check_key(key)
        if _INDEXED.match(key):
            indexed.append((key, convert(key, value)))
        else:
            cfg[key] = convert(key, value)
    kind = cfg["scenario.kind"]
    probe = ScenarioConfig(kind=kind, K=cfg["scenario.K"], n_min=cfg["scenario.n_min"],
                           n_max=cfg["scenario.n_max"],
                           beta=cfg["scenario.beta"] or DEFAULT_BETA[kind])
    cfg["scenario.K"], cfg["scenario.n_min"], cfg["scenario.n_max"] = probe.K, probe.n_min, probe.n_max
    cfg["scenario.beta"] = tuple(cfg["scenario.beta"] or DEFAULT_BETA[kind])
    for key, val in indexed:
        cfg = set_value(cfg, key, val)
    return cfg


def set_value(cfg: dict, key: str, value) -> dict:
    """Copy of ``cfg`` with one (possibly indexed) key replaced."""
    out = dict(cfg)
    m = _INDEXED.match(key)
    if m:
        name = f"scenario.{m.group(1)}"
        vec = list(out[name])
        i = int(m.group(2))
        if i >= len(vec):
            raise InputError(f"{key}: index {i} out of range for {name} of length {len(vec)}")
        vec[i] = float(value)
        out[name] = tuple(vec)
    else:
        check_key(key)
        out[key] = value
    return out


def load(text: str = "", overrides=(), source: str = "<config>") -> dict:
    """Parse config text, then apply ``key=value`` override strings."""
    pairs = []
    for k, v, no in parse_lines(text, source):
        try:
            convert(k, v)
        except InputError as exc:
            raise InputError(f"{source}:{no}: {exc}") from None
        pairs.append((k, v))
    for ov in overrides:
        if "=" not in ov:
            raise InputError(f"override {ov!r}: expected key=value")
        k, v = (p.strip() for p in ov.split("=", 1))
        check_key(k)
        pairs = [(pk, pv) for pk, pv in pairs if pk != k] + [(k, v)]
    return resolve(pairs)


def dump(cfg: dict) -> str:
    """Canonical text form: sorted keys, round-trip exact floats.

    ``output.dir`` is left out so that outputs do not depend on where they
    were written.
    """
    return "".join(f"{k}={_format(cfg[k])}\n" for k in sorted(cfg) if k != "output.dir")


def parse_sweep(spec: str):
    """``"scenario.beta.1=-1,0,1"`` -> ``("scenario.beta.1", (-1.0, 0.0, 1.0))``."""
    if "=" not in spec:
        raise InputError(f"sweep {spec!r}: expected key=v1,v2,...")
    key, values = (p.strip() for p in spec.split("=", 1))
    check_key(key)
    if key in ("scenario.kind", "scenario.beta", "scenario.gamma") or key.startswith("sweep."):
        raise InputError(f"sweep over {key!r} is not supported; sweep a scalar key")
    if not _INDEXED.match(key) and KEYS[key].type not in ("int", "float", "opt_int"):
        raise InputError(f"sweep over {key!r} is not supported; sweep a numeric key")
    vals = tuple(_float(key, v) for v in values.split(",") if v.strip())
    if not vals:
        raise InputError(f"sweep {spec!r}: no values")
    return key, vals


def sweep_points(cfg: dict) -> list:
    """``[(value_or_None, cfg_at_point)]`` for the configured sweep."""
    key = cfg["sweep.key"]
    if key is None:
        return [(None, cfg)]
    parse_sweep(f"{key}=0")  # validates the key
    out = []
    for v in cfg["sweep.values"]:
        typed = v
        if not _INDEXED.match(key) and KEYS[key].type in ("int", "opt_int"):
            if v != int(v):
                raise InputError(f"sweep value {v} for integer key {key}")
            typed = int(v)
        out.append((v, set_value(cfg, key, typed)))
    return out


def scenario_config(cfg: dict) -> ScenarioConfig:
    return ScenarioConfig(
        kind=cfg["scenario.kind"], K=cfg["scenario.K"], beta=cfg["scenario.beta"],
        gamma=cfg["scenario.gamma"], gamma_scale=cfg["scenario.gamma_scale"],
        sigma2=cfg["scenario.sigma2"], n_min=cfg["scenario.n_min"], n_max=cfg["scenario.n_max"],
        alpha1=cfg["scenario.alpha1"], alpha2=cfg["scenario.alpha2"],
        re_dist=cfg["scenario.re_dist"], tau2_true=cfg["scenario.tau2_true"],
        replicates=cfg["scenario.replicates"], seed=cfg["scenario.seed"],
        covariates=cfg["scenario.covariates"], tau_method=cfg["fit.tau_method"],
        order_h=cfg["fit.order_h"], standardize=cfg["fit.standardize"],
    )


def mm_config(cfg: dict) -> MMConfig:
    return MMConfig(max_iter=cfg["mm.max_iter"], tol_beta=cfg["mm.tol_beta"], tol_q=cfg["mm.tol_q"],
                    init=cfg["mm.init"], multistart=cfg["mm.multistart"],
                    multistart_scale=cfg["mm.multistart_scale"], seed=cfg["mm.seed"])


def fit_options(cfg: dict) -> FitOptions:
    tm = cfg["fit.tau_method"]
    if tm == "both":
        raise InputError("fit.tau_method=both is only meaningful for simulate")
    return FitOptions(tau_method=tm, risk_order=cfg["fit.order_h"], mm=mm_config(cfg),
                      nn_seed=cfg["fit.nn_seed"], standardize=cfg["fit.standardize"])


def embedded_text(path: str) -> Optional[str]:
    """Config lines embedded in an output CSV's provenance header, if any."""
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("#config "):
                lines.append(line[len("#config "):])
    return "".join(lines) if lines else None


def read_config_file(path: str) -> str:
    """Text of a config file, or the config embedded in a previous output CSV."""
    emb = embedded_text(path)
    if emb is not None:
        return emb
    with open(path, encoding="utf-8") as fh:
        return fh.read()
