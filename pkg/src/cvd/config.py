"""JSON experiment configuration: parsing, defaults and validation."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from . import __version__, analytic
from .errors import ConfigError
from .loss import FIRST_ORDER_GUARD
from .params import LossParams, ProtocolParams, SqueezeSpec
from .qnd import ADIABATIC_LIMIT, CavityParams, signal_slope

# reference-scale defaults; every field can be overridden from the config file
PROTOCOL_DEFAULTS = {"m": 2, "r": None, "lambda": None, "tail_tol": 1e-12, "j_max": None,
                     "j": 2, "m_list": [1, 2, 3, 4, 5, 6, 7, 8]}
LOSS_DEFAULTS = {"eta_a": 1.0, "eta_b": 1.0, "tau": 0.01,
                 "tau_scan": [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2], "guard": FIRST_ORDER_GUARD}
CAVITY_DEFAULTS = {"chi_over_2pi_hz": 1e5, "gamma_over_2pi_hz": 1e8, "kappa_over_2pi_hz": 4e6,
                   "g": 100.0, "t_meas_s": 8e-9, "lo_phase": 0.0, "n_bar": None,
                   "n_tot": [0, 1, 2, 3, 4, 5], "sde_trajectories": 200}
RUN_DEFAULTS = {"n_shots": 10000, "seed": 0, "threshold": analytic.SMALL}
SECTIONS = {"protocol": PROTOCOL_DEFAULTS, "loss": LOSS_DEFAULTS, "cavity": CAVITY_DEFAULTS,
            "run": RUN_DEFAULTS}


@dataclass
class ExperimentConfig:
    protocol: dict = field(default_factory=dict)
    loss: dict = field(default_factory=dict)
    cavity: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    source: str = ""

    @property
    def squeeze(self) -> SqueezeSpec:
        p = self.protocol
        if p["lambda"] is not None:
            return SqueezeSpec.from_lambda(p["lambda"])
        return SqueezeSpec.from_r(1.0 if p["r"] is None else p["r"])

    @property
    def protocol_params(self) -> ProtocolParams:
        p = self.protocol
        return ProtocolParams(m=p["m"], squeeze=self.squeeze, j_max=p["j_max"],
                              tail_tol=p["tail_tol"])

    @property
    def loss_params(self) -> LossParams:
        lo = self.loss
        return LossParams(lo["eta_a"], lo["eta_b"], lo["tau"])

    @property
    def cavity_params(self) -> CavityParams:
        c = self.cavity
        return CavityParams.from_hz(c["chi_over_2pi_hz"], c["gamma_over_2pi_hz"],
                                    c["kappa_over_2pi_hz"], c["g"], c["t_meas_s"], c["lo_phase"])

    @property
    def n_bar(self) -> float:
        nb = self.cavity["n_bar"]
        return self.squeeze.n_bar if nb is None else nb

    @property
    def seed(self) -> int:
        return self.run["seed"]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def meta(self) -> dict:
        return {"config_hash": self.hash(), "seed": self.seed, "version": __version__}


def _line_of(text: str, *keys) -> int | None:
    """Best-effort line number of the last key in ``keys``, searched in order."""
    lines = text.splitlines()
    start = 0
    found = None
    for key in keys:
        needle = f'"{key}"'
        for i in range(start, len(lines)):
            if needle in lines[i]:
                found, start = i + 1, i + 1
                break
        else:
            return found
    return found


def _num(text, section, key, value, *, integer=False, minimum=None, strict=False):
    bad = isinstance(value, bool) or not isinstance(value, (int, float))
    if integer and not bad:
        bad = not float(value).is_integer()
    if bad or not math.isfinite(value):
        kind = "an integer" if integer else "a finite number"
        raise ConfigError(f"{section}.{key} must be {kind}, got {value!r}",
                          _line_of(text, section, key))
    if minimum is not None and (value <= minimum if strict else value < minimum):
        op = ">" if strict else ">="
        raise ConfigError(f"{section}.{key} must be {op} {minimum}, got {value!r}",
                          _line_of(text, section, key))
    return int(value) if integer else float(value)


def parse_config(text: str, seed: int | None = None) -> ExperimentConfig:
    """Parse and validate a JSON config; raises :class:`ConfigError` with a line number."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", 1)
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(f"unknown section {key!r}", _line_of(text, key))
    out = {}
    for name, defaults in SECTIONS.items():
        given = raw.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {name!r} must be an object", _line_of(text, name))
        for key in given:
            if key not in defaults:
                raise ConfigError(f"unknown key {name}.{key}", _line_of(text, name, key))
        merged = dict(defaults)
        merged.update(given)
        out[name] = merged

    p = out["protocol"]
    p["m"] = _num(text, "protocol", "m", p["m"], integer=True, minimum=1)
    p["j"] = _num(text, "protocol", "j", p["j"], integer=True, minimum=0)
    p["tail_tol"] = _num(text, "protocol", "tail_tol", p["tail_tol"], minimum=0, strict=True)
    if p["j_max"] is not None:
        p["j_max"] = _num(text, "protocol", "j_max", p["j_max"], integer=True, minimum=0)
    if p["r"] is not None and p["lambda"] is not None:
        raise ConfigError("give exactly one of protocol.r and protocol.lambda",
                          _line_of(text, "protocol", "lambda"))
    if "protocol" in raw and p["r"] is None and p["lambda"] is None:
        raise ConfigError("protocol needs one of r or lambda", _line_of(text, "protocol"))
    if p["r"] is not None:
        p["r"] = _num(text, "protocol", "r", p["r"], minimum=0)
    if p["lambda"] is not None:
        lam = _num(text, "protocol", "lambda", p["lambda"], minimum=0)
        if lam >= 1:
            raise ConfigError("lambda must be < 1", _line_of(text, "protocol", "lambda"))
        p["lambda"] = lam
    if not isinstance(p["m_list"], list) or not p["m_list"]:
        raise ConfigError("protocol.m_list must be a non-empty list",
                          _line_of(text, "protocol", "m_list"))
    p["m_list"] = [_num(text, "protocol", "m_list", v, integer=True, minimum=1)
                   for v in p["m_list"]]

    lo = out["loss"]
    for key in ("eta_a", "eta_b", "tau"):
        lo[key] = _num(text, "loss", key, lo[key], minimum=0)
    lo["guard"] = _num(text, "loss", "guard", lo["guard"], minimum=0, strict=True)
    if not isinstance(lo["tau_scan"], list) or not lo["tau_scan"]:
        raise ConfigError("loss.tau_scan must be a non-empty list",
                          _line_of(text, "loss", "tau_scan"))
    lo["tau_scan"] = [_num(text, "loss", "tau_scan", v, minimum=0, strict=True)
                      for v in lo["tau_scan"]]

    c = out["cavity"]
    for key in ("chi_over_2pi_hz", "kappa_over_2pi_hz", "g"):
        c[key] = _num(text, "cavity", key, c[key], minimum=0)
    for key in ("gamma_over_2pi_hz", "t_meas_s"):
        c[key] = _num(text, "cavity", key, c[key], minimum=0, strict=True)
    c["lo_phase"] = _num(text, "cavity", "lo_phase", c["lo_phase"])
    if c["n_bar"] is not None:
        c["n_bar"] = _num(text, "cavity", "n_bar", c["n_bar"], minimum=0)
    if not isinstance(c["n_tot"], list) or not c["n_tot"]:
        raise ConfigError("cavity.n_tot must be a non-empty list", _line_of(text, "cavity", "n_tot"))
    c["n_tot"] = [_num(text, "cavity", "n_tot", v, integer=True, minimum=0) for v in c["n_tot"]]
    c["sde_trajectories"] = _num(text, "cavity", "sde_trajectories", c["sde_trajectories"],
                                 integer=True, minimum=0)

    r = out["run"]
    r["n_shots"] = _num(text, "run", "n_shots", r["n_shots"], integer=True, minimum=1)
    r["seed"] = _num(text, "run", "seed", r["seed"], integer=True, minimum=0)
    r["threshold"] = _num(text, "run", "threshold", r["threshold"], minimum=0, strict=True)
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {seed}")
        r["seed"] = int(seed)
    return ExperimentConfig(source=text, **out)


def diagnostics(cfg: ExperimentConfig, command: str | None = None) -> list:
    """Warnings for validity conditions that fail without making the config invalid.

    ``command`` narrows the checks to one subcommand; ``None`` checks all.
    """
    def wants(*names):
        return command is None or command in names

    warn = []
    thr = cfg.run["threshold"]
    spec = cfg.squeeze
    loss = cfg.loss_params
    m = cfg.protocol["m"]
    if wants("simulate-loss"):
        guard = cfg.loss["guard"]
        top = max(cfg.loss["tau_scan"] + [loss.tau])
        for side, eta in (("a", loss.eta_a), ("b", loss.eta_b)):
            if eta * loss.tau > guard:
                warn.append(f"eta_{side}*tau = {eta * loss.tau:.3g} exceeds the first-order "
                            f"trajectory guard {guard}; trajectories will be skipped")
            elif eta * top > guard:
                warn.append(f"eta_{side}*tau reaches {eta * top:.3g} on tau_scan, beyond the "
                            f"first-order guard {guard} (the exact channel is still used)")
        dj = analytic.double_jump_bound(m, spec, loss)
        if dj >= thr:
            warn.append(f"double-jump figure m^2 n^2 eta_a eta_b tau^2 = {dj:.3g} is not "
                        f"small (threshold {thr})")
        if loss.eta_b > loss.eta_a:
            ab = analytic.asymmetric_bound(spec, loss.eta_a, loss.tau)
            if ab >= thr:
                warn.append(f"asymmetric-noise figure n eta_a tau = {ab:.3g} is not small "
                            f"(threshold {thr})")
    if wants("simulate-qnd", "feasibility"):
        cav = cfg.cavity_params
        if signal_slope(cav) == 0:
            warn.append("zero signal slope: chi or g is zero")
        n_top = max(cfg.cavity["n_tot"])
        ratio = cav.adiabatic_ratio(n_top)
        if ratio >= ADIABATIC_LIMIT:
            warn.append(f"adiabatic ratio chi*n/gamma = {ratio:.3g} at n={n_top} is not "
                        f"below {ADIABATIC_LIMIT}")
        if wants("simulate-qnd") and cav.gamma * cav.t_meas < 5:
            warn.append(f"gamma*t_meas = {cav.gamma * cav.t_meas:.3g} < 5: the SDE check "
                        "will be skipped")
    return warn
