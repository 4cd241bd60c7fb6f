"""Structured run configuration with a canonical JSON form.

One tree covers geometry, channel physics, pilots, solver settings, and
benchmark settings. Every field has a desk-scale default. Serialization
is canonical: field order is fixed, complex values are [re, im] pairs,
ranges are [lo, hi] pairs, so ``to_json(from_json(s))`` is a fixed point.
CLI flags override file values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .channel import ArrayGeometry, ChannelConfig, PilotConfig
from .errors import ValidationError

__all__ = ["SolverSettings", "BenchmarkSettings", "RunConfig", "from_dict", "to_dict"]


@dataclass(frozen=True)
class SolverSettings:
    lam: float = 0.15  # L1 weight (multiplier under the "noise" rule)
    lam_rule: str = "noise"  # noise: lam * sqrt(noise_var * 2 ln 2N); fixed: lam as-is
    sigma: float = 1.0
    max_iter: int = 500
    tol: float = 1e-8
    damping_rho: float = 1.0
    stop_criterion: str = "eta_rel"
    x_tol: float = 1e-2
    weights: str | None = None  # PRDW path for the learned-denoiser mode

    def __post_init__(self):
        if self.lam_rule not in ("noise", "fixed"):
            raise ValidationError(f"solver.lam_rule must be 'noise' or 'fixed', got {self.lam_rule!r}")

    def effective_lam(self, noise_var: float, two_n: int) -> float:
        """Per-instance L1 weight under the configured rule."""
        if self.lam_rule == "fixed":
            return self.lam
        return self.lam * math.sqrt(max(noise_var, 0.0) * 2.0 * math.log(two_n))


@dataclass(frozen=True)
class BenchmarkSettings:
    n_fit: int = 2000  # held-out samples for the LMMSE covariance
    timing_repeats: int = 0  # 0 keeps reports bit-deterministic
    curve_iters: int = 50
    curve_samples: int = 20
    nmse_squared: bool = True  # False reproduces the literal unsquared ratio


@dataclass(frozen=True)
class RunConfig:
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    pilot: PilotConfig = field(default_factory=PilotConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)
    seed: int = 0
    threads: int = 1


def to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    ch = d["channel"]
    ch["n_t"] = [cfg.channel.n_t.real, cfg.channel.n_t.imag]
    for key in ("theta_range", "phi_range", "phi_in_range", "r_range", "tau_range"):
        ch[key] = list(ch[key])
    return d


def to_json(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


def _build(cls, data: dict, what: str):
    try:
        return cls(**data)
    except TypeError as exc:
        raise ValidationError(f"bad {what} section: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    data = dict(data)
    unknown = set(data) - {"geometry", "channel", "pilot", "solver", "benchmark", "seed", "threads"}
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    ch = dict(data.get("channel", {}))
    if "n_t" in ch and isinstance(ch["n_t"], (list, tuple)):
        re, im = ch["n_t"]
        ch["n_t"] = complex(re, im)
    for key in ("theta_range", "phi_range", "phi_in_range", "r_range", "tau_range"):
        if key in ch:
            ch[key] = tuple(ch[key])
    return RunConfig(
        geometry=_build(ArrayGeometry, data.get("geometry", {}), "geometry"),
        channel=_build(ChannelConfig, ch, "channel"),
        pilot=_build(PilotConfig, data.get("pilot", {}), "pilot"),
        solver=_build(SolverSettings, data.get("solver", {}), "solver"),
        benchmark=_build(BenchmarkSettings, data.get("benchmark", {}), "benchmark"),
        seed=int(data.get("seed", 0)),
        threads=int(data.get("threads", 1)),
    )


def from_json(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config root must be an object")
    return from_dict(data)


def load(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json(fh.read())
