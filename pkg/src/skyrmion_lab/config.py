"""Run configuration and manifest."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields

from . import __version__


class ConfigError(ValueError):
    pass


def parse_modes(value) -> list[int]:
    """Accept ``[0, 1, 2]``, ``"0,1,2"`` or ``"0..5"``."""
    if isinstance(value, str):
        m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", value)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            return list(range(lo, hi + 1))
        try:
            return [int(p) for p in value.split(",") if p.strip()]
        except ValueError:
            raise ConfigError(f"modes: cannot parse {value!r}") from None
    return [int(k) for k in value]


@dataclass
class RunConfig:
    h: float = 50.0
    n_radial: int = 4096
    R: float | None = None
    r0_ratio: float = 1e-8
    tol: float = 1e-8
    raster_n: int = 512
    raster_graded: bool = True
    write_field: bool = False
    modes: list = field(default_factory=lambda: list(range(6)))
    eig_count: int = 1
    refine_check: bool = True
    alpha: float = 0.1
    beta: float = 0.2
    v: list = field(default_factory=lambda: [0.01, 0.0])
    dyn_h: float = 2.0
    dyn_n: int = 128
    dyn_L: float = 10.0
    T: float = 10.0
    dt: float | None = None
    record_every: int = 50
    relax_steps: int = 200
    identity_samples: int = 10
    identity_scale: float = 0.1
    coercivity_samples: int = 20
    seed: int = 0
    output: str = "skyrmion_out"
    threads: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def updated(self, overrides: dict) -> "RunConfig":
        data = asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(data)

    def validate(self) -> None:
        def check(key, ok):
            if not ok:
                raise ConfigError(f"invalid value for {key!r}: {getattr(self, key)!r}")

        def number(key, cast=float):
            try:
                setattr(self, key, cast(getattr(self, key)))
            except (TypeError, ValueError):
                raise ConfigError(f"invalid value for {key!r}: {getattr(self, key)!r}") from None

        for key in ("h", "r0_ratio", "tol", "alpha", "beta", "dyn_h", "dyn_L", "T",
                    "identity_scale"):
            number(key)
        for key in ("n_radial", "raster_n", "eig_count", "dyn_n", "record_every", "relax_steps",
                    "identity_samples", "coercivity_samples", "seed"):
            number(key, int)
        if self.R is not None:
            number("R")
            check("R", self.R > 0)
        if self.dt is not None:
            number("dt")
            check("dt", self.dt > 0)
        if self.threads is not None:
            number("threads", int)
            check("threads", self.threads >= 1)
        check("h", self.h > 1)
        check("n_radial", self.n_radial >= 256)
        check("r0_ratio", 0 < self.r0_ratio <= 1e-4)
        check("tol", 1e-12 <= self.tol <= 1e-6)
        check("raster_n", self.raster_n >= 16)
        self.modes = parse_modes(self.modes)
        check("modes", len(self.modes) > 0 and all(0 <= k <= 8 for k in self.modes))
        self.modes = sorted(set(self.modes))
        check("eig_count", 1 <= self.eig_count <= 4)
        check("alpha", self.alpha > 0)
        check("beta", self.beta > 0)
        try:
            self.v = [float(x) for x in self.v]
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for 'v': {self.v!r}") from None
        check("v", len(self.v) == 2)
        check("dyn_h", self.dyn_h > 1)
        check("dyn_n", self.dyn_n >= 32)
        check("dyn_L", self.dyn_L > 0)
        check("T", self.T > 0)
        check("record_every", self.record_every >= 1)
        check("relax_steps", self.relax_steps >= 0)
        check("identity_samples", self.identity_samples >= 1)
        check("identity_scale", 0 < self.identity_scale <= 0.5)
        check("coercivity_samples", self.coercivity_samples >= 1)
        for key in ("raster_graded", "write_field", "refine_check"):
            check(key, isinstance(getattr(self, key), bool))
        check("output", isinstance(self.output, str) and self.output != "")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of every setting that can change a numerical output."""
        data = self.to_dict()
        data.pop("output")
        data.pop("threads")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class StageRecord:
    status: str = "skipped"
    seconds: float = 0.0
    error: str | None = None


@dataclass
class RunManifest:
    command: str
    config: dict
    config_hash: str
    version: str = __version__
    stages: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    verifications: dict = field(default_factory=dict)
    exit_code: int = 0

    @property
    def passed(self) -> bool:
        return all(self.verifications.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d
