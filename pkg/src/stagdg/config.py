"""Run configuration: YAML parsing, validation, and serialization.

A config file is a single YAML document with nested sections; see the README
for the full schema.  parse(serialize(cfg)) == cfg holds for every valid
configuration.
"""

from dataclasses import dataclass, field, asdict

import yaml

from .material import IsotropicMaterial
from .scenarios import ScenarioSpec
from .solver import KrylovConfig


class ConfigError(Exception):
    pass


@dataclass
class Receiver:
    id: str
    position: tuple

    def to_dict(self):
        return {"id": self.id, "position": list(self.position)}


@dataclass
class OutputConfig:
    directory: str = "out"
    field_dump_every: int = 0         # 0 disables VTK dumps
    sample_level: int = 1             # triangle subdivision for field output


@dataclass
class RunConfig:
    mesh: str = ""
    p: int = 1
    p_gamma: int = 0
    mode: str = "cn"                  # 'cn' | 'spacetime'
    dt: float = 0.0
    t_end: float = 0.0
    dt_factor: float = 0.0            # dt = dt_factor * h (convergence runs)
    solver: KrylovConfig = field(default_factory=lambda: KrylovConfig(method="auto"))
    preconditioner: str = "none"      # 'none' | 'pre1' | 'pre2'
    materials: dict = field(default_factory=dict)   # region_id -> IsotropicMaterial
    bc: str = "free_surface"          # boundary edges not paired periodically
    scenario: ScenarioSpec = field(default_factory=lambda: ScenarioSpec("custom"))
    receivers: list = field(default_factory=list)
    output: OutputConfig = field(default_factory=OutputConfig)
    reproducible: bool = False

    def validate(self):
        if self.p < 1:
            raise ConfigError("p must be >= 1")
        if self.p_gamma < 0:
            raise ConfigError("p_gamma must be >= 0")
        if self.mode not in ("cn", "spacetime"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "cn" and self.p_gamma != 0:
            raise ConfigError("mode 'cn' requires p_gamma = 0")
        if self.dt <= 0 and self.dt_factor <= 0:
            raise ConfigError("either dt or dt_factor must be positive")
        if self.dt > 0 and self.t_end < self.dt:
            raise ConfigError("t_end must be at least one time step")
        if self.preconditioner not in ("none", "pre1", "pre2"):
            raise ConfigError(f"unknown preconditioner {self.preconditioner!r}")
        if self.bc not in ("free_surface", "periodic"):
            raise ConfigError(f"unknown boundary condition {self.bc!r}")
        if not self.materials:
            raise ConfigError("at least one material is required")
        seen = set()
        for r in self.receivers:
            if r.id in seen:
                raise ConfigError(f"duplicate receiver id {r.id!r}")
            seen.add(r.id)
        return self


def _material_from_dict(d):
    d = dict(d)
    region = d.pop("region_id")
    if "cp" in d or "cs" in d:
        mat = IsotropicMaterial.from_speeds(d["cp"], d["cs"], d["rho"])
    else:
        mat = IsotropicMaterial(d["lambda"], d["mu"], d["rho"])
    return int(region), mat


def config_from_dict(d):
    d = dict(d)
    try:
        materials = dict(_material_from_dict(m) for m in d.get("materials", []))
        solver = KrylovConfig(**d.get("solver", {"method": "auto"}))
        scenario = ScenarioSpec.from_dict(d.get("scenario", {"kind": "custom"}))
        receivers = [Receiver(str(r["id"]), tuple(float(v) for v in r["position"]))
                     for r in d.get("receivers", [])]
        output = OutputConfig(**d.get("output", {}))
        cfg = RunConfig(
            mesh=d.get("mesh", ""),
            p=int(d.get("p", 1)),
            p_gamma=int(d.get("p_gamma", 0)),
            mode=d.get("mode", "cn"),
            dt=float(d.get("dt", 0.0)),
            t_end=float(d.get("t_end", 0.0)),
            dt_factor=float(d.get("dt_factor", 0.0)),
            solver=solver,
            preconditioner=d.get("preconditioner", "none"),
            materials=materials,
            bc=d.get("bc", "free_surface"),
            scenario=scenario,
            receivers=receivers,
            output=output,
            reproducible=bool(d.get("reproducible", False)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    return cfg.validate()


def config_to_dict(cfg):
    return {
        "mesh": cfg.mesh,
        "p": cfg.p,
        "p_gamma": cfg.p_gamma,
        "mode": cfg.mode,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "dt_factor": cfg.dt_factor,
        "solver": asdict(cfg.solver),
        "preconditioner": cfg.preconditioner,
        "materials": [{"region_id": r, "lambda": m.lam, "mu": m.mu, "rho": m.rho}
                      for r, m in sorted(cfg.materials.items())],
        "bc": cfg.bc,
        "scenario": cfg.scenario.to_dict(),
        "receivers": [r.to_dict() for r in cfg.receivers],
        "output": asdict(cfg.output),
        "reproducible": cfg.reproducible,
    }


def load_config(path):
    with open(path) as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a YAML mapping at top level")
    return config_from_dict(data)


def save_config(path, cfg):
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)


def parse_config_text(text):
    return config_from_dict(yaml.safe_load(text))


def serialize_config(cfg):
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
