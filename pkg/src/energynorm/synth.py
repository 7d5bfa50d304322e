"""Synthetic energy tables with known ground truth.

Energy of model m on hardware h::

    E = base + kwh_per_gflop * G + kwh_per_mparam * M + quad_coeff * G**2

with G the forward GFLOPs and M the parameter count in millions, times
exp(noise_sigma * g) for a standard normal g. Coefficients in the shipped
scenarios are illustrative guesses, not measurements.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .archcost import ArchitectureConfig, count_cost, enumerate_study_configs, load_configs
from .dataset import EnergyRecord, HardwareSpec, MeasurementTable


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticHardwareModel:
    hardware_id: str
    base_kwh: float = 0.0
    kwh_per_gflop: float = 0.0
    kwh_per_mparam: float = 0.0
    quad_coeff: float = 0.0
    noise_sigma: float = 0.0
    name: str = ""
    tdp_watts: float = 250.0
    memory_gib: float = 11.0

    def __post_init__(self):
        if self.base_kwh < 0:
            raise SynthError(f"{self.hardware_id}: base_kwh must be >= 0")
        if self.noise_sigma < 0:
            raise SynthError(f"{self.hardware_id}: noise_sigma must be >= 0")

    def energy(self, gflops: float, mparams: float) -> float:
        return (self.base_kwh + self.kwh_per_gflop * gflops + self.kwh_per_mparam * mparams
                + self.quad_coeff * gflops * gflops)

    def hardware_spec(self) -> HardwareSpec:
        return HardwareSpec(self.hardware_id, self.name or self.hardware_id, self.tdp_watts, self.memory_gib)

    def to_dict(self) -> dict:
        return asdict(self)


def generate(configs: Sequence[ArchitectureConfig], hw_models: Sequence[SyntheticHardwareModel], seed: int = 0,
             epochs: int = 10, batch_size: int = 8) -> MeasurementTable:
    if not configs:
        raise SynthError("no configs given")
    if not hw_models:
        raise SynthError("no hardware models given")
    ids = [h.hardware_id for h in hw_models]
    if len(set(ids)) != len(ids):
        raise SynthError(f"duplicate hardware ids in {ids}")
    costs = [count_cost(c) for c in configs]
    # one draw per (hardware, model) in a fixed order so tables depend only on the seed
    g = np.random.Generator(np.random.PCG64(seed)).standard_normal((len(hw_models), len(costs)))
    records = []
    for hi, hw in enumerate(hw_models):
        for mi, cost in enumerate(costs):
            clean = hw.energy(cost.flops_forward / 1e9, cost.params / 1e6)
            energy = clean * float(np.exp(hw.noise_sigma * g[hi, mi])) if hw.noise_sigma else clean
            if not (energy > 0 and np.isfinite(energy)):
                raise SynthError(f"{hw.hardware_id}/{cost.model_id}: generated energy {energy} is not positive")
            records.append(EnergyRecord(cost.model_id, hw.hardware_id, float(energy), epochs, batch_size,
                                        cost.flops_forward, cost.params))
    return MeasurementTable([h.hardware_spec() for h in hw_models], records)


@dataclass
class Scenario:
    hardware: list[SyntheticHardwareModel]
    configs: list[ArchitectureConfig]
    description: str = ""
    config_set: str = "study"

    def generate(self, seed: int = 0) -> MeasurementTable:
        return generate(self.configs, self.hardware, seed)


def _configs_for(config_set: str, base: Optional[Path]) -> list[ArchitectureConfig]:
    if config_set == "study":
        return [c for _, c in enumerate_study_configs()]
    path = Path(config_set)
    if base is not None and not path.is_absolute():
        path = base / path
    return load_configs(path)


def scenario_from_dict(d: dict, base: Optional[Path] = None) -> Scenario:
    config_set = d.get("config_set", "study")
    hardware = [SyntheticHardwareModel(**h) for h in d["hardware"]]
    return Scenario(hardware, _configs_for(config_set, base), d.get("description", ""), config_set)


def load_scenario(path: str | Path) -> Scenario:
    """Scenario JSON: {"description", "config_set": "study" | path to a config list, "hardware": [...]}."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SynthError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(data, path.parent)


def builtin_scenarios() -> list[str]:
    files = resources.files("energynorm.scenarios").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def builtin_scenario(name: str = "default") -> Scenario:
    ref = resources.files("energynorm.scenarios") / f"{name}.json"
    if not ref.is_file():
        raise SynthError(f"no built-in scenario {name!r}; available: {builtin_scenarios()}")
    return scenario_from_dict(json.loads(ref.read_text()))


def resolve_scenario(name_or_path: str) -> Scenario:
    if Path(name_or_path).is_file():
        return load_scenario(name_or_path)
    return builtin_scenario(name_or_path)
