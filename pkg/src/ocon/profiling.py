"""Wall time, model size and a constant-power energy/CO2 estimate.

Energy is power x duration for CPU and RAM separately; emissions are total
kWh times a carbon intensity.  The default intensity, 0.2852 kg/kWh, is the
ratio of 0.0081 kg CO2eq to 0.0284 kWh recorded for a 36-minute CPU run on a
South Carolina cloud host; set ``OCON_CARBON_INTENSITY`` for another grid.

Environment overrides: ``OCON_CPU_POWER_W``, ``OCON_RAM_POWER_W``,
``OCON_CARBON_INTENSITY``.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

DEFAULT_CPU_POWER_W = 42.5
DEFAULT_RAM_POWER_W = 4.7543
DEFAULT_CARBON_INTENSITY = 0.2852  # kg CO2eq per kWh
BYTES_PER_PARAM = 4  # float32 deployment


@dataclass(frozen=True)
class EnergyModel:
    cpu_power_watts: float = DEFAULT_CPU_POWER_W
    ram_power_watts: float = DEFAULT_RAM_POWER_W
    carbon_intensity_kg_per_kwh: float = DEFAULT_CARBON_INTENSITY

    def __post_init__(self):
        if min(self.cpu_power_watts, self.ram_power_watts, self.carbon_intensity_kg_per_kwh) < 0:
            raise ValueError("power and carbon intensity must be non-negative")

    @classmethod
    def from_env(cls, environ=None) -> "EnergyModel":
        env = os.environ if environ is None else environ
        return cls(
            cpu_power_watts=float(env.get("OCON_CPU_POWER_W", DEFAULT_CPU_POWER_W)),
            ram_power_watts=float(env.get("OCON_RAM_POWER_W", DEFAULT_RAM_POWER_W)),
            carbon_intensity_kg_per_kwh=float(env.get("OCON_CARBON_INTENSITY", DEFAULT_CARBON_INTENSITY)),
        )


@dataclass
class EnergyProfile:
    timestamp: str
    duration_s: float
    cpu_kwh: float
    ram_kwh: float
    total_kwh: float
    emissions_kg: float
    emission_rate_kg_s: float
    params: int = 0
    model_bytes: int = 0
    muladds: int = 0


CSV_COLUMNS = tuple(f.name for f in fields(EnergyProfile))


# A meter maps a duration in seconds to measured (cpu_kwh, ram_kwh); plug in
# hardware counters here in place of the constant-power estimate.
Meter = Callable[[float], "tuple[float, float]"]


def constant_power_meter(model: EnergyModel) -> Meter:
    def meter(duration_s: float):
        # W*s -> kJ -> kWh; this evaluation order keeps round inputs exact in binary64
        return (model.cpu_power_watts * duration_s * 1e-3 / 3600.0,
                model.ram_power_watts * duration_s * 1e-3 / 3600.0)
    return meter


def profile_for_duration(duration_s: float, model: EnergyModel | None = None, params: int = 0,
                         muladds: int = 0, timestamp: str | None = None,
                         meter: Meter | None = None) -> EnergyProfile:
    model = model or EnergyModel()
    cpu, ram = (meter or constant_power_meter(model))(duration_s)
    total = cpu + ram
    emissions = total * model.carbon_intensity_kg_per_kwh
    rate = emissions / duration_s if duration_s > 0 else 0.0
    return EnergyProfile(
        timestamp=timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        duration_s=duration_s,
        cpu_kwh=cpu,
        ram_kwh=ram,
        total_kwh=total,
        emissions_kg=emissions,
        emission_rate_kg_s=rate,
        params=params,
        model_bytes=params * BYTES_PER_PARAM,
        muladds=muladds,
    )


def measure(run: Callable, model: EnergyModel | None = None, params: int = 0, muladds: int = 0,
            clock: Callable[[], float] = time.monotonic, meter: Meter | None = None):
    """Run ``run()`` and return ``(its result, EnergyProfile)``."""
    start = clock()
    result = run()
    duration = clock() - start
    return result, profile_for_duration(duration, model, params, muladds, meter=meter)


def emit_csv(profile: EnergyProfile, path, append: bool = False) -> None:
    path = Path(path)
    write_header = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if write_header:
            w.writerow(CSV_COLUMNS)
        w.writerow([repr(v) if isinstance(v, float) else v for v in
                    (getattr(profile, c) for c in CSV_COLUMNS)])


def read_csv(path) -> list[EnergyProfile]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kwargs = {}
            for f in fields(EnergyProfile):
                raw = row[f.name]
                kwargs[f.name] = raw if f.type == "str" else (int(raw) if f.type == "int" else float(raw))
            out.append(EnergyProfile(**kwargs))
    return out
