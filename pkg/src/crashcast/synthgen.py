"""Generate seeded synthetic crash corpora in the raw log line format.

Each system is an independent homogeneous Poisson process over a horizon
of whole days, with causes drawn from a weighted catalog. A bursty mode
modulates the rate with per-system day-of-week multipliers so the data
stops matching the baseline predictor's model family. Noise records with
non-critical event ids are mixed in for filter testing. Identical configs
produce byte-identical output.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from ._seed import derive_seed
from .errors import ConfigError
from .ingest import RawLogRecord, default_catalog, record_to_line

DEFAULT_START = datetime(2021, 1, 1, tzinfo=timezone.utc)
DEFAULT_DOMINANT_CODE = "0x9F"
DEFAULT_DOMINANT_WEIGHT = 0.90

NOISE_EVENT_IDS = (1074, 6008, 7001)

_SECONDS_PER_DAY = 86400


def default_cause_catalog(
    dominant_code: str = DEFAULT_DOMINANT_CODE,
    dominant_weight: float = DEFAULT_DOMINANT_WEIGHT,
) -> tuple[tuple[str, str, float], ...]:
    """The shipped code catalog with one dominant cause and the rest uniform."""
    catalog = default_catalog()
    if dominant_code not in catalog:
        raise ConfigError(f"dominant code {dominant_code} not in the shipped catalog")
    rest = [code for code in sorted(catalog) if code != dominant_code]
    share = (1.0 - dominant_weight) / len(rest)
    entries = [(dominant_code, catalog[dominant_code], dominant_weight)]
    entries.extend((code, catalog[code], share) for code in rest)
    return tuple(entries)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int | None = None
    n_systems: int = 8
    days: int = 540
    per_system_rate: float = 0.5
    cause_catalog: tuple[tuple[str, str, float], ...] | None = None
    start_date: datetime = DEFAULT_START
    noise_fraction: float = 0.2
    bursty: bool = False

    def __post_init__(self):
        if self.n_systems < 1:
            raise ConfigError("n_systems must be at least 1")
        if self.days < 1:
            raise ConfigError("days must be at least 1")
        if not self.per_system_rate > 0:
            raise ConfigError("per_system_rate must be positive")
        if self.noise_fraction < 0:
            raise ConfigError("noise_fraction must not be negative")
        if self.cause_catalog is not None:
            if not self.cause_catalog:
                raise ConfigError("cause_catalog must not be empty")
            for code, label, weight in self.cause_catalog:
                if not (math.isfinite(weight) and weight > 0):
                    raise ConfigError(f"weight for {code} must be positive and finite")
                if not label:
                    raise ConfigError(f"empty cause label for {code}")

    def resolved_catalog(self) -> tuple[tuple[str, str, float], ...]:
        return self.cause_catalog if self.cause_catalog is not None else default_cause_catalog()


def _poisson_count(rng: random.Random, lam: float) -> int:
    """Knuth's product method; fine for the per-day rates used here."""
    threshold = math.exp(-lam)
    count = 0
    product = rng.random()
    while product > threshold:
        count += 1
        product *= rng.random()
    return count


def _system_records(
    config: GeneratorConfig, seed: int, system_index: int
) -> list[RawLogRecord]:
    rng = random.Random(derive_seed(seed, "synth", system_index))
    system_id = f"host-{system_index:03d}"
    catalog = config.resolved_catalog()
    labels = [(code, label) for code, label, _ in catalog]
    weights = [weight for _, _, weight in catalog]

    multipliers = [1.0] * 7
    if config.bursty:
        raw = [rng.uniform(0.25, 2.0) for _ in range(7)]
        mean = sum(raw) / 7
        multipliers = [value / mean for value in raw]

    instants: list[datetime] = []
    for day in range(config.days):
        day_start = config.start_date + timedelta(days=day)
        lam = config.per_system_rate * multipliers[day_start.weekday()]
        for _ in range(_poisson_count(rng, lam)):
            instants.append(day_start + timedelta(seconds=rng.randrange(_SECONDS_PER_DAY)))
    instants.sort()

    records = []
    for instant in instants:
        code, label = rng.choices(labels, weights=weights)[0]
        records.append(
            RawLogRecord(
                system_id=system_id,
                timestamp=instant,
                event_id=41,
                bugcheck_code=code,
                params=(f"0x{rng.getrandbits(16):X}", "0x0"),
                cause=label,
            )
        )

    noise_count = round(config.noise_fraction * len(records))
    for _ in range(noise_count):
        instant = config.start_date + timedelta(
            days=rng.randrange(config.days), seconds=rng.randrange(_SECONDS_PER_DAY)
        )
        records.append(
            RawLogRecord(
                system_id=system_id,
                timestamp=instant,
                event_id=rng.choice(NOISE_EVENT_IDS),
            )
        )
    return records


def generate_records(config: GeneratorConfig, seed: int | None = None) -> list[RawLogRecord]:
    """All systems' records merged in a deterministic global order."""
    effective_seed = config.seed if config.seed is not None else seed
    if effective_seed is None:
        raise ConfigError("generator needs a seed, none given")
    records: list[RawLogRecord] = []
    for system_index in range(config.n_systems):
        records.extend(_system_records(config, effective_seed, system_index))
    records.sort(
        key=lambda r: (r.timestamp, r.system_id, r.event_id, r.bugcheck_code or "", r.params)
    )
    return records


def generate_corpus(config: GeneratorConfig, seed: int | None = None) -> list[str]:
    """Raw log lines, one record per line, ready for the ingest stage."""
    return [record_to_line(record) for record in generate_records(config, seed)]
