"""One day of synthetic auction traffic."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import ConfigError
from .world import World

# diurnal request intensity, normalized at generation time
HOUR_CURVE = np.array([
    1.0, 0.7, 0.5, 0.4, 0.4, 0.5, 0.8, 1.2, 1.6, 1.8, 1.9, 2.0,
    2.1, 2.0, 1.9, 1.8, 1.9, 2.1, 2.4, 2.6, 2.7, 2.5, 2.0, 1.4,
])


@dataclass
class AuctionRecord:
    request_id: str
    user_id: str
    hour: int
    area_id: str
    adzone_id: str
    winner: str        # advertiser that won the logged auction
    b1: float          # highest competing bid, eCPM
    b2: float          # second-highest competing bid, eCPM
    sampled: bool      # marks membership in the down-sampled replay bucket


@dataclass
class LogConfig:
    n_requests: int = 20000
    sample_rate: float = 0.25   # fraction of requests marked for replay
    base_ecpm: float = 6.0      # location of the second-price distribution
    price_sigma: float = 0.45   # log-normal spread of prices per request
    zone_price_sigma: float = 0.80  # spread of per-adzone price levels
    area_price_sigma: float = 0.25  # spread of per-area price levels
    log_date: str = "2026-01-01"


def gen_day_logs(world: World, config: LogConfig, seed: int) -> List[AuctionRecord]:
    """Generate auction records for one day.

    Prices are log-normal around per-adzone/per-area levels, scaled by a
    per-request quality factor, with b1 >= b2 > 0 guaranteed. The sampled
    flag marks a sample_rate fraction of requests; replay consumes only
    marked records while the true-delivery simulator consumes all of them.
    """
    if config.n_requests < 1:
        raise ConfigError("n_requests must be positive")
    if not (0.0 < config.sample_rate <= 1.0):
        raise ConfigError("sample_rate must lie in (0, 1]")

    rng = np.random.default_rng(seed)
    n = config.n_requests
    hour_p = HOUR_CURVE / HOUR_CURVE.sum()
    hours = rng.choice(24, size=n, p=hour_p)
    user_rows = rng.integers(0, len(world.users), size=n)
    area_rows = rng.integers(0, len(world.areas), size=n)
    zone_rows = rng.integers(0, len(world.adzones), size=n)
    quality = [a.base_quality for a in world.advertisers]
    win_p = np.asarray(quality) / np.sum(quality)
    winner_rows = rng.choice(len(world.advertisers), size=n, p=win_p)

    # price levels differ by placement and region, and peak hours run hotter
    zone_price = np.exp(rng.normal(0.0, config.zone_price_sigma,
                                   size=len(world.adzones)))
    area_price = np.exp(rng.normal(0.0, config.area_price_sigma,
                                   size=len(world.areas)))
    hour_price = (HOUR_CURVE / HOUR_CURVE.mean()) ** 0.25
    request_quality = np.exp(rng.normal(0.0, 0.3, size=n))
    b2 = (config.base_ecpm * zone_price[zone_rows] * area_price[area_rows]
          * hour_price[hours] * request_quality
          * np.exp(rng.normal(0.0, config.price_sigma, size=n)))
    spread = np.exp(rng.normal(-1.1, 0.5, size=n))
    b1 = b2 * (1.0 + spread)
    sampled = rng.random(n) < config.sample_rate

    records = []
    for i in range(n):
        records.append(AuctionRecord(
            request_id=f"r{i:08d}",
            user_id=world.users[int(user_rows[i])].user_id,
            hour=int(hours[i]),
            area_id=world.areas[int(area_rows[i])],
            adzone_id=world.adzones[int(zone_rows[i])],
            winner=world.advertisers[int(winner_rows[i])].advertiser_id,
            b1=float(b1[i]),
            b2=float(b2[i]),
            sampled=bool(sampled[i]),
        ))
    return records
