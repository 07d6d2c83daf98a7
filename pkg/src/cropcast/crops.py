"""Staple-crop selection from commodity balances.

Per country: rank commodities by production, flag the essential ones via the
self-sufficiency ratio (consumption over production), and keep the top five.
Regionally: count how many countries carry each crop in their top five and
select the staples that clear a membership threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyInputError, ZeroProductionError
from .gridio import CommodityBalance

# Candidate staples eligible for regional selection. Commodity tables mix
# crops with non-crop items (fish, milk, beer) and non-staple crops; regional
# rollups choose among field staples only. Configurable per run.
DEFAULT_STAPLE_CANDIDATES = (
    "Cassava and products",
    "Maize and products",
    "Rice and products",
    "Sugar cane",
    "Wheat and products",
)


@dataclass(frozen=True)
class CountrySelection:
    """A country's primary produced-and-consumed commodities, most important first."""

    country: str
    top5: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.top5)) != len(self.top5):
            raise ValueError(f"{self.country}: duplicate commodities in selection")


@dataclass(frozen=True)
class RegionalTally:
    """How many of a region's countries carry a crop in their top five."""

    region: str
    crop: str
    count: int


def top_produced(records: list[CommodityBalance], n: int) -> list[str]:
    """Commodity names sorted by production descending, ties by name, first ``n``."""
    countries = {r.country for r in records}
    if len(countries) > 1:
        raise ValueError(f"records span multiple countries: {sorted(countries)}")
    ranked = sorted(records, key=lambda r: (-r.production_t, r.commodity))
    return [r.commodity for r in ranked[:n]]


def self_sufficiency(rec: CommodityBalance) -> float:
    """Consumption share of production; > 1 means the country under-produces."""
    if rec.production_t == 0:
        raise ZeroProductionError(f"{rec.country}/{rec.commodity}: production is zero")
    return rec.consumption_t / rec.production_t


def _ratio_for_ranking(rec: CommodityBalance) -> float:
    # Pure-import dependence (zero production, nonzero consumption) is
    # maximal insufficiency; zero production AND consumption is a dead row.
    try:
        return self_sufficiency(rec)
    except ZeroProductionError:
        return math.inf if rec.consumption_t > 0 else 0.0


def select_country_crops(records: list[CommodityBalance], top_n: int = 10, keep: int = 5) -> CountrySelection:
    """Top ``keep`` commodities from the ``top_n`` most produced.

    Essential commodities (self-sufficiency ratio strictly above 1) come
    first, then production descending; name ascending breaks exact ties.
    """
    if not records:
        raise EmptyInputError("no commodity records for country selection")
    country = records[0].country
    by_name = {r.commodity: r for r in records}
    shortlist = [by_name[c] for c in top_produced(records, top_n)]
    ranked = sorted(
        shortlist,
        key=lambda r: (_ratio_for_ranking(r) <= 1.0, -r.production_t, r.commodity),
    )
    return CountrySelection(country=country, top5=tuple(r.commodity for r in ranked[:keep]))


def tally_region(selections: list[CountrySelection], region: str) -> list[RegionalTally]:
    """Per-crop membership counts over the region's country selections."""
    counts: dict[str, int] = {}
    for sel in selections:
        for crop in sel.top5:
            counts[crop] = counts.get(crop, 0) + 1
    return [
        RegionalTally(region=region, crop=crop, count=count)
        for crop, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def select_regional_crops(
    tallies: list[RegionalTally],
    n_countries: int,
    threshold_frac: float = 0.4,
    cap: int = 3,
    candidates: tuple[str, ...] | None = DEFAULT_STAPLE_CANDIDATES,
) -> list[RegionalTally]:
    """Staples carried by strictly more than ``threshold_frac`` of countries.

    Restricted to ``candidates`` when given (pass None to consider every
    commodity), sorted by count descending then name, truncated to ``cap``.
    """
    if n_countries < 1:
        raise ValueError(f"n_countries must be >= 1, got {n_countries}")
    if not 0 <= threshold_frac <= 1:
        raise ValueError(f"threshold_frac must lie in [0, 1], got {threshold_frac}")
    chosen = [
        t
        for t in tallies
        if t.count > threshold_frac * n_countries and (candidates is None or t.crop in candidates)
    ]
    chosen.sort(key=lambda t: (-t.count, t.crop))
    return chosen[:cap]
