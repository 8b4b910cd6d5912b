"""Campaign criteria: the advertiser-facing knobs a forecast is asked for."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from ..errors import CriteriaError


class Objective(str, Enum):
    IMPRESSION = "impression"
    CLICK = "click"
    CONVERSION = "conversion"


class BiddingType(str, Enum):
    CPM = "CPM"
    CPC = "CPC"
    CPA = "CPA"
    BCB = "BCB"   # budget constrained bidding
    MCB = "MCB"   # multiple constrained bidding


MANUAL_TYPES = (BiddingType.CPM, BiddingType.CPC, BiddingType.CPA)
AUTO_TYPES = (BiddingType.BCB, BiddingType.MCB)

# Tag ids carry their kind as a prefix; anything unprefixed is treated as a
# behavioral tag since profile tags form a closed, enumerated set.
TARGETING_OPTIONS = ("profile", "behavior", "mixed")


@dataclass(frozen=True)
class CampaignCriteria:
    advertiser_id: str
    hours: Tuple[int, ...]
    areas: Tuple[str, ...]
    adzones: Tuple[str, ...]
    targeting_tags: Tuple[str, ...]
    objective: Objective
    bidding_type: BiddingType
    budget: float
    bidprice: Optional[float] = None    # manual bidding only
    constraint: Optional[float] = None  # MCB only: cost per objective unit

    def is_manual(self) -> bool:
        return self.bidding_type in MANUAL_TYPES


def targeting_option(tags) -> str:
    """Classify a tag set into profile / behavior / mixed by tag-id prefix."""
    kinds = set()
    for tag in tags:
        kinds.add("profile" if str(tag).startswith("pf:") else "behavior")
    if kinds == {"profile"}:
        return "profile"
    if kinds == {"behavior"}:
        return "behavior"
    return "mixed"


def validate_criteria(c: CampaignCriteria) -> None:
    """Raise CriteriaError naming the offending field on any violation."""
    if not c.advertiser_id:
        raise CriteriaError("advertiser_id", "must be a non-empty string")
    if not c.hours:
        raise CriteriaError("hours", "must be non-empty")
    for h in c.hours:
        if not (isinstance(h, int) and 0 <= h <= 23):
            raise CriteriaError("hours", f"hour {h!r} outside 0..23")
    if not c.areas:
        raise CriteriaError("areas", "must be non-empty")
    if not c.adzones:
        raise CriteriaError("adzones", "must be non-empty")
    if not c.targeting_tags:
        raise CriteriaError("targeting_tags", "must be non-empty")
    if not isinstance(c.objective, Objective):
        raise CriteriaError("objective", f"unknown objective {c.objective!r}")
    if not isinstance(c.bidding_type, BiddingType):
        raise CriteriaError("bidding_type",
                            f"unknown bidding type {c.bidding_type!r}")
    if not (isinstance(c.budget, (int, float)) and c.budget > 0):
        raise CriteriaError("budget", "must be a positive number")
    if c.is_manual():
        if c.bidprice is None:
            raise CriteriaError("bidprice", "required for manual bidding")
        if not c.bidprice > 0:
            raise CriteriaError("bidprice", "must be positive")
    elif c.bidprice is not None:
        raise CriteriaError("bidprice", "must be omitted for automatic bidding")
    if c.bidding_type is BiddingType.MCB:
        if c.constraint is None:
            raise CriteriaError("constraint", "required for MCB")
        if not c.constraint > 0:
            raise CriteriaError("constraint", "must be positive")
    elif c.constraint is not None:
        raise CriteriaError("constraint", "only valid for MCB")


def criteria_from_dict(payload: dict) -> CampaignCriteria:
    """Parse and validate criteria from a JSON-shaped dict.

    Enum fields are matched case-insensitively. Raises CriteriaError with
    the offending field name on any problem.
    """
    if not isinstance(payload, dict):
        raise CriteriaError("criteria", "request body must be a JSON object")

    def need(name):
        if name not in payload or payload[name] is None:
            raise CriteriaError(name, "missing required field")
        return payload[name]

    def str_list(name):
        raw = need(name)
        if not isinstance(raw, (list, tuple)) or not all(
                isinstance(x, str) for x in raw):
            raise CriteriaError(name, "must be a list of strings")
        return tuple(raw)

    raw_hours = need("hours")
    if not isinstance(raw_hours, (list, tuple)):
        raise CriteriaError("hours", "must be a list of integers")
    hours = []
    for h in raw_hours:
        if isinstance(h, bool) or not isinstance(h, int):
            raise CriteriaError("hours", f"hour {h!r} is not an integer")
        hours.append(h)

    obj_raw = str(need("objective")).lower()
    try:
        objective = Objective(obj_raw)
    except ValueError:
        raise CriteriaError("objective", f"unknown objective {obj_raw!r}")
    bt_raw = str(need("bidding_type")).upper()
    try:
        bidding_type = BiddingType(bt_raw)
    except ValueError:
        raise CriteriaError("bidding_type", f"unknown bidding type {bt_raw!r}")

    def number(name, required):
        if name not in payload or payload[name] is None:
            if required:
                raise CriteriaError(name, "missing required field")
            return None
        value = payload[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise CriteriaError(name, "must be a number")
        return float(value)

    criteria = CampaignCriteria(
        advertiser_id=str(need("advertiser_id")),
        hours=tuple(hours),
        areas=str_list("areas"),
        adzones=str_list("adzones"),
        targeting_tags=str_list("targeting_tags"),
        objective=objective,
        bidding_type=bidding_type,
        budget=number("budget", required=True),
        bidprice=number("bidprice", required=False),
        constraint=number("constraint", required=False),
    )
    validate_criteria(criteria)
    return criteria


def criteria_to_dict(c: CampaignCriteria) -> dict:
    out = {
        "advertiser_id": c.advertiser_id,
        "hours": list(c.hours),
        "areas": list(c.areas),
        "adzones": list(c.adzones),
        "targeting_tags": list(c.targeting_tags),
        "objective": c.objective.value,
        "bidding_type": c.bidding_type.value,
        "budget": c.budget,
    }
    if c.bidprice is not None:
        out["bidprice"] = c.bidprice
    if c.constraint is not None:
        out["constraint"] = c.constraint
    return out
