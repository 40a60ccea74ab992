"""Company identifier registry.

Manufacturer Specific Data values start with a 16-bit little-endian company
identifier assigned by the Bluetooth SIG.  The registry ships as a CSV data
file (``id_hex,name``) so builds stay hermetic; it covers the vendors this
tool most commonly encounters, not the full assigned-numbers list.
"""

from __future__ import annotations

import csv
import importlib.resources
from functools import lru_cache

APPLE_COMPANY_ID = 0x004C

REGISTRY_RESOURCE = "company_ids.csv"


@lru_cache(maxsize=1)
def _registry() -> dict[int, str]:
    ref = importlib.resources.files("btlemap.data").joinpath(REGISTRY_RESOURCE)
    with ref.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return {int(row["id_hex"], 16): row["name"] for row in reader}


def lookup_company(company_id: int) -> str | None:
    """Company name for a 16-bit identifier, or None if not in the registry."""
    if not 0 <= company_id <= 0xFFFF:
        return None
    return _registry().get(company_id)
