"""Advertisement payload dissection.

Splits raw advertising payloads into GAP AD structures, renders them as
nested byte-ranged trees, and sub-dissects Apple vendor messages.
"""

from btlemap.dissect.company import APPLE_COMPANY_ID, lookup_company
from btlemap.dissect.continuity import (
    AppleContinuityMessage,
    dissect_apple,
)
from btlemap.dissect.gap import (
    MAX_PAYLOAD_LEN,
    AdStructure,
    PayloadTooLong,
    TrailingBytes,
    extract_tx_power,
    parse_ad_structures,
    serialize_ad_structures,
)
from btlemap.dissect.tree import DissectionNode, dissect

__all__ = [
    "APPLE_COMPANY_ID",
    "AdStructure",
    "AppleContinuityMessage",
    "DissectionNode",
    "MAX_PAYLOAD_LEN",
    "PayloadTooLong",
    "TrailingBytes",
    "dissect",
    "dissect_apple",
    "extract_tx_power",
    "lookup_company",
    "parse_ad_structures",
    "serialize_ad_structures",
]
