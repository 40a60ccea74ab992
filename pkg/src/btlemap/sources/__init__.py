"""Advertisement inputs: pcap files, timed replay, scripted simulation, and
the remote-scanner network protocol with mDNS discovery."""

from btlemap.sources.agent import (
    Agent,
    AgentConfig,
    NoServerFound,
    UnsupportedBackend,
    load_backend,
)
from btlemap.sources.mdns import MdnsAnnouncer, MulticastUnavailable, browse
from btlemap.sources.pcap import (
    BadMagic,
    PcapReadResult,
    StreamWriteError,
    TruncatedRecord,
    UnsupportedLinktype,
    crc24,
    read_pcap,
    write_pcap,
)
from btlemap.sources.protocol import (
    MAX_LINE_BYTES,
    PROTO_VERSION,
    ProtocolError,
    decode_message,
    encode_message,
)
from btlemap.sources.replay import ReplayCancelled, replay
from btlemap.sources.server import AgentServer, BindFailed
from btlemap.sources.simulate import (
    InvalidScenario,
    Scenario,
    ScenarioDevice,
    device_macs,
    generate_events,
    load_scenario,
    simulate,
)

__all__ = [
    "Agent",
    "AgentConfig",
    "AgentServer",
    "BadMagic",
    "BindFailed",
    "InvalidScenario",
    "MAX_LINE_BYTES",
    "MdnsAnnouncer",
    "MulticastUnavailable",
    "NoServerFound",
    "PROTO_VERSION",
    "PcapReadResult",
    "ProtocolError",
    "ReplayCancelled",
    "Scenario",
    "ScenarioDevice",
    "StreamWriteError",
    "TruncatedRecord",
    "UnsupportedBackend",
    "UnsupportedLinktype",
    "browse",
    "crc24",
    "decode_message",
    "device_macs",
    "encode_message",
    "generate_events",
    "load_backend",
    "load_scenario",
    "read_pcap",
    "replay",
    "simulate",
    "write_pcap",
]
