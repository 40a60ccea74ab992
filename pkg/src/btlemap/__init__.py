"""BLE environment auditing suite.

Ingests BLE advertisements from pcap files, scripted simulations, or remote
scanner agents, attributes them to stable devices across MAC address
randomization, estimates proximity from RSSI, enumerates GATT services, and
serves a live HTTP/WebSocket API for the operator console.
"""

__version__ = "0.1.0"
