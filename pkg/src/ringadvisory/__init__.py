"""Congestion-mitigation advisory workbench: ring-road microsimulation,
advisory policy training, driver-trait inference, and a realtime drive server."""

__version__ = "0.1.0"
