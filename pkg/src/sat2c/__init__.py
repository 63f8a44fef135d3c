"""Joint routing, transmit-power allocation and edge/cloud offloading for LEO surveillance tasks."""

__version__ = "0.1.0"
