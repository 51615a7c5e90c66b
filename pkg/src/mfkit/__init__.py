"""Missing-and-found desk service: face identification, lost property registry,
search, offline kiosk sync, and an operator HTTP API."""

__version__ = "0.1.0"
