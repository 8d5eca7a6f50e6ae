"""Gnutella, Napster and super-peer overlays with a deterministic simulator."""

__version__ = "0.1.0"
