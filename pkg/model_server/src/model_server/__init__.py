"""HTTP adapter exposing embedding and generation models to the augrag engine."""

from .app import ServerConfig, create_app

__all__ = ["ServerConfig", "create_app"]
