"""FastAPI service wrapping the training library."""

from .app import app

__all__ = ["app"]
