"""Local generation shim for the coding pipeline's model wire contract."""

from .app import GenerateRequest, GenerateResponse, create_app
from .backends import BackendError, LocalBackend, MockBackend

__version__ = "0.1.0"

__all__ = ["BackendError", "GenerateRequest", "GenerateResponse", "LocalBackend",
           "MockBackend", "create_app"]
