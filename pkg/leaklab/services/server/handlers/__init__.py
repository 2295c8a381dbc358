"""
Request handlers for the signing server.
"""

from .sign_handler import SignHandler

__all__ = ["SignHandler"]
