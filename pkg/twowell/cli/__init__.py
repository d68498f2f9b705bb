"""
TwoWell CLI Package
"""

from .commands import CommandHandler, build_parser, handler, main

__all__ = [
    'CommandHandler',
    'build_parser',
    'handler',
    'main'
]
