"""
Application module - command-line interface
"""

from .main import build_parser, main
