"""
Main entry point for the sparse sensing experiment CLI.
"""

from .cli import cli

if __name__ == '__main__':
    cli()
