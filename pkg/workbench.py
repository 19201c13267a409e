"""

*** workbench.py ***

Entry point: python workbench.py <command> [options]
See src/cli.py for the subcommands.

"""
import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
