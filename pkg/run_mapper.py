#!/usr/bin/env python3
"""Entry point for the semantic splatting mapper."""

import sys

from semsplat.cli import main as cli_main


def main():
    """Main entry point."""
    try:
        sys.exit(cli_main())
    except KeyboardInterrupt:
        print("\nShutdown requested...")
        sys.exit(0)


if __name__ == "__main__":
    main()
