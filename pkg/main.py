"""
Cascade Node simulator - Main Entry Point
"""

import sys

from cli import CascadeNodeCLI


def main(argv=None) -> int:
    """Main entry point for the Cascade Node simulator"""
    return CascadeNodeCLI().run(argv)


if __name__ == "__main__":
    sys.exit(main())
