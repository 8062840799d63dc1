#!/usr/bin/env python3
"""
isolab Startup Script
=====================

Prepares the environment and hands the remaining arguments to the isolab
command line.
"""

import sys
from pathlib import Path

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))


def setup_environment() -> bool:
    """Create .env from the example on first use, then load it"""
    env_file = Path(".env")
    env_example = Path(".env.example")

    if not env_file.exists() and env_example.exists():
        print("📋 Creating .env file from example...", file=sys.stderr)
        env_file.write_text(env_example.read_text())

    try:
        from dotenv import load_dotenv
        load_dotenv()
        return True
    except ImportError:
        print("❌ python-dotenv not found. Run: pip install -r requirements.txt", file=sys.stderr)
        return False


def print_help():
    """Print help information"""
    print("""
isolab
======

Usage: python start.py <subcommand> [flags]

Subcommands:
  bracket-verify  - exact KKS, Casimir and inner/outer bracket checks
  monomials       - the matrix M^(r)(t) and its inverse
  hamiltonians    - isomonodromic Hamiltonians of a connection spec
  confluence      - merge a simple pole into another pole
  flow            - integrate the lifted isomonodromic flow
  painleve        - integrate one Painlevé system
  kz              - solve a quantized (confluent) KZ system
  verify-all      - the full identity and acceptance suite
  help            - show this help

Examples:
  python start.py verify-all --max-rank 3 --m 2 --seed 7
  python start.py monomials --rank 2 --times 1,0
  python start.py flow --spec spec.json --path path.json --tol 1e-10 --out traj.csv

Configuration:
  - Copy .env.example to .env and adjust ISOLAB_* settings
  - Install requirements: pip install -r requirements.txt
""")


def main() -> int:
    """Main entry point"""
    args = sys.argv[1:]
    if not args or args[0] == "help":
        print_help()
        return 0

    if not setup_environment():
        return 2

    from isolab.cli import run
    return run(args)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n👋 Interrupted", file=sys.stderr)
        sys.exit(130)
