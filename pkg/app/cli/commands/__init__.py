"""Subcommands; each module exposes ``register(subparsers)`` and ``run(args, settings)``."""
