"""MR32 workbench: transform small RISC programs and weigh code size,
energy, average-case timing and worst-case timing against each other."""

__version__ = "0.1.0"
