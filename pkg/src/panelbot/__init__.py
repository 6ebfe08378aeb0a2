"""Panel, wrench and valve perception plus mission control for a simulated ground robot."""

__version__ = "0.1.0"
