"""Remote estimation over Gilbert-Elliott channels: solvers, simulator, and oracles."""

__version__ = "0.1.0"
