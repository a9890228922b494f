"""kerrsim: TEBD simulator and steady-state oracles for the driven dissipative Kerr oscillator."""

__version__ = "0.1.0"
