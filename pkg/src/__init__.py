"""spinbin - time-bin entanglement between a photon and a stored spin-wave, simulated."""

__version__ = "0.1.0"
