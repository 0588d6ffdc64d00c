"""Fano-enhanced second-harmonic generation in a two-emitter / plasmon-dimer system."""
