"""MIV-transistor FDSOI toolkit: compact model, parameter extraction,
layout areas, circuit simulation and standard-cell PPA."""

__version__ = "0.1.0"
