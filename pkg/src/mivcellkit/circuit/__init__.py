from .measure import Measurement, average_power, crossings, measure
from .mna import TransientResult, dc_operating_point, transient
from .netlist import (
    Capacitor,
    Netlist,
    Resistor,
    Transistor,
    VoltageSource,
    dumps_netlist,
    dumps_waveforms,
    loads_netlist,
    read_netlist,
)

__all__ = [
    "Capacitor",
    "Measurement",
    "Netlist",
    "Resistor",
    "Transistor",
    "TransientResult",
    "VoltageSource",
    "average_power",
    "crossings",
    "dc_operating_point",
    "dumps_netlist",
    "dumps_waveforms",
    "loads_netlist",
    "measure",
    "read_netlist",
    "transient",
]
