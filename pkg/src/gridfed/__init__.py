"""Software federation simulator for transmission-distribution Volt-VAR studies.

The package closes a coordinated Volt-VAR control loop entirely in software:
phasor power-flow federates for a transmission network and radial distribution
feeders, a PV inverter with a semi-ellipse capability curve, transmission and
distribution controllers, and simulated communication links with configurable
latency, drop, and sever behavior.
"""

__version__ = "0.1.0"
