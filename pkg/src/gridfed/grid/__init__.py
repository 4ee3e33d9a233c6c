"""Electrical network domain model, plain-text network format, and profiles."""

from gridfed.grid.model import (
    Branch,
    Bus,
    Generator,
    GridModel,
    GridFileError,
    ModelError,
    Shunt,
    SolarFarm,
    ZipLoad,
    PHASES,
)
from gridfed.grid.netfile import parse_grid_file, serialize_grid
from gridfed.grid.profiles import (
    Profile,
    disaggregate_feeder_profile,
    parse_profile_csv,
)

__all__ = [
    "Bus",
    "Branch",
    "ZipLoad",
    "SolarFarm",
    "Generator",
    "Shunt",
    "GridModel",
    "GridFileError",
    "ModelError",
    "PHASES",
    "parse_grid_file",
    "serialize_grid",
    "Profile",
    "parse_profile_csv",
    "disaggregate_feeder_profile",
]
