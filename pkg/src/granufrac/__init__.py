"""granufrac: coupled DEM / grid-fluid simulation of fluid-driven fracture
initiation in cohesive granular beds, with power-law injection fluids."""

from .config import (
    GUAR,
    NEWTONIAN_3PAS,
    WATER,
    XG,
    MaterialParams,
    Particle,
    RheologyModel,
    SimulationConfig,
    load_config,
    rayleigh_timestep,
    validate_config,
)

__all__ = [
    "GUAR", "NEWTONIAN_3PAS", "WATER", "XG",
    "MaterialParams", "Particle", "RheologyModel", "SimulationConfig",
    "load_config", "rayleigh_timestep", "validate_config",
]

__version__ = "0.1.0"
