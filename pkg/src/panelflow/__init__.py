"""panelflow: a numerical lab for supersonic flow coupled to a nonlinear clamped plate."""
from .config import Scenario, level_scenario, parse_scenario, serialize
from .flow import FlowDomain, FlowParams, FlowState
from .operators import CoupledState, assemble
from .plate import PlateDomain, PlateModel
from .timestep import CoupledSystem, cfl_dt, integrate, integrate_system

__version__ = "0.1.0"

__all__ = ["Scenario", "level_scenario", "parse_scenario", "serialize", "FlowDomain", "FlowParams",
           "FlowState", "CoupledState", "assemble", "PlateDomain", "PlateModel", "CoupledSystem",
           "cfl_dt", "integrate", "integrate_system"]
