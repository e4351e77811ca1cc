"""Reflected diffusions in polyhedral chambers with barrier potentials on the faces."""

from .classifier import BoundaryClass, IndeterminateClassification, Repulsion, classify, classify_model, scale
from .geometry import EmptyIntersectionError, Face, FaceSubset, GeometryError, PolyhedralDomain
from .integrator import SimConfig, SimulationError, Trajectory, projected_euler_step, prox_step, simulate
from .models import (PolyhedralModel, build_custom, build_hyperbolic, build_model, build_rost_vares,
                     build_trigonometric, build_wishart_radii)
from .montecarlo import EnsembleReport, edge_watch, moment_check, run_ensemble
from .potentials import (HyperbolicLogSinh, LogBarrier, Scaled, ShiftedLog, TrigLogSin, Zero,
                         potential_from_spec, prox1d)
from .rootsys import RootSystem, dunkl_model, standard_root_system, validate

__version__ = "0.1.0"
