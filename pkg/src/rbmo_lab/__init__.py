"""Numerical toolkit for regular BMO spaces and T1 checks on non-doubling atomic measures."""

__version__ = "0.1.0"

from .coefficients import KTable, k_coefficient, k_log_bound, k_of_cube
from .errors import (BadAnnulus, BadBeta, BadDilation, DegenerateCube, EmptyFamily,
                     NoAdmissibleTriples, NoEligibleCubes, NotNested, RBMOLabError, SamePoint,
                     SolverFailure, TopLevelTooSmall, ValidationError, ZeroMassCube)
from .geometry import Cube, CubeFamily, build_family, dilate, doubling_subfamily, is_doubling
from .measures import (AtomicMeasure, gen_cantor, gen_lebesgue_grid, growth_check, point_masses,
                       read_measure, write_measure)
from .operators import (KernelSpec, TruncationGrid, cancellation_check, get_kernel, hoelder_check,
                        size_check, t1_field, truncated_apply)
from .rbmo import (SampledFunction, SeminormWitness, equivalence_probe, l1_norm, norm_star,
                   seminorm_A, seminorm_E)
from .t1 import (T1Certificate, boundedness_probe, certify_condition_ii, certify_operator,
                 construct_b_from_phi)
from .testfn import build_test_family, fubini_sides, phi_at_atoms, phi_radial, phi_vs_K_probe

__all__ = [name for name in dir() if not name.startswith("_")]
