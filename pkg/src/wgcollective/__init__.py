"""Collective super- and subradiant emission dynamics of distant two-level
emitters coupled through a one-dimensional waveguide."""

__version__ = "0.1.0"

from .analytic import (FieldPair, TwoEmitterParams, approx_collective_rates,
                       closed_form_fields, closed_form_intensity,
                       damping_regime, oscillation_frequency,
                       subradiant_rate_expansion)
from .ensemble import (DiffusionSpec, IrfSpec, TimeTrace, convolve_irf,
                       diffusion_average, normalize_trace)
from .errors import (ConfigError, DegenerateBranchError, FitConvergenceError,
                     IntegrationError, WgError)
from .fitproc import (BiExpFit, SweepMap, SweepPlan, fit_biexponential,
                      load_trace, run_sweep, simulate_trace)
from .liouvillian import (CollectivePopulations, DensityMatrix, DriveSpec,
                          collective_populations, generator_apply,
                          port_intensity)
from .model import (EmitterParams, PhaseLags, SystemModel, ZeemanParams,
                    build_system, effective_hamiltonian, find_resonance_field,
                    zeeman_transitions)
from .propagate import (PulseSpec, TimeGrid, Trajectory, apply_instant_pulse,
                        evolve_master, evolve_single_excitation)
