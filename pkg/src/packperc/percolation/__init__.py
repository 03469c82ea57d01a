from .engine import (
    BondSample, Crossing, DecayFit, DecayUndetectable, Estimate, EventSpec, NonBracketingError,
    PcEstimate, ReachAnyOf, ReachDistance, SiteSample, Window, cluster_extent, crossing_event,
    default_workers, estimate_pc, fit_decay, monte_carlo, reach_event, sample_bonds, sample_sites,
    touching_side, trial_outcomes, wilson_interval, window_of,
)
from .rng import uniforms
