//! Drivers for the parameter studies; the CLI and the acceptance suite share them.

mod domain;
mod optdir_table;
mod reference;
mod vmap;

pub use domain::{
    default_map_dmin, default_map_eps_s, default_mi, domain_nodes, domain_spacing, hhd_run, manufactured_f,
    manufactured_grad, manufactured_u, poisson_refinement, poisson_run, poisson_sweep, stability_map, DomainRunConfig,
    HhdRun, PoissonRow, Refinement, StabilityRow,
};
pub use optdir_table::{optdir_table, perturbed_reference, OptDirConfig, OptDirRow, DEFAULT_EPS_S};
pub use reference::{
    placement_run, ref_row, ref_sweep, reference_layout, test_function, test_gradient, PlacementRun, RefMode, RefRow,
    RefSweepConfig,
};
pub use vmap::{near_zeros, v_at, vmap_curve, vmap_grid, Arrangement, VRow, VmapConfig};
