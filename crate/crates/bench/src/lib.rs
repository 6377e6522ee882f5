//! Shared fixtures for the benchmarks.

use piezolab_core::{DampingProfile, Grid1D, ModalOperator, PhysicalParams};

/// Default-parameter operator of mode `j` on `n` elements.
pub fn default_operator(n: usize, j: usize) -> ModalOperator {
    ModalOperator::assemble(
        PhysicalParams::default(),
        &DampingProfile::default(),
        Grid1D::new(n).expect("grid size >= 2"),
        j,
    )
    .expect("default operator assembles")
}
