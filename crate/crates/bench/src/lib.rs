//! Shared fixtures for the benchmark targets.

use msdspan::simulation::{simulate_panel, GarchSpec};
use msdspan::{PortfolioSet, ReturnPanel};

/// Heteroskedastic panel from the 4-asset design, fixed seed.
pub fn bench_panel(periods: usize) -> ReturnPanel {
    simulate_panel(&GarchSpec::panel_a(), periods, 7).unwrap()
}

/// Full simplex and a candidate set missing the last asset.
pub fn bench_sets(assets: usize) -> (PortfolioSet, PortfolioSet) {
    let outer = PortfolioSet::standard_simplex(assets);
    let coords: Vec<usize> = (0..assets - 1).collect();
    let inner = PortfolioSet::coordinate_simplex(assets, &coords).unwrap();
    (outer, inner)
}
