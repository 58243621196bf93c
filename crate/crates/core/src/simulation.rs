//! Conditionally heteroskedastic return simulator and the Monte Carlo
//! harness that measures the test's size and power on it.
//!
//! All base assets share one innovation stream; asset i scales it by its own
//! volatility recursion h_{i,t} = omega_i + (arch_i z^2 + garch_i) h_{i,t-1}.
//! The final asset is an option-like transform of the last base asset,
//! paying v_up per unit of gain and v_down per unit of loss. When v_up is
//! large and v_down small enough relative to the spread of the volatility
//! parameters, inverse S-shaped investors want that transform, so a
//! candidate set containing it spans the market while the same set without
//! it does not. That gives one design where the spanning null holds and one
//! where it fails, with everything else shared.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::character::{self, CharacterReport};
use crate::config::SpanningConfig;
use crate::error::Error;
use crate::panel::ReturnPanel;
use crate::resampling::{decide, Decision};
use crate::sets::PortfolioSet;
use crate::spanning::run_span_with_character;
use crate::Result;

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    Gaussian,
    /// Student t scaled to unit variance; needs df > 2.
    StudentT { df: f64 },
}

/// Shared-innovation volatility model plus the option-like last asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchSpec {
    /// Total assets including the transform; the first `assets - 1` follow
    /// the volatility recursion.
    pub assets: usize,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    pub arch: Vec<f64>,
    pub garch: Vec<f64>,
    /// Payout slope on the base asset's gains.
    pub v_up: f64,
    /// Payout slope on the base asset's losses.
    pub v_down: f64,
    pub innovation: Innovation,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl GarchSpec {
    /// Four assets: three volatility spreads around one shared innovation
    /// and the option transform on the third.
    pub fn panel_a() -> Self {
        Self {
            assets: 4,
            mu: vec![0.0; 3],
            omega: vec![0.5; 3],
            arch: vec![0.40, 0.45, 0.50],
            garch: vec![0.50, 0.45, 0.40],
            v_up: 1.5,
            v_down: 0.5,
            innovation: Innovation::StudentT { df: 5.0 },
            burn_in: DEFAULT_BURN_IN,
        }
    }

    /// Twelve assets: eleven base processes on an arch grid from 0.40 to
    /// 0.50 (garch moving opposite) and the transform on the eleventh.
    pub fn panel_b() -> Self {
        let steps = 11;
        Self {
            assets: steps + 1,
            mu: vec![0.0; steps],
            omega: vec![0.5; steps],
            arch: (0..steps).map(|i| 0.40 + 0.01 * i as f64).collect(),
            garch: (0..steps).map(|i| 0.50 - 0.01 * i as f64).collect(),
            v_up: 1.5,
            v_down: 0.5,
            innovation: Innovation::StudentT { df: 5.0 },
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let base = self
            .assets
            .checked_sub(1)
            .filter(|&b| b >= 2)
            .ok_or_else(|| {
                Error::InvalidConfig("need at least two base assets plus the transform".into())
            })?;
        for (name, v) in [
            ("mu", &self.mu),
            ("omega", &self.omega),
            ("arch", &self.arch),
            ("garch", &self.garch),
        ] {
            if v.len() != base {
                return Err(Error::InvalidConfig(format!(
                    "{name} has {} entries for {base} base assets",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} has a non-finite entry")));
            }
        }
        for i in 0..base {
            if self.omega[i] <= 0.0 {
                return Err(Error::InvalidConfig(format!("omega[{i}] must be positive")));
            }
            if self.arch[i] < 0.0 || self.garch[i] < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "negative volatility coefficient at asset {i}"
                )));
            }
            if self.arch[i] + self.garch[i] >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "asset {i} is not covariance stationary: arch + garch = {}",
                    self.arch[i] + self.garch[i]
                )));
            }
        }
        if !self.v_up.is_finite() || !self.v_down.is_finite() {
            return Err(Error::InvalidConfig("non-finite payout slope".into()));
        }
        if let Innovation::StudentT { df } = self.innovation {
            if !(df > 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "degrees of freedom {df} must exceed 2"
                )));
            }
        }
        Ok(())
    }
}

/// Simulate a panel of the specified length; the generator stream is fully
/// determined by `seed`.
pub fn simulate_panel(spec: &GarchSpec, periods: usize, seed: u64) -> Result<ReturnPanel> {
    spec.validate()?;
    if periods == 0 {
        return Err(Error::InvalidConfig("zero simulation length".into()));
    }
    let base = spec.assets - 1;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let student = match spec.innovation {
        Innovation::StudentT { df } => Some((
            StudentT::new(df).map_err(|e| Error::InvalidConfig(e.to_string()))?,
            ((df - 2.0) / df).sqrt(),
        )),
        Innovation::Gaussian => None,
    };
    let draw = move |rng: &mut ChaCha12Rng| -> f64 {
        match &student {
            Some((dist, scale)) => dist.sample(rng) * scale,
            None => StandardNormal.sample(rng),
        }
    };

    let mut h: Vec<f64> = (0..base)
        .map(|i| spec.omega[i] / (1.0 - spec.arch[i] - spec.garch[i]))
        .collect();
    let mut rows = Vec::with_capacity(periods);
    let mut z_prev: Option<f64> = None;
    for step in 0..spec.burn_in + periods {
        if let Some(z) = z_prev {
            for i in 0..base {
                h[i] = spec.omega[i] + (spec.arch[i] * z * z + spec.garch[i]) * h[i];
            }
        }
        let z = draw(&mut rng);
        if step >= spec.burn_in {
            let mut row = Vec::with_capacity(spec.assets);
            for i in 0..base {
                row.push(spec.mu[i] + z * h[i].sqrt());
            }
            let x = z * h[base - 1].sqrt();
            row.push(spec.v_up * x.max(0.0) + spec.v_down * x.min(0.0));
            rows.push(row);
        }
        z_prev = Some(z);
    }
    let names = (0..spec.assets).map(|i| format!("a{}", i + 1)).collect();
    ReturnPanel::new(rows, names, None)
}

/// A market set and two candidate subsets, one spanning it and one not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub garch: GarchSpec,
    /// Candidate base assets available to the inner sets.
    pub active: usize,
    pub outer: PortfolioSet,
    /// Candidate set including the transform asset.
    pub inner_spanning: PortfolioSet,
    /// The same candidate set without the transform asset.
    pub inner_deficient: PortfolioSet,
    pub warnings: Vec<String>,
}

/// Build the market and candidate sets for a simulator spec.
///
/// The market mixes the first `assets - 2` base assets freely and holds the
/// last base asset and the transform as stand-alone portfolios. Candidates
/// mix the first `active` base assets, plus the transform in the spanning
/// variant.
pub fn spanning_scenario(garch: GarchSpec, active: usize) -> Result<Scenario> {
    garch.validate()?;
    let n = garch.assets;
    let free = n - 2;
    if active == 0 || active > free {
        return Err(Error::InvalidConfig(format!(
            "active asset count {active} outside 1..={free}"
        )));
    }

    let unit = |i: usize| -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    let outer = PortfolioSet::new(
        (0..n).map(unit).collect(),
        vec![
            (0..free).collect::<Vec<_>>(),
            vec![free],
            vec![n - 1],
        ],
    )?;
    let inner_spanning = PortfolioSet::new(
        (0..active).chain([n - 1]).map(unit).collect(),
        vec![(0..active).collect::<Vec<_>>(), vec![active]],
    )?;
    let inner_deficient = PortfolioSet::new(
        (0..active).map(unit).collect(),
        vec![(0..active).collect::<Vec<_>>()],
    )?;

    // Payout slopes must clear the volatility spread for the transform to be
    // the preferred completion; outside that range the designs lose their
    // intended size/power roles.
    let pool: Vec<f64> = garch
        .omega
        .iter()
        .chain(&garch.arch)
        .chain(&garch.garch)
        .copied()
        .collect();
    let hi = pool.iter().copied().fold(f64::MIN, f64::max);
    let lo = pool.iter().copied().fold(f64::MAX, f64::min);
    let mut warnings = Vec::new();
    let up_floor = (hi / lo).sqrt();
    let down_ceiling = (lo / hi).sqrt();
    if garch.v_up.abs() <= up_floor {
        warnings.push(format!(
            "gain slope {} does not exceed the volatility spread bound {up_floor:.6}",
            garch.v_up
        ));
    }
    if garch.v_down.abs() >= down_ceiling {
        warnings.push(format!(
            "loss slope {} is not below the volatility spread bound {down_ceiling:.6}",
            garch.v_down
        ));
    }

    Ok(Scenario {
        garch,
        active,
        outer,
        inner_spanning,
        inner_deficient,
        warnings,
    })
}

/// Which of the two designed candidate sets a cell simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McDesign {
    /// Inner set includes the transform; rejections measure size.
    SpanningHolds,
    /// Inner set lacks the transform; rejections measure power.
    SpanningFails,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub design: McDesign,
    pub bias_correction: bool,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error of the rate.
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub replications: usize,
    pub periods: usize,
    pub alpha: f64,
    pub seed: u64,
    pub blocks: Vec<usize>,
    pub cells: Vec<McCell>,
    pub character_spanning: CharacterReport,
    pub character_deficient: CharacterReport,
    pub warnings: Vec<String>,
}

/// Rejection rates over simulated panels for both designs, with and without
/// bias correction. Replication r draws its panel from `config.rng_seed ^ r`.
pub fn run_mc(
    scenario: &Scenario,
    periods: usize,
    replications: usize,
    config: &SpanningConfig,
) -> Result<McResult> {
    if replications == 0 {
        return Err(Error::InvalidConfig("zero replications".into()));
    }
    let mut cfg = config.clone();
    cfg.bias_correction = true;
    cfg.validate(periods)?;
    let blocks = cfg.resolved_subsample_sizes(periods);

    let tols = &cfg.tolerances;
    let character_spanning =
        character::character(&scenario.outer, &scenario.inner_spanning, tols)?;
    let character_deficient =
        character::character(&scenario.outer, &scenario.inner_deficient, tols)?;

    let mut warnings = scenario.warnings.clone();
    for (label, report) in [
        ("spanning design", &character_spanning),
        ("deficient design", &character_deficient),
    ] {
        if let Some(w) = character::validate_alpha(report, cfg.alpha) {
            warnings.push(format!("{label}: {w}"));
        }
    }

    struct Rep {
        reject: [bool; 4],
    }
    let reps: Vec<Rep> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<Rep> {
            let panel = simulate_panel(&scenario.garch, periods, cfg.rng_seed ^ r as u64)?;
            let mut reject = [false; 4];
            for (slot, (inner, ch)) in [
                (&scenario.inner_spanning, &character_spanning),
                (&scenario.inner_deficient, &character_deficient),
            ]
            .into_iter()
            .enumerate()
            {
                let res = run_span_with_character(
                    &panel,
                    &scenario.outer,
                    inner,
                    &cfg,
                    Some(ch.clone()),
                )?;
                let corrected = res
                    .bias
                    .as_ref()
                    .expect("bias correction forced on")
                    .corrected;
                reject[2 * slot] = decide(res.statistic.xi, corrected) == Decision::Reject;
                reject[2 * slot + 1] =
                    decide(res.statistic.xi, res.critical_uncorrected) == Decision::Reject;
            }
            Ok(Rep { reject })
        })
        .collect::<Result<_>>()?;

    let designs = [McDesign::SpanningHolds, McDesign::SpanningFails];
    let mut cells = Vec::with_capacity(4);
    for (slot, design) in designs.into_iter().enumerate() {
        for (offset, bias_correction) in [(0usize, true), (1, false)] {
            let rejections = reps
                .iter()
                .filter(|rep| rep.reject[2 * slot + offset])
                .count();
            let rate = rejections as f64 / replications as f64;
            cells.push(McCell {
                design,
                bias_correction,
                rejections,
                rate,
                standard_error: (rate * (1.0 - rate) / replications as f64).sqrt(),
            });
        }
    }

    Ok(McResult {
        replications,
        periods,
        alpha: cfg.alpha,
        seed: cfg.rng_seed,
        blocks,
        cells,
        character_spanning,
        character_deficient,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simulation_is_seed_deterministic() {
        let spec = GarchSpec::panel_a();
        let a = simulate_panel(&spec, 50, 42).unwrap();
        let b = simulate_panel(&spec, 50, 42).unwrap();
        let c = simulate_panel(&spec, 50, 43).unwrap();
        assert_eq!(a.rows().collect::<Vec<_>>(), b.rows().collect::<Vec<_>>());
        assert_ne!(a.rows().collect::<Vec<_>>(), c.rows().collect::<Vec<_>>());
    }

    #[test]
    fn unit_slopes_make_the_transform_track_its_base() {
        let mut spec = GarchSpec::panel_a();
        spec.v_up = 1.0;
        spec.v_down = 1.0;
        let p = simulate_panel(&spec, 80, 7).unwrap();
        for t in 0..80 {
            let row = p.row(t);
            assert_abs_diff_eq!(row[3], row[2], epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_splits_gains_and_losses() {
        let spec = GarchSpec::panel_a();
        let p = simulate_panel(&spec, 200, 11).unwrap();
        for t in 0..200 {
            let row = p.row(t);
            let expect = 1.5 * row[2].max(0.0) + 0.5 * row[2].min(0.0);
            assert_abs_diff_eq!(row[3], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn nonstationary_specs_are_rejected() {
        let mut spec = GarchSpec::panel_a();
        spec.arch[0] = 0.6;
        assert!(matches!(
            simulate_panel(&spec, 10, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn standardized_innovations_have_unit_variance() {
        let mut spec = GarchSpec::panel_a();
        // Constant unit volatility isolates the innovation stream.
        spec.omega = vec![1.0; 3];
        spec.arch = vec![0.0; 3];
        spec.garch = vec![0.0; 3];
        let p = simulate_panel(&spec, 40_000, 3).unwrap();
        let var: f64 =
            (0..40_000).map(|t| p.row(t)[0] * p.row(t)[0]).sum::<f64>() / 40_000.0;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn base_volatility_matches_unconditional_level() {
        let mut spec = GarchSpec::panel_a();
        spec.innovation = Innovation::Gaussian;
        let p = simulate_panel(&spec, 60_000, 9).unwrap();
        let target = 0.5 / (1.0 - 0.4 - 0.5);
        let var: f64 =
            (0..60_000).map(|t| p.row(t)[0] * p.row(t)[0]).sum::<f64>() / 60_000.0;
        assert!(
            (var - target).abs() < 0.2 * target,
            "variance {var} vs {target}"
        );
    }

    #[test]
    fn scenario_sets_are_nested_subcomplexes() {
        let s = spanning_scenario(GarchSpec::panel_a(), 2).unwrap();
        assert!(s.warnings.is_empty());
        assert_eq!(s.outer.vertices().len(), 4);
        assert_eq!(s.outer.faces().len(), 3);
        assert_eq!(s.inner_spanning.vertices().len(), 3);
        assert_eq!(s.inner_deficient.vertices().len(), 2);
        for set in [&s.inner_spanning, &s.inner_deficient] {
            for v in set.vertices() {
                let d = character::project_to_complex(&s.outer, v).distance;
                assert!(d < 1e-12);
            }
        }
    }

    #[test]
    fn weak_slopes_trigger_warnings() {
        let mut spec = GarchSpec::panel_a();
        spec.v_up = 1.05;
        spec.v_down = 0.95;
        let s = spanning_scenario(spec, 2).unwrap();
        assert_eq!(s.warnings.len(), 2);
    }

    #[test]
    fn mc_smoke_runs_and_is_deterministic() {
        let scenario = spanning_scenario(GarchSpec::panel_a(), 2).unwrap();
        let cfg = SpanningConfig {
            subsample_sizes: vec![15, 25],
            rng_seed: 17,
            ..SpanningConfig::default()
        };
        let a = run_mc(&scenario, 40, 3, &cfg).unwrap();
        let b = run_mc(&scenario, 40, 3, &cfg).unwrap();
        assert_eq!(a.cells.len(), 4);
        for cell in &a.cells {
            assert!(cell.rate >= 0.0 && cell.rate <= 1.0);
        }
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        // Character of the deficient two-asset candidate in the four-asset
        // market: both inner vertices coincide with effective market
        // vertices that tie nobody else.
        assert_eq!(a.character_deficient.character_numer, "1");
        assert_eq!(a.character_deficient.character_denom, "2");
    }
}
