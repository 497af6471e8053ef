//! Identifiability verdicts, minimal-configuration enumeration, CRLB
//! reports, and parameter sweeps.

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::Serialize;

use crate::efim::scenario_efim;
use crate::error::{Error, Result};
use crate::geometry::SPEED_OF_LIGHT;
use crate::scenario::{default_scenario, Scenario, SyncMode};
use crate::transform::{information_factor, InformationFactor, INTEREST_DIM};
use crate::waveform::{effective_bandwidth, resolve_snr};

/// Positive-definiteness threshold on the normalized spectrum ratio of
/// the root-information block.
pub const PD_RATIO_THRESHOLD: f64 = 1.0e-10;

/// Rows whose post-elimination norm falls below this fraction of their
/// pre-elimination norm carry no residual information: what remains is
/// projection roundoff (machine epsilon times the row scale), orders of
/// magnitude below this floor, while genuinely surviving information
/// stays orders of magnitude above it.
const STRUCTURAL_FLOOR: f64 = 1.0e-12;

/// Which block of the nine interest parameters a verdict refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Position,
    Velocity,
    Orientation,
    Full9d,
}

impl Target {
    pub fn range(self) -> std::ops::Range<usize> {
        match self {
            Target::Position => 0..3,
            Target::Velocity => 3..6,
            Target::Orientation => 6..9,
            Target::Full9d => 0..9,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Target::Position => "position",
            Target::Velocity => "velocity",
            Target::Orientation => "orientation",
            Target::Full9d => "9d",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "position" => Ok(Target::Position),
            "velocity" => Ok(Target::Velocity),
            "orientation" => Ok(Target::Orientation),
            "9d" | "full" | "full9d" => Ok(Target::Full9d),
            other => Err(Error::InvalidArgument(format!(
                "unknown target '{other}' (expected position, velocity, orientation, or 9d)"
            ))),
        }
    }
}

/// Positive-definiteness verdict for one target block.
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityVerdict {
    pub target: Target,
    pub mode: SyncMode,
    pub n_sats: usize,
    pub n_slots: usize,
    pub n_antennas: usize,
    pub positive_definite: bool,
    /// `sigma_min / sigma_max` of the row-normalized root-information
    /// block after nuisance elimination (the square root of the
    /// normalized eigenvalue ratio of the corresponding EFIM block).
    pub eigen_ratio: f64,
    /// Present when the verdict is negative for a structural reason.
    pub reason: Option<String>,
}

/// Normalized singular-spectrum ratio of one target block of the
/// root-information factor.
///
/// Works on a square-root factor `G` of the location FIM (`J = G G^T`)
/// rather than on the assembled EFIM. Nuisance parameters are
/// eliminated by projecting their row space out of the factor columns,
/// which is the factor-level form of the Schur complement:
/// `G_I (I - P_N) G_I^T = J_I - J_IN J_N^+ J_NI`. The verdict is
/// `sigma_min / sigma_max` of the row-normalized surviving target rows.
///
/// The factor is essential for a trustworthy threshold. Forming the
/// EFIM squares the spectrum: transverse information from an antenna
/// array scales as (baseline / range)^2 ~ 1e-14 relative to the radial
/// information, indistinguishable at matrix level from the ~1e-16
/// relative noise floor of a structurally singular block. On the
/// factor the same geometry sits at sigma ~ baseline / range ~ 1e-7
/// while structural deficiencies stay at machine noise, so a single
/// threshold separates them cleanly.
fn factor_spectrum_ratio(factor: &InformationFactor, target: Target) -> (bool, f64) {
    let g = &factor.matrix;
    let (n, m) = (g.nrows(), g.ncols());
    let t = target.range();
    let mut block = g.view((t.start, 0), (t.len(), m)).clone_owned();
    let pre_norms: Vec<f64> = (0..t.len()).map(|i| block.row(i).norm()).collect();

    // Eliminate nuisance rows: project their (row-normalized) row space
    // out of the target rows. Row scaling does not change a row space,
    // and normalizing first keeps the rank cutoff meaningful when
    // offset and gain rows differ in scale by many orders of magnitude.
    if n > INTEREST_DIM {
        let mut nuisance = g
            .view((INTEREST_DIM, 0), (n - INTEREST_DIM, m))
            .clone_owned();
        for i in 0..nuisance.nrows() {
            let norm = nuisance.row(i).norm();
            if norm > 0.0 {
                let mut row = nuisance.row_mut(i);
                row /= norm;
            }
        }
        let svd = nuisance.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let s_max = svd.singular_values.max();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > 1.0e-8 * s_max {
                let v = v_t.row(i);
                let coeffs = &block * v.transpose();
                block -= coeffs * v;
            }
        }
    }

    // A target row reduced to projection roundoff means the parameter
    // has no information left once nuisances are estimated.
    for (i, &pre) in pre_norms.iter().enumerate() {
        let post = block.row(i).norm();
        if !(post > STRUCTURAL_FLOOR * pre) {
            return (false, 0.0);
        }
        let mut row = block.row_mut(i);
        row /= post;
    }

    let sv = block.svd(false, false).singular_values;
    if sv.len() < t.len() {
        return (false, 0.0);
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &s in sv.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if !(hi > 0.0) {
        return (false, 0.0);
    }
    let ratio = lo / hi;
    (ratio > PD_RATIO_THRESHOLD, ratio)
}

/// Build the root-information factor and threshold one target block.
///
/// Geometry or assembly failures are reported as non-identifiable with
/// the error text as the reason, not propagated.
pub fn check_identifiability(scenario: &Scenario, target: Target) -> IdentifiabilityVerdict {
    let base = IdentifiabilityVerdict {
        target,
        mode: scenario.sync_mode,
        n_sats: scenario.n_satellites(),
        n_slots: scenario.n_slots(),
        n_antennas: scenario.n_antennas(),
        positive_definite: false,
        eigen_ratio: 0.0,
        reason: None,
    };
    match information_factor(scenario) {
        Ok(factor) => {
            let (pd, ratio) = factor_spectrum_ratio(&factor, target);
            IdentifiabilityVerdict {
                positive_definite: pd,
                eigen_ratio: ratio,
                ..base
            }
        }
        Err(e) => IdentifiabilityVerdict {
            reason: Some(e.to_string()),
            ..base
        },
    }
}

/// Bounds on the search grid for `minimal_config_search`.
#[derive(Debug, Clone, Copy)]
pub struct ConfigRanges {
    pub max_sats: usize,
    pub max_slots: usize,
    pub max_antennas: usize,
}

impl Default for ConfigRanges {
    fn default() -> Self {
        Self {
            max_sats: 3,
            max_slots: 3,
            max_antennas: 4,
        }
    }
}

/// One grid row of the configuration search.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigRow {
    pub n_sats: usize,
    pub n_slots: usize,
    pub n_antennas: usize,
    pub positive_definite: bool,
    pub eigen_ratio: f64,
    /// True for Pareto-minimal identifiable configurations: no other
    /// identifiable row is componentwise smaller.
    pub minimal: bool,
}

/// Exhaustive verdict grid over `(N_B, N_K, N_U)` at the default
/// geometry, with Pareto-minimal identifiable rows flagged.
pub fn minimal_config_search(
    ranges: ConfigRanges,
    mode: SyncMode,
    target: Target,
) -> Result<Vec<ConfigRow>> {
    if ranges.max_sats == 0 || ranges.max_slots == 0 || ranges.max_antennas == 0 {
        return Err(Error::InvalidArgument(
            "configuration search ranges must be nonempty".into(),
        ));
    }
    let mut grid = Vec::new();
    for b in 1..=ranges.max_sats {
        for k in 1..=ranges.max_slots {
            for u in 1..=ranges.max_antennas {
                grid.push((b, k, u));
            }
        }
    }
    let mut rows: Vec<ConfigRow> = grid
        .par_iter()
        .map(|&(b, k, u)| {
            let scenario = default_scenario(b, k, u, mode);
            let v = check_identifiability(&scenario, target);
            ConfigRow {
                n_sats: b,
                n_slots: k,
                n_antennas: u,
                positive_definite: v.positive_definite,
                eigen_ratio: v.eigen_ratio,
                minimal: false,
            }
        })
        .collect();
    let pd: Vec<(usize, usize, usize)> = rows
        .iter()
        .filter(|r| r.positive_definite)
        .map(|r| (r.n_sats, r.n_slots, r.n_antennas))
        .collect();
    for row in rows.iter_mut() {
        if !row.positive_definite {
            continue;
        }
        let me = (row.n_sats, row.n_slots, row.n_antennas);
        row.minimal = !pd.iter().any(|&other| {
            other != me && other.0 <= me.0 && other.1 <= me.1 && other.2 <= me.2
        });
    }
    Ok(rows)
}

/// Cramér–Rao bounds on the nine interest parameters.
///
/// Bounds are the square roots of summed diagonal triples of the
/// inverted EFIM; `per_axis` holds the nine individual root-variances.
#[derive(Debug, Clone, Serialize)]
pub struct CrlbReport {
    pub identifiable: bool,
    pub eigen_ratio: f64,
    pub position_bound_m: Option<f64>,
    pub velocity_bound_mps: Option<f64>,
    pub orientation_bound_rad: Option<f64>,
    pub per_axis: Option<[f64; 9]>,
}

impl CrlbReport {
    fn not_identifiable(ratio: f64) -> Self {
        Self {
            identifiable: false,
            eigen_ratio: ratio,
            position_bound_m: None,
            velocity_bound_mps: None,
            orientation_bound_rad: None,
            per_axis: None,
        }
    }
}

/// Invert the 9x9 EFIM through its diagonally normalized form.
///
/// `J = D^{1/2} C D^{1/2}` with unit-diagonal `C`; inverting `C` keeps
/// the condition number driven by geometry rather than by the unit
/// disparity between position, velocity, and orientation rows.
fn invert_normalized(efim: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = efim.nrows();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = efim[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        scale.push(d.sqrt());
    }
    let c = DMatrix::from_fn(n, n, |i, j| efim[(i, j)] / (scale[i] * scale[j]));
    let c_inv = c.try_inverse()?;
    Some(DMatrix::from_fn(n, n, |i, j| {
        c_inv[(i, j)] / (scale[i] * scale[j])
    }))
}

/// CRLB report for a scenario under its sync mode.
pub fn crlb_report(scenario: &Scenario) -> Result<CrlbReport> {
    let factor = information_factor(scenario)?;
    let (pd, ratio) = factor_spectrum_ratio(&factor, Target::Full9d);
    if !pd {
        return Ok(CrlbReport::not_identifiable(ratio));
    }
    let (result, _) = scenario_efim(scenario)?;
    let inv = match invert_normalized(&result.efim) {
        Some(m) => m,
        None => return Ok(CrlbReport::not_identifiable(ratio)),
    };
    let mut per_axis = [0.0_f64; 9];
    for (i, v) in per_axis.iter_mut().enumerate() {
        let var = inv[(i, i)];
        if !(var > 0.0) {
            return Ok(CrlbReport::not_identifiable(ratio));
        }
        *v = var.sqrt();
    }
    let sum3 = |lo: usize| (lo..lo + 3).map(|i| inv[(i, i)]).sum::<f64>().sqrt();
    Ok(CrlbReport {
        identifiable: true,
        eigen_ratio: ratio,
        position_bound_m: Some(sum3(0)),
        velocity_bound_mps: Some(sum3(3)),
        orientation_bound_rad: Some(sum3(6)),
        per_axis: Some(per_axis),
    })
}

/// Sweep axis for `parameter_sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Number of receive antennas (grid values rounded to integers).
    Antennas,
    /// Spacing between observation slots, seconds.
    SlotSpacing,
    /// Carrier frequency, Hz (array pitch held fixed).
    Frequency,
    /// Link SNR, dB.
    Snr,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Antennas => "antennas",
            SweepAxis::SlotSpacing => "slot-spacing",
            SweepAxis::Frequency => "frequency",
            SweepAxis::Snr => "snr",
        }
    }

    fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        match self {
            SweepAxis::Antennas => {
                let n = value.round();
                if !(n >= 1.0) || (n - value).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "antenna grid value {value} is not a positive integer"
                    )));
                }
                Ok(base.clone().with_antennas(n as usize))
            }
            SweepAxis::SlotSpacing => Ok(base.clone().with_slot_spacing(value)),
            SweepAxis::Frequency => Ok(base.clone().with_carrier(value)),
            SweepAxis::Snr => Ok(base.clone().with_snr_db(value)),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "antennas" => Ok(SweepAxis::Antennas),
            "slot-spacing" | "slot_spacing" | "spacing" => Ok(SweepAxis::SlotSpacing),
            "frequency" | "carrier" => Ok(SweepAxis::Frequency),
            "snr" => Ok(SweepAxis::Snr),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep axis '{other}' (expected antennas, slot-spacing, frequency, or snr)"
            ))),
        }
    }
}

/// One evaluated sweep grid point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub report: CrlbReport,
}

fn sweep_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("LEOFIM_THREADS") {
        let n: usize = raw.parse().map_err(|_| {
            Error::Config(format!("LEOFIM_THREADS must be a positive integer, got '{raw}'"))
        })?;
        if n == 0 {
            return Err(Error::Config(
                "LEOFIM_THREADS must be a positive integer, got '0'".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("failed to build sweep thread pool: {e}")))
}

/// Evaluate CRLB reports along one axis; grid order is preserved in the
/// output regardless of evaluation order.
pub fn parameter_sweep(
    base: &Scenario,
    axis: SweepAxis,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    let pool = sweep_pool()?;
    let results: Vec<Result<SweepPoint>> = pool.install(|| {
        grid.par_iter()
            .map(|&value| {
                let scenario = axis.apply(base, value)?;
                let report = crlb_report(&scenario)?;
                Ok(SweepPoint {
                    axis_value: value,
                    report,
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Position-information 3x3 block carried by the Doppler observations
/// alone (no nuisance elimination).
pub fn doppler_position_information(scenario: &Scenario) -> Result<Matrix3<f64>> {
    scenario.validate()?;
    let stats = scenario.pulse_statistics()?;
    let links = scenario.links()?;
    let mut block = Matrix3::zeros();
    let a2 = stats.alpha_o * stats.alpha_o;
    for (b, sat_links) in links.iter().enumerate() {
        for link in sat_links {
            let mut slot_snr = 0.0;
            for u in 0..scenario.n_antennas() {
                slot_snr += resolve_snr(&scenario.budget, b, u, link.slot)?;
            }
            let grad = link.position_gradient()?;
            block += grad * grad.transpose()
                * (slot_snr * scenario.carrier_hz * scenario.carrier_hz * a2 / 2.0);
        }
    }
    Ok(block)
}

/// Position-information 3x3 block carried by the delay observations
/// alone (no nuisance elimination).
pub fn delay_position_information(scenario: &Scenario) -> Result<Matrix3<f64>> {
    scenario.validate()?;
    let stats = scenario.pulse_statistics()?;
    let links = scenario.links()?;
    let mut block = Matrix3::zeros();
    for (b, sat_links) in links.iter().enumerate() {
        for link in sat_links {
            let f_ob = scenario.carrier_hz * (1.0 - link.doppler);
            let omega = effective_bandwidth(stats.alpha1, stats.alpha2, f_ob);
            for u in 0..scenario.n_antennas() {
                let snr = resolve_snr(&scenario.budget, b, u, link.slot)?;
                let d = &link.antenna_deltas[u] / SPEED_OF_LIGHT;
                block += d * d.transpose() * (snr * omega);
            }
        }
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn full_sync_two_sats_one_slot_position_pd() {
        let s = default_scenario(2, 1, 1, SyncMode::FullSync);
        let v = check_identifiability(&s, Target::Position);
        assert!(v.positive_definite, "ratio {}", v.eigen_ratio);
    }

    #[test]
    fn orientation_single_antenna_never_pd() {
        for &mode in &[SyncMode::FullSync, SyncMode::BothOffsets] {
            let s = default_scenario(3, 3, 1, mode);
            let v = check_identifiability(&s, Target::Orientation);
            assert!(!v.positive_definite, "{mode:?}");
        }
    }

    #[test]
    fn snr_hundredfold_divides_bounds_by_ten() {
        let s = default_scenario(3, 3, 4, SyncMode::BothOffsets);
        let loud = s.clone().with_snr_db(0.0);
        let a = crlb_report(&s).unwrap();
        let b = crlb_report(&loud).unwrap();
        assert!(a.identifiable && b.identifiable);
        assert_relative_eq!(
            a.position_bound_m.unwrap() / b.position_bound_m.unwrap(),
            10.0,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            a.orientation_bound_rad.unwrap() / b.orientation_bound_rad.unwrap(),
            10.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn non_identifiable_report_has_no_numbers() {
        let s = default_scenario(1, 1, 1, SyncMode::BothOffsets);
        let r = crlb_report(&s).unwrap();
        assert!(!r.identifiable);
        assert!(r.position_bound_m.is_none());
        assert!(r.per_axis.is_none());
    }

    #[test]
    fn sweep_preserves_grid_order_and_snr_monotone() {
        let s = default_scenario(3, 3, 4, SyncMode::BothOffsets);
        let grid = [-20.0, 0.0, 20.0, 40.0];
        let points = parameter_sweep(&s, SweepAxis::Snr, &grid).unwrap();
        assert_eq!(points.len(), 4);
        for (p, &g) in points.iter().zip(grid.iter()) {
            assert_eq!(p.axis_value, g);
        }
        for w in points.windows(2) {
            assert!(
                w[1].report.position_bound_m.unwrap() < w[0].report.position_bound_m.unwrap()
            );
        }
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let s = default_scenario(3, 3, 4, SyncMode::BothOffsets);
        assert!(parameter_sweep(&s, SweepAxis::Snr, &[]).is_err());
        assert!(parameter_sweep(&s, SweepAxis::Snr, &[0.0, 0.0]).is_err());
        assert!(parameter_sweep(&s, SweepAxis::Antennas, &[1.5, 2.0]).is_err());
    }

    #[test]
    fn minimal_rows_are_pareto_minimal() {
        let rows = minimal_config_search(
            ConfigRanges::default(),
            SyncMode::FullSync,
            Target::Position,
        )
        .unwrap();
        for r in rows.iter().filter(|r| r.minimal) {
            assert!(r.positive_definite);
            for o in rows.iter().filter(|o| o.positive_definite) {
                let same =
                    (o.n_sats, o.n_slots, o.n_antennas) == (r.n_sats, r.n_slots, r.n_antennas);
                if !same {
                    assert!(
                        !(o.n_sats <= r.n_sats
                            && o.n_slots <= r.n_slots
                            && o.n_antennas <= r.n_antennas),
                        "row ({},{},{}) dominated by ({},{},{})",
                        r.n_sats,
                        r.n_slots,
                        r.n_antennas,
                        o.n_sats,
                        o.n_slots,
                        o.n_antennas
                    );
                }
            }
        }
    }

    #[test]
    fn doppler_block_psd_and_snr_linear() {
        let s = default_scenario(3, 2, 2, SyncMode::FullSync);
        let a = doppler_position_information(&s).unwrap();
        let b = doppler_position_information(&s.clone().with_snr_db(-10.0)).unwrap();
        let eig = a.symmetric_eigenvalues();
        for &l in eig.iter() {
            assert!(l >= 0.0);
        }
        assert_relative_eq!((b - a * 10.0).norm() / a.norm(), 0.0, epsilon = 1e-9);
    }
}
