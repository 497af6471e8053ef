//! Jacobian from channel parameters to location parameters and the
//! bilinear FIM transform `J_kappa = Upsilon J_eta Upsilon^T`.
//!
//! The Jacobian entries are derived from the system-model relations and
//! accepted only after finite-difference verification (see the oracle
//! module).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fim::{ChannelParameterIndex, FimMatrix};
use crate::geometry::SPEED_OF_LIGHT;
use crate::scenario::{Scenario, SyncMode};

/// One location parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LocationParam {
    /// Receiver reference position component, meters.
    Position(usize),
    /// Receiver velocity component, m/s.
    Velocity(usize),
    /// Orientation angle component, radians.
    Orientation(usize),
    /// Channel amplitude nuisance for one satellite.
    Gain { sat: usize },
    /// Per-satellite time offset nuisance.
    TimeOffset { sat: usize },
    /// Per-satellite frequency offset nuisance.
    FreqOffset { sat: usize },
    /// Time offset shared across all satellites (GPS-style).
    SharedTimeOffset,
    /// Frequency offset shared across all satellites (GPS-style).
    SharedFreqOffset,
}

/// Ordered layout of `kappa = [p, v, Phi, zeta_1, ..., zeta_NB]`; the
/// first nine entries are the interest slice.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationParameterIndex {
    pub n_sats: usize,
    pub mode: SyncMode,
    labels: Vec<LocationParam>,
}

/// Number of interest parameters (3D position + velocity + orientation).
pub const INTEREST_DIM: usize = 9;

impl LocationParameterIndex {
    pub fn new(n_sats: usize, mode: SyncMode) -> Self {
        let mut labels = Vec::with_capacity(INTEREST_DIM + 3 * n_sats);
        for i in 0..3 {
            labels.push(LocationParam::Position(i));
        }
        for i in 0..3 {
            labels.push(LocationParam::Velocity(i));
        }
        for i in 0..3 {
            labels.push(LocationParam::Orientation(i));
        }
        if mode.shares_offsets() {
            for b in 0..n_sats {
                labels.push(LocationParam::Gain { sat: b });
            }
            labels.push(LocationParam::SharedTimeOffset);
            labels.push(LocationParam::SharedFreqOffset);
        } else {
            for b in 0..n_sats {
                labels.push(LocationParam::Gain { sat: b });
                if mode.has_time_offset() {
                    labels.push(LocationParam::TimeOffset { sat: b });
                }
                if mode.has_freq_offset() {
                    labels.push(LocationParam::FreqOffset { sat: b });
                }
            }
        }
        Self {
            n_sats,
            mode,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[LocationParam] {
        &self.labels
    }

    pub fn position_of(&self, label: LocationParam) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }
}

/// Jacobian with rows indexed by `kappa` and columns by `eta`.
#[derive(Debug, Clone)]
pub struct JacobianMatrix {
    pub rows: LocationParameterIndex,
    pub cols: ChannelParameterIndex,
    pub matrix: DMatrix<f64>,
}

/// Build the channel-to-location Jacobian for a scenario.
///
/// Delay rows carry the antenna-specific unit vectors; Doppler rows use
/// the centroid direction and are orientation-independent (the Doppler is
/// defined at the centroid, so the array extent never enters it).
pub fn build_jacobian(scenario: &Scenario) -> Result<JacobianMatrix> {
    scenario.validate()?;
    let links = scenario.links()?;
    let rows = LocationParameterIndex::new(scenario.n_satellites(), scenario.sync_mode);
    let cols = ChannelParameterIndex::new(
        scenario.n_satellites(),
        scenario.n_antennas(),
        scenario.n_slots(),
        scenario.sync_mode,
    );
    let q_partials = crate::geometry::rotation_matrix_partials(&scenario.receiver.orientation)?;
    let dt = scenario.slot_spacing_s;
    let mut m = DMatrix::zeros(rows.len(), cols.len());

    for sat_links in &links {
        for link in sat_links {
            let b = link.satellite;
            let k = link.slot;
            let kdt = k as f64 * dt;
            for u in 0..scenario.n_antennas() {
                let col = cols.delay(b, u, k);
                let delta_u = &link.antenna_deltas[u];
                let offset = &scenario.receiver.antenna_offsets[u];
                for i in 0..3 {
                    m[(i, col)] = delta_u[i] / SPEED_OF_LIGHT;
                    m[(3 + i, col)] = kdt * delta_u[i] / SPEED_OF_LIGHT;
                    m[(6 + i, col)] = delta_u.dot(&(q_partials[i] * offset)) / SPEED_OF_LIGHT;
                }
            }
            let col = cols.doppler(b, k);
            let grad = link.position_gradient()?;
            for i in 0..3 {
                m[(i, col)] = grad[i];
                m[(3 + i, col)] = -link.delta[i] / SPEED_OF_LIGHT;
                // orientation rows stay zero: Dopplers carry no
                // orientation information
            }
        }
    }

    for b in 0..scenario.n_satellites() {
        let row = rows
            .position_of(LocationParam::Gain { sat: b })
            .expect("gain row exists");
        m[(row, cols.gain(b))] = 1.0;
        if let Some(col) = cols.time_offset(b) {
            let row = if scenario.sync_mode.shares_offsets() {
                rows.position_of(LocationParam::SharedTimeOffset)
            } else {
                rows.position_of(LocationParam::TimeOffset { sat: b })
            }
            .expect("time offset row exists");
            m[(row, col)] = 1.0;
        }
        if let Some(col) = cols.freq_offset(b) {
            let row = if scenario.sync_mode.shares_offsets() {
                rows.position_of(LocationParam::SharedFreqOffset)
            } else {
                rows.position_of(LocationParam::FreqOffset { sat: b })
            }
            .expect("freq offset row exists");
            m[(row, col)] = 1.0;
        }
    }

    Ok(JacobianMatrix {
        rows,
        cols,
        matrix: m,
    })
}

/// `J_kappa = Upsilon J_eta Upsilon^T`.
pub fn transform_fim(
    j_eta: &FimMatrix<ChannelParameterIndex>,
    jacobian: &JacobianMatrix,
) -> Result<FimMatrix<LocationParameterIndex>> {
    if jacobian.matrix.ncols() != j_eta.dim() {
        return Err(Error::DimensionMismatch {
            expected: jacobian.matrix.ncols(),
            got: j_eta.dim(),
        });
    }
    let m = &jacobian.matrix * &j_eta.matrix * jacobian.matrix.transpose();
    // enforce exact symmetry against roundoff in the triple product
    let m = (&m + m.transpose()) * 0.5;
    Ok(FimMatrix {
        index: jacobian.rows.clone(),
        matrix: m,
    })
}

/// Square-root factor of the location-parameter FIM: `J_kappa = G G^T`
/// with one column per information source.
///
/// Columns: per (satellite, antenna, slot) a delay column
/// `sqrt(SNR omega) (grad tau - e_delta)`, per (satellite, slot) a
/// Doppler column `sqrt(SNR_slot alpha_o^2 / 2) (f_c grad nu - e_eps)`,
/// and per satellite a gain column. Working on the factor keeps
/// structural rank information that is destroyed by forming `G G^T`
/// (squaring the singular-value spread of near-degenerate geometry).
#[derive(Debug, Clone)]
pub struct InformationFactor {
    pub index: LocationParameterIndex,
    pub matrix: DMatrix<f64>,
}

pub fn information_factor(scenario: &Scenario) -> Result<InformationFactor> {
    scenario.validate()?;
    let stats = scenario.pulse_statistics()?;
    let links = scenario.links()?;
    let index = LocationParameterIndex::new(scenario.n_satellites(), scenario.sync_mode);
    let q_partials = crate::geometry::rotation_matrix_partials(&scenario.receiver.orientation)?;
    let dt = scenario.slot_spacing_s;
    let (nb, nk, nu) = (
        scenario.n_satellites(),
        scenario.n_slots(),
        scenario.n_antennas(),
    );
    let m = nb * nk * nu + nb * nk + nb;
    let mut g = DMatrix::zeros(index.len(), m);
    let beta = scenario.budget.gain_amplitude();
    let mut col = 0;
    let mut gain_weight = vec![0.0_f64; nb];

    for sat_links in &links {
        for link in sat_links {
            let b = link.satellite;
            let k = link.slot;
            let kdt = k as f64 * dt;
            let f_ob = scenario.carrier_hz * (1.0 - link.doppler);
            let omega = crate::waveform::effective_bandwidth(stats.alpha1, stats.alpha2, f_ob);
            let delta_row = if scenario.sync_mode.has_time_offset() {
                if scenario.sync_mode.shares_offsets() {
                    index.position_of(LocationParam::SharedTimeOffset)
                } else {
                    index.position_of(LocationParam::TimeOffset { sat: b })
                }
            } else {
                None
            };
            let eps_row = if scenario.sync_mode.has_freq_offset() {
                if scenario.sync_mode.shares_offsets() {
                    index.position_of(LocationParam::SharedFreqOffset)
                } else {
                    index.position_of(LocationParam::FreqOffset { sat: b })
                }
            } else {
                None
            };
            let mut slot_snr = 0.0;
            for u in 0..nu {
                let snr = crate::waveform::resolve_snr(&scenario.budget, b, u, k)?;
                slot_snr += snr;
                gain_weight[b] += snr / (4.0 * std::f64::consts::PI.powi(2) * beta * beta);
                let w = (snr * omega).sqrt();
                let delta_u = &link.antenna_deltas[u];
                let offset = &scenario.receiver.antenna_offsets[u];
                for i in 0..3 {
                    g[(i, col)] = w * delta_u[i] / SPEED_OF_LIGHT;
                    g[(3 + i, col)] = w * kdt * delta_u[i] / SPEED_OF_LIGHT;
                    g[(6 + i, col)] =
                        w * delta_u.dot(&(q_partials[i] * offset)) / SPEED_OF_LIGHT;
                }
                if let Some(r) = delta_row {
                    g[(r, col)] = -w;
                }
                col += 1;
            }
            let wv = (slot_snr * stats.alpha_o * stats.alpha_o / 2.0).sqrt();
            let grad = link.position_gradient()?;
            for i in 0..3 {
                g[(i, col)] = wv * scenario.carrier_hz * grad[i];
                g[(3 + i, col)] = -wv * scenario.carrier_hz * link.delta[i] / SPEED_OF_LIGHT;
            }
            if let Some(r) = eps_row {
                g[(r, col)] = -wv;
            }
            col += 1;
        }
    }
    for (b, w) in gain_weight.iter().enumerate() {
        let r = index
            .position_of(LocationParam::Gain { sat: b })
            .expect("gain row exists");
        g[(r, col)] = w.sqrt();
        col += 1;
    }
    debug_assert_eq!(col, m);
    Ok(InformationFactor { index, matrix: g })
}

/// Location-parameter FIM for a scenario under its sync mode.
///
/// Offsets absent from the mode are dropped from the channel vector;
/// `gps-shared` keeps per-satellite channel offsets but maps them onto a
/// single shared pair of location parameters.
pub fn location_fim(scenario: &Scenario) -> Result<FimMatrix<LocationParameterIndex>> {
    let j_eta = crate::fim::assemble_channel_fim(scenario)?;
    let jacobian = build_jacobian(scenario)?;
    transform_fim(&j_eta, &jacobian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fim::assemble_channel_fim;
    use crate::scenario::{default_scenario, SyncMode};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn kappa_dimensions_per_mode() {
        assert_eq!(LocationParameterIndex::new(2, SyncMode::FullSync).len(), 9 + 2);
        assert_eq!(
            LocationParameterIndex::new(3, SyncMode::BothOffsets).len(),
            9 + 9
        );
        assert_eq!(
            LocationParameterIndex::new(3, SyncMode::GpsShared).len(),
            9 + 3 + 2
        );
    }

    #[test]
    fn centroid_antenna_has_zero_orientation_columns() {
        let s = default_scenario(2, 2, 1, SyncMode::BothOffsets);
        // single centroid antenna
        let s = s.with_antennas(1);
        let jac = build_jacobian(&s).unwrap();
        for col in 0..jac.matrix.ncols() {
            for i in 6..9 {
                assert_eq!(jac.matrix[(i, col)], 0.0);
            }
        }
    }

    #[test]
    fn slot_zero_velocity_columns_of_delays_are_zero() {
        let s = default_scenario(1, 2, 2, SyncMode::FullSync);
        let jac = build_jacobian(&s).unwrap();
        let col = jac.cols.delay(0, 0, 0);
        for i in 3..6 {
            assert_eq!(jac.matrix[(i, col)], 0.0);
        }
        // slot 1 columns scale with k dt
        let col1 = jac.cols.delay(0, 0, 1);
        for i in 0..3 {
            assert_relative_eq!(
                jac.matrix[(3 + i, col1)],
                s.slot_spacing_s * jac.matrix[(i, col1)],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn doppler_rows_orientation_free() {
        let s = default_scenario(2, 3, 4, SyncMode::BothOffsets);
        let jac = build_jacobian(&s).unwrap();
        for b in 0..2 {
            for k in 0..3 {
                let col = jac.cols.doppler(b, k);
                for i in 6..9 {
                    assert_eq!(jac.matrix[(i, col)], 0.0);
                }
            }
        }
    }

    #[test]
    fn transform_identity_and_scaling() {
        let s = default_scenario(1, 1, 1, SyncMode::BothOffsets);
        let j_eta = assemble_channel_fim(&s).unwrap();
        let n = j_eta.dim();
        let identity = JacobianMatrix {
            rows: LocationParameterIndex::new(1, SyncMode::BothOffsets),
            cols: j_eta.index.clone(),
            matrix: DMatrix::identity(n, n),
        };
        // identity relabeling (dimensions happen to match for 1 sat, 1 ant, 1 slot)
        let j_kappa = transform_fim(&j_eta, &identity).unwrap();
        assert_relative_eq!((&j_kappa.matrix - &j_eta.matrix).norm(), 0.0, epsilon = 1e-12);

        let scaled = JacobianMatrix {
            rows: identity.rows.clone(),
            cols: identity.cols.clone(),
            matrix: identity.matrix * 3.0,
        };
        let j_scaled = transform_fim(&j_eta, &scaled).unwrap();
        let rel = (&j_scaled.matrix - &j_eta.matrix * 9.0).norm() / (9.0 * j_eta.matrix.norm());
        assert!(rel < 1e-12, "relative deviation {rel}");
    }

    #[test]
    fn transform_rank_bound() {
        let s = default_scenario(2, 2, 2, SyncMode::BothOffsets);
        let j_eta = assemble_channel_fim(&s).unwrap();
        let jac = build_jacobian(&s).unwrap();
        let j_kappa = transform_fim(&j_eta, &jac).unwrap();
        let rank_of = |m: &DMatrix<f64>| {
            let svd = m.clone().svd(false, false);
            let max = svd.singular_values.max();
            svd.singular_values
                .iter()
                .filter(|&&s| s > 1e-12 * max)
                .count()
        };
        let r_kappa = rank_of(&j_kappa.matrix);
        let r_eta = rank_of(&j_eta.matrix);
        let r_jac = rank_of(&jac.matrix);
        assert!(r_kappa <= r_eta.min(r_jac));
    }

    #[test]
    fn transform_preserves_psd() {
        for &mode in &[SyncMode::FullSync, SyncMode::BothOffsets, SyncMode::GpsShared] {
            let s = default_scenario(3, 2, 3, mode);
            let j = location_fim(&s).unwrap();
            assert!(j.symmetry_defect() < 1e-12);
            assert!(j.is_psd());
        }
    }

    #[test]
    fn factor_reproduces_location_fim() {
        for &mode in &[
            SyncMode::FullSync,
            SyncMode::TimeOffsetOnly,
            SyncMode::FreqOffsetOnly,
            SyncMode::BothOffsets,
            SyncMode::GpsShared,
        ] {
            let s = default_scenario(3, 2, 4, mode);
            let j = location_fim(&s).unwrap();
            let f = information_factor(&s).unwrap();
            assert_eq!(f.index, j.index);
            let gram = &f.matrix * f.matrix.transpose();
            let rel = (&gram - &j.matrix).norm() / j.matrix.norm();
            assert!(rel < 1e-12, "{mode:?}: relative deviation {rel}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = default_scenario(1, 1, 1, SyncMode::BothOffsets);
        let j_eta = assemble_channel_fim(&s).unwrap();
        let s2 = default_scenario(2, 1, 1, SyncMode::BothOffsets);
        let jac2 = build_jacobian(&s2).unwrap();
        assert!(matches!(
            transform_fim(&j_eta, &jac2),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
