//! Equivalent Fisher information: Schur-complement elimination of
//! nuisance parameters and closed-form offset loss terms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fim::FimMatrix;
use crate::geometry::SPEED_OF_LIGHT;
use crate::scenario::Scenario;
use crate::transform::{location_fim, LocationParameterIndex, INTEREST_DIM};
use crate::waveform::{effective_bandwidth, resolve_snr};

/// Result of eliminating nuisance parameters from an information matrix.
#[derive(Debug, Clone)]
pub struct EfimResult {
    /// Equivalent FIM on the interest block.
    pub efim: DMatrix<f64>,
    /// Information lost to the nuisance parameters,
    /// `B C^-1 B^T` (so `efim = A - loss`).
    pub loss: DMatrix<f64>,
    /// Interest diagonal block `A` before elimination.
    pub prior: DMatrix<f64>,
    /// True when the nuisance block was singular and a pseudo-inverse
    /// was substituted.
    pub rank_deficient: bool,
}

/// Symmetric pseudo-inverse with eigenvalues below
/// `1e-12 * lambda_max` treated as zero. Returns the inverse and
/// whether anything was dropped.
fn symmetric_pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    let cutoff = 1.0e-12 * lambda_max.max(f64::MIN_POSITIVE);
    let mut dropped = false;
    let mut inv_vals = eig.eigenvalues.clone();
    for v in inv_vals.iter_mut() {
        if v.abs() <= cutoff {
            *v = 0.0;
            dropped = true;
        } else {
            *v = 1.0 / *v;
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = eig.eigenvectors.column(j);
        let w = inv_vals[j];
        if w != 0.0 {
            out += (col * col.transpose()) * w;
        }
    }
    (out, dropped)
}

/// Schur complement of the trailing nuisance block: for
/// `J = [A B; B^T C]` with `A` of size `interest_dim`, returns
/// `A - B C^-1 B^T`.
///
/// Uses a Cholesky factorization of `C`; if `C` is singular the
/// pseudo-inverse is used instead and the result is flagged.
pub fn schur_efim(j: &DMatrix<f64>, interest_dim: usize) -> Result<EfimResult> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: j.ncols(),
        });
    }
    if interest_dim > n {
        return Err(Error::DimensionMismatch {
            expected: interest_dim,
            got: n,
        });
    }
    let a = j.view((0, 0), (interest_dim, interest_dim)).into_owned();
    let m = n - interest_dim;
    if m == 0 {
        return Ok(EfimResult {
            efim: a.clone(),
            loss: DMatrix::zeros(interest_dim, interest_dim),
            prior: a,
            rank_deficient: false,
        });
    }
    let b = j.view((0, interest_dim), (interest_dim, m)).into_owned();
    let c = j.view((interest_dim, interest_dim), (m, m)).into_owned();

    let (loss, rank_deficient) = match c.clone().cholesky() {
        Some(chol) => {
            // loss = B C^-1 B^T via two triangular solves
            let x = chol.solve(&b.transpose());
            (&b * x, false)
        }
        None => {
            let (c_inv, _) = symmetric_pseudo_inverse(&c);
            (&b * c_inv * b.transpose(), true)
        }
    };
    let loss = (&loss + loss.transpose()) * 0.5;
    let efim = &a - &loss;
    Ok(EfimResult {
        efim: (&efim + efim.transpose()) * 0.5,
        loss,
        prior: a,
        rank_deficient,
    })
}

/// Location-parameter EFIM for a scenario: builds the location FIM and
/// eliminates every nuisance parameter beyond the nine interest ones.
pub fn scenario_efim(scenario: &Scenario) -> Result<(EfimResult, FimMatrix<LocationParameterIndex>)> {
    let j_kappa = location_fim(scenario)?;
    let result = schur_efim(&j_kappa.matrix, INTEREST_DIM)?;
    Ok((result, j_kappa))
}

/// Closed-form information loss on the nine interest parameters caused
/// by eliminating the time and frequency offsets.
#[derive(Debug, Clone)]
pub struct OffsetLoss {
    /// Loss from the time offsets (delay couplings).
    pub time: DMatrix<f64>,
    /// Loss from the frequency offsets (Doppler couplings).
    pub freq: DMatrix<f64>,
}

impl OffsetLoss {
    pub fn total(&self) -> DMatrix<f64> {
        &self.time + &self.freq
    }
}

/// Evaluate the offset loss terms from first principles, without
/// assembling a full FIM.
///
/// Each offset couples to the interest block through a vector `a_b` and
/// carries scalar self-information `s_b`. Per-satellite offsets lose
/// `sum_b a_b a_b^T / s_b`; a shared offset loses
/// `(sum_b a_b)(sum_b a_b)^T / sum_b s_b`. The difference of the two is
/// positive semidefinite, which is the analytical advantage of a shared
/// (GPS-style) offset over independent per-satellite offsets.
pub fn offset_loss_terms(scenario: &Scenario) -> Result<OffsetLoss> {
    scenario.validate()?;
    let stats = scenario.pulse_statistics()?;
    let links = scenario.links()?;
    let dt = scenario.slot_spacing_s;
    let q_partials = crate::geometry::rotation_matrix_partials(&scenario.receiver.orientation)?;
    let n9 = INTEREST_DIM;

    let mut time_loss = DMatrix::zeros(n9, n9);
    let mut freq_loss = DMatrix::zeros(n9, n9);
    let shared = scenario.sync_mode.shares_offsets();
    let mut a_time_shared = DVector::<f64>::zeros(n9);
    let mut s_time_shared = 0.0;
    let mut a_freq_shared = DVector::<f64>::zeros(n9);
    let mut s_freq_shared = 0.0;

    for (b, sat_links) in links.iter().enumerate() {
        let mut a_time = DVector::<f64>::zeros(n9);
        let mut s_time = 0.0;
        let mut a_freq = DVector::<f64>::zeros(n9);
        let mut s_freq = 0.0;
        for link in sat_links {
            let k = link.slot;
            let kdt = k as f64 * dt;
            let f_ob = scenario.carrier_hz * (1.0 - link.doppler);
            let omega = effective_bandwidth(stats.alpha1, stats.alpha2, f_ob);
            let mut slot_snr = 0.0;
            for u in 0..scenario.n_antennas() {
                let snr = resolve_snr(&scenario.budget, b, u, k)?;
                slot_snr += snr;
                let delta_u = &link.antenna_deltas[u];
                let offset = &scenario.receiver.antenna_offsets[u];
                let w = snr * omega / SPEED_OF_LIGHT;
                for i in 0..3 {
                    a_time[i] += w * delta_u[i];
                    a_time[3 + i] += w * kdt * delta_u[i];
                    a_time[6 + i] += w * delta_u.dot(&(q_partials[i] * offset));
                }
                s_time += snr * omega;
            }
            let a2 = stats.alpha_o * stats.alpha_o;
            let wf = slot_snr * scenario.carrier_hz * a2 / 2.0;
            let grad = link.position_gradient()?;
            for i in 0..3 {
                a_freq[i] += wf * grad[i];
                a_freq[3 + i] -= wf * link.delta[i] / SPEED_OF_LIGHT;
            }
            s_freq += slot_snr * a2 / 2.0;
        }
        if shared {
            a_time_shared += &a_time;
            s_time_shared += s_time;
            a_freq_shared += &a_freq;
            s_freq_shared += s_freq;
        } else {
            if scenario.sync_mode.has_time_offset() && s_time > 0.0 {
                time_loss += &a_time * a_time.transpose() / s_time;
            }
            if scenario.sync_mode.has_freq_offset() && s_freq > 0.0 {
                freq_loss += &a_freq * a_freq.transpose() / s_freq;
            }
        }
    }
    if shared {
        if s_time_shared > 0.0 {
            time_loss = &a_time_shared * a_time_shared.transpose() / s_time_shared;
        }
        if s_freq_shared > 0.0 {
            freq_loss = &a_freq_shared * a_freq_shared.transpose() / s_freq_shared;
        }
    }
    Ok(OffsetLoss {
        time: time_loss,
        freq: freq_loss,
    })
}
