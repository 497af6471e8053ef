//! Channel-parameter Fisher information: the per-link 5x5 block over
//! (delay, Doppler, gain, time offset, frequency offset) and the full FIM
//! over the vectorized channel parameter layout.

use nalgebra::{DMatrix, Matrix5};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{Scenario, SyncMode};
use crate::waveform::{effective_bandwidth, resolve_snr};

/// One channel parameter with its (satellite, antenna, slot) labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ChannelParam {
    /// `tau_{bu,k}`, seconds.
    Delay { sat: usize, ant: usize, slot: usize },
    /// `nu_{bU,k}`, dimensionless (one per satellite and slot).
    Doppler { sat: usize, slot: usize },
    /// Scalar channel amplitude `beta_{bU}`.
    Gain { sat: usize },
    /// Receiver time offset `delta_{bU}`, seconds.
    TimeOffset { sat: usize },
    /// Residual frequency offset `epsilon_{bU}`, Hz.
    FreqOffset { sat: usize },
}

/// Ordered layout of the channel parameter vector: per satellite, delays
/// (slot-major, antennas inner), then per-slot Dopplers, then gain, then
/// whichever offsets the sync mode leaves unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParameterIndex {
    pub n_sats: usize,
    pub n_ants: usize,
    pub n_slots: usize,
    pub mode: SyncMode,
    labels: Vec<ChannelParam>,
    per_sat: usize,
}

impl ChannelParameterIndex {
    pub fn new(n_sats: usize, n_ants: usize, n_slots: usize, mode: SyncMode) -> Self {
        let mut labels = Vec::new();
        for b in 0..n_sats {
            for k in 0..n_slots {
                for u in 0..n_ants {
                    labels.push(ChannelParam::Delay {
                        sat: b,
                        ant: u,
                        slot: k,
                    });
                }
            }
            for k in 0..n_slots {
                labels.push(ChannelParam::Doppler { sat: b, slot: k });
            }
            labels.push(ChannelParam::Gain { sat: b });
            if mode.has_time_offset() {
                labels.push(ChannelParam::TimeOffset { sat: b });
            }
            if mode.has_freq_offset() {
                labels.push(ChannelParam::FreqOffset { sat: b });
            }
        }
        let per_sat = labels.len() / n_sats.max(1);
        Self {
            n_sats,
            n_ants,
            n_slots,
            mode,
            labels,
            per_sat,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ChannelParam] {
        &self.labels
    }

    fn base(&self, sat: usize) -> usize {
        sat * self.per_sat
    }

    pub fn delay(&self, sat: usize, ant: usize, slot: usize) -> usize {
        self.base(sat) + slot * self.n_ants + ant
    }

    pub fn doppler(&self, sat: usize, slot: usize) -> usize {
        self.base(sat) + self.n_slots * self.n_ants + slot
    }

    pub fn gain(&self, sat: usize) -> usize {
        self.base(sat) + self.n_slots * self.n_ants + self.n_slots
    }

    pub fn time_offset(&self, sat: usize) -> Option<usize> {
        self.mode
            .has_time_offset()
            .then(|| self.gain(sat) + 1)
    }

    pub fn freq_offset(&self, sat: usize) -> Option<usize> {
        self.mode.has_freq_offset().then(|| {
            self.gain(sat) + 1 + usize::from(self.mode.has_time_offset())
        })
    }
}

/// Labeled symmetric information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix<I> {
    pub index: I,
    pub matrix: DMatrix<f64>,
}

impl<I> FimMatrix<I> {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest relative asymmetry, 0 for an exactly symmetric matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.matrix.amax().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.matrix.nrows() {
            for j in (i + 1)..self.matrix.ncols() {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Minimum and maximum eigenvalues (symmetric part).
    pub fn eigen_extrema(&self) -> (f64, f64) {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &l in eig.iter() {
            lo = lo.min(l);
            hi = hi.max(l);
        }
        (lo, hi)
    }

    /// PSD within the numerical slack `min >= -1e-10 * max`.
    pub fn is_psd(&self) -> bool {
        let (lo, hi) = self.eigen_extrema();
        lo >= -1.0e-10 * hi.abs().max(f64::MIN_POSITIVE)
    }
}

/// The 5x5 single-link information block over (tau, nu, beta, delta,
/// epsilon).
///
/// The printed block couples Doppler and frequency offset with `f_c` (the
/// symmetric reading of the two conflicting printings; the Doppler
/// diagonal carries `f_c^2`, the offset diagonal carries no `f_c`).
pub fn channel_fim_block(
    snr: f64,
    omega: f64,
    carrier_hz: f64,
    alpha_o: f64,
    beta: f64,
) -> Result<Matrix5<f64>> {
    if !(snr > 0.0) || !(omega > 0.0) || !(alpha_o > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "channel_fim_block needs SNR, omega, alpha_o > 0; got {snr}, {omega}, {alpha_o}"
        )));
    }
    if beta == 0.0 {
        return Err(Error::InvalidArgument("channel gain beta must be nonzero".into()));
    }
    let mut m = Matrix5::zeros();
    let a2 = alpha_o * alpha_o;
    m[(0, 0)] = snr * omega;
    m[(0, 3)] = -snr * omega;
    m[(3, 0)] = -snr * omega;
    m[(3, 3)] = snr * omega;
    m[(1, 1)] = snr * carrier_hz * carrier_hz * a2 / 2.0;
    m[(1, 4)] = -snr * carrier_hz * a2 / 2.0;
    m[(4, 1)] = -snr * carrier_hz * a2 / 2.0;
    m[(4, 4)] = snr * a2 / 2.0;
    m[(2, 2)] = snr / (4.0 * std::f64::consts::PI.powi(2) * beta * beta);
    Ok(m)
}

/// Assemble the full channel-parameter FIM for a scenario.
///
/// Block-diagonal across satellites. Within a satellite: each delay
/// carries `SNR * omega` on its diagonal and `-SNR * omega` against the
/// shared time offset; each slot's Doppler carries the antenna-summed SNR
/// (the Doppler is common to the array) and couples to the shared
/// frequency offset; the gain entry is decoupled.
pub fn assemble_channel_fim(scenario: &Scenario) -> Result<FimMatrix<ChannelParameterIndex>> {
    scenario.validate()?;
    let stats = scenario.pulse_statistics()?;
    let links = scenario.links()?;
    let index = ChannelParameterIndex::new(
        scenario.n_satellites(),
        scenario.n_antennas(),
        scenario.n_slots(),
        scenario.sync_mode,
    );
    let beta = scenario.budget.gain_amplitude();
    let mut m = DMatrix::zeros(index.len(), index.len());

    for (b, sat_links) in links.iter().enumerate() {
        for link in sat_links {
            let k = link.slot;
            let f_ob = scenario.carrier_hz * (1.0 - link.doppler);
            let omega = effective_bandwidth(stats.alpha1, stats.alpha2, f_ob);
            let mut slot_snr = 0.0;
            for u in 0..scenario.n_antennas() {
                let snr = resolve_snr(&scenario.budget, b, u, k)?;
                slot_snr += snr;
                let it = index.delay(b, u, k);
                m[(it, it)] += snr * omega;
                if let Some(id) = index.time_offset(b) {
                    m[(it, id)] -= snr * omega;
                    m[(id, it)] -= snr * omega;
                    m[(id, id)] += snr * omega;
                }
                let ig = index.gain(b);
                m[(ig, ig)] += snr / (4.0 * std::f64::consts::PI.powi(2) * beta * beta);
            }
            let a2 = stats.alpha_o * stats.alpha_o;
            let inu = index.doppler(b, k);
            m[(inu, inu)] += slot_snr * scenario.carrier_hz * scenario.carrier_hz * a2 / 2.0;
            if let Some(ie) = index.freq_offset(b) {
                m[(inu, ie)] -= slot_snr * scenario.carrier_hz * a2 / 2.0;
                m[(ie, inu)] -= slot_snr * scenario.carrier_hz * a2 / 2.0;
                m[(ie, ie)] += slot_snr * a2 / 2.0;
            }
        }
    }

    Ok(FimMatrix { index, matrix: m })
}
