//! Independent numerical verification.
//!
//! `numeric_channel_fim` rebuilds the channel-parameter information
//! matrix directly from the sampled received-signal model, without the
//! closed-form block; `jacobian_fd_check` differentiates the delay and
//! Doppler observables numerically and compares against the analytic
//! Jacobian rows. Closed forms are trusted only after both agree.

use nalgebra::{Complex, Matrix5, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{rotation_matrix, SPEED_OF_LIGHT};
use crate::scenario::Scenario;
use crate::transform::build_jacobian;

/// Uniformly sampled complex baseband pulse.
#[derive(Debug, Clone)]
pub struct SampledWaveform {
    samples: Vec<Complex<f64>>,
    /// Sample interval, seconds.
    pub sample_interval: f64,
    /// Time of the first sample, seconds.
    pub start: f64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<Complex<f64>>, sample_interval: f64, start: f64) -> Result<Self> {
        if samples.len() < 16 {
            return Err(Error::OracleInvalid(format!(
                "waveform needs at least 16 samples, got {}",
                samples.len()
            )));
        }
        if !(sample_interval > 0.0) || !sample_interval.is_finite() {
            return Err(Error::OracleInvalid(format!(
                "sample interval must be positive, got {sample_interval}"
            )));
        }
        let w = Self {
            samples,
            sample_interval,
            start,
        };
        if !(w.energy() > 0.0) || !w.energy().is_finite() {
            return Err(Error::OracleInvalid("waveform energy must be positive and finite".into()));
        }
        Ok(w)
    }

    /// Real Gaussian envelope `exp(-t^2 / (4 sigma_t^2))` sampled over
    /// `±8 sigma_t` (boundary amplitude `e^-16`, energy leakage below
    /// 1e-13 of total).
    pub fn gaussian(sigma_t: f64, samples_per_sigma: usize) -> Result<Self> {
        if !(sigma_t > 0.0) || samples_per_sigma < 8 {
            return Err(Error::OracleInvalid(format!(
                "gaussian waveform needs sigma_t > 0 and >= 8 samples per sigma, got {sigma_t}, {samples_per_sigma}"
            )));
        }
        let dt = sigma_t / samples_per_sigma as f64;
        let half = 8 * samples_per_sigma;
        let mut samples = Vec::with_capacity(2 * half + 1);
        for i in -(half as isize)..=(half as isize) {
            let t = i as f64 * dt;
            samples.push(Complex::new((-t * t / (4.0 * sigma_t * sigma_t)).exp(), 0.0));
        }
        Self::new(samples, dt, -(half as f64) * dt)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total time span covered by the samples.
    pub fn span(&self) -> f64 {
        (self.len() - 1) as f64 * self.sample_interval
    }

    /// Pulse energy `integral |s|^2 dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.sample_interval
    }

    fn time_at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.sample_interval
    }

    /// Centered RMS duration doubled: `alpha_o = sqrt(2 <(t - t_mean)^2>)`.
    pub fn rms_duration(&self) -> f64 {
        let e = self.energy();
        let mean = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| self.time_at(i) * s.norm_sqr())
            .sum::<f64>()
            * self.sample_interval
            / e;
        let var = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let d = self.time_at(i) - mean;
                d * d * s.norm_sqr()
            })
            .sum::<f64>()
            * self.sample_interval
            / e;
        (2.0 * var).sqrt()
    }

    /// Root mean-square baseband bandwidth from the discrete derivative:
    /// `sqrt(integral |s'|^2 / (4 pi^2 E))`.
    ///
    /// Fourth-order five-point stencil so the derivative bias stays far
    /// below the oracle comparison tolerances.
    pub fn rms_bandwidth(&self) -> f64 {
        let dt = self.sample_interval;
        let s = &self.samples;
        let mut acc = 0.0;
        for i in 2..self.len() - 2 {
            let d = (-s[i + 2] + s[i + 1] * 8.0 - s[i - 1] * 8.0 + s[i - 2])
                / Complex::new(12.0 * dt, 0.0);
            acc += d.norm_sqr();
        }
        (acc * dt / (4.0 * std::f64::consts::PI.powi(2) * self.energy())).sqrt()
    }

    /// Guard against truncation/aliasing before differentiating: the
    /// envelope must be well inside the sampled window and well under
    /// the Nyquist rate.
    pub fn validate_for_oracle(&self) -> Result<()> {
        let alpha_o = self.rms_duration();
        if self.span() < 8.0 * alpha_o {
            return Err(Error::OracleInvalid(format!(
                "span {:.3e} s does not cover 8x the RMS duration {:.3e} s",
                self.span(),
                alpha_o
            )));
        }
        let peak = self
            .samples
            .iter()
            .map(|s| s.norm_sqr())
            .fold(0.0_f64, f64::max);
        let edge = self.samples[0]
            .norm_sqr()
            .max(self.samples[self.len() - 1].norm_sqr());
        if edge > 1.0e-6 * peak {
            return Err(Error::OracleInvalid(format!(
                "boundary energy fraction {:.3e} exceeds 1e-6: truncated or leaking waveform",
                edge / peak
            )));
        }
        if self.rms_bandwidth() * self.sample_interval > 0.05 {
            return Err(Error::OracleInvalid(
                "sample interval too coarse for the pulse bandwidth".into(),
            ));
        }
        Ok(())
    }

    /// Band-limited (Whittaker) interpolation of the envelope at an
    /// arbitrary time.
    pub fn interpolate(&self, t: f64) -> Complex<f64> {
        let x = (t - self.start) / self.sample_interval;
        let mut acc = Complex::new(0.0, 0.0);
        for (n, s) in self.samples.iter().enumerate() {
            let u = x - n as f64;
            let w = if u.abs() < 1e-12 {
                1.0
            } else {
                let pu = std::f64::consts::PI * u;
                pu.sin() / pu
            };
            acc += s * w;
        }
        acc
    }
}

/// True channel parameters of a single link for the numeric FIM.
#[derive(Debug, Clone, Copy)]
pub struct OracleLink {
    pub carrier_hz: f64,
    /// Propagation delay `tau`, seconds.
    pub delay: f64,
    /// Doppler fraction `nu`.
    pub doppler: f64,
    /// Amplitude `beta`.
    pub gain: f64,
    /// Time offset `delta`, seconds.
    pub time_offset: f64,
    /// Frequency offset `epsilon`, Hz.
    pub freq_offset: f64,
}

/// The SNR at which the analytic block describes this sampled link:
/// `4 pi^2 beta^2 E / N_0`.
pub fn matched_snr(pulse: &SampledWaveform, gain: f64, noise_density: f64) -> f64 {
    4.0 * std::f64::consts::PI.powi(2) * gain * gain * pulse.energy() / noise_density
}

/// Noise-free received samples for the given channel parameters:
/// `mu(t) = beta s(t_o) exp(j 2 pi f_ob t_o)` with `t_o = t - tau + delta`
/// and `f_ob = f_c (1 - nu) + epsilon`.
fn mean_signal(
    pulse: &SampledWaveform,
    params: &[f64; 5], // tau, nu, beta, delta, eps
    carrier_hz: f64,
) -> Vec<Complex<f64>> {
    let [tau, nu, beta, delta, eps] = *params;
    let f_ob = carrier_hz * (1.0 - nu) + eps;
    let mut out = Vec::with_capacity(pulse.len());
    for i in 0..pulse.len() {
        let t_o = pulse.time_at(i) - tau + delta;
        let phase = 2.0 * std::f64::consts::PI * f_ob * t_o;
        let carrier = Complex::new(phase.cos(), phase.sin());
        out.push(pulse.interpolate(t_o) * carrier * Complex::new(beta, 0.0));
    }
    out
}

/// Numeric 5x5 channel FIM over `(tau, nu, beta, delta, epsilon)`.
///
/// Central finite differences of the signal mean, then the Gaussian
/// mean-sensitivity identity `J_ij = (1/N_0) Re integral
/// d_mu_i^* d_mu_j dt`. Entirely independent of the closed-form block.
pub fn numeric_channel_fim(
    pulse: &SampledWaveform,
    link: &OracleLink,
    noise_density: f64,
) -> Result<Matrix5<f64>> {
    if !(noise_density > 0.0) {
        return Err(Error::OracleInvalid(format!(
            "noise density must be positive, got {noise_density}"
        )));
    }
    if link.gain == 0.0 || !(link.carrier_hz > 0.0) {
        return Err(Error::OracleInvalid(
            "oracle link needs nonzero gain and positive carrier".into(),
        ));
    }
    pulse.validate_for_oracle()?;
    let alpha1 = pulse.rms_bandwidth();
    let alpha_o = pulse.rms_duration();

    let center = [
        link.delay,
        link.doppler,
        link.gain,
        link.time_offset,
        link.freq_offset,
    ];
    // the shifted envelope must stay inside the sampled window
    let margin = pulse.span() / 2.0 - 4.0 * alpha_o;
    if (link.delay - link.time_offset).abs() > margin.max(0.0) {
        return Err(Error::OracleInvalid(format!(
            "delay-offset shift {:.3e} s pushes the pulse outside the sampled window",
            link.delay - link.time_offset
        )));
    }
    let steps = [
        1.0e-3 / alpha1,
        1.0e-3 / (link.carrier_hz * alpha_o),
        1.0e-3 * link.gain.abs(),
        1.0e-3 / alpha1,
        1.0e-3 / alpha_o,
    ];

    let dt = pulse.sample_interval;
    let mut derivs: Vec<Vec<Complex<f64>>> = Vec::with_capacity(5);
    for i in 0..5 {
        let mut plus = center;
        let mut minus = center;
        plus[i] += steps[i];
        minus[i] -= steps[i];
        let mu_p = mean_signal(pulse, &plus, link.carrier_hz);
        let mu_m = mean_signal(pulse, &minus, link.carrier_hz);
        let inv = Complex::new(1.0 / (2.0 * steps[i]), 0.0);
        derivs.push(
            mu_p.iter()
                .zip(mu_m.iter())
                .map(|(p, m)| (p - m) * inv)
                .collect(),
        );
    }

    let mut fim = Matrix5::zeros();
    for i in 0..5 {
        for j in i..5 {
            let val = derivs[i]
                .iter()
                .zip(derivs[j].iter())
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>()
                * dt
                / noise_density;
            fim[(i, j)] = val;
            fim[(j, i)] = val;
        }
    }
    Ok(fim)
}

/// Finite-difference steps for the nine interest parameters: meters,
/// m/s, radians.
const STEP_POSITION: f64 = 1.0;
const STEP_VELOCITY: f64 = 1.0e-3;
const STEP_ORIENTATION: f64 = 1.0e-4;

/// Stable central difference of a range-derived delay.
///
/// `x_plus`/`x_minus` are the perturbed receiver-side positions and
/// `diff = x_plus - x_minus` must be supplied from its analytic form
/// (e.g. `2h e_i`), so the difference of two nearly equal ranges is
/// evaluated as `(d+^2 - d-^2) / (d+ + d-)` without cancellation.
fn delay_fd(
    p_sat: &Vector3<f64>,
    x_plus: &Vector3<f64>,
    x_minus: &Vector3<f64>,
    diff: &Vector3<f64>,
    step: f64,
) -> f64 {
    let d_plus = (x_plus - p_sat).norm();
    let d_minus = (x_minus - p_sat).norm();
    let sum = (x_plus - p_sat) + (x_minus - p_sat);
    diff.dot(&sum) / ((d_plus + d_minus) * SPEED_OF_LIGHT * 2.0 * step)
}

/// Worst relative disagreement between the analytic Jacobian rows and
/// central finite differences of the delay/Doppler observables, over
/// all links and all nine interest parameters.
///
/// Errors are normalized per (observable, parameter-group) by the
/// largest analytic entry in the group; groups that are analytically
/// zero must also be numerically zero.
pub fn jacobian_fd_check(scenario: &Scenario) -> Result<f64> {
    let jac = build_jacobian(scenario)?;
    let links = scenario.links()?;
    let dt = scenario.slot_spacing_s;
    let p0 = scenario.receiver.centroid;
    let v0 = scenario.receiver.velocity()?;
    let phi0 = scenario.receiver.orientation;

    // [observable 0=tau 1=nu][group 0=p 1=v 2=phi] -> (max |analytic|, max |fd - analytic|)
    let mut scale = [[0.0_f64; 3]; 2];
    let mut err = [[0.0_f64; 3]; 2];
    let track = |scale: &mut [[f64; 3]; 2],
                 err: &mut [[f64; 3]; 2],
                 obs: usize,
                 group: usize,
                 analytic: f64,
                 fd: f64| {
        scale[obs][group] = scale[obs][group].max(analytic.abs());
        err[obs][group] = err[obs][group].max((fd - analytic).abs());
    };

    for sat_links in &links {
        for link in sat_links {
            let b = link.satellite;
            let k = link.slot;
            let kdt = k as f64 * dt;
            let p_sat = scenario.satellites[b].position_at(k, dt)?;

            for u in 0..scenario.n_antennas() {
                let offset = scenario.receiver.antenna_offsets[u];
                let col = jac.cols.delay(b, u, k);
                let q0 = rotation_matrix(&phi0)?;
                let x0 = p0 + kdt * v0 + q0 * offset;

                for i in 0..3 {
                    let mut e = Vector3::zeros();
                    e[i] = 1.0;
                    // position
                    let h = STEP_POSITION;
                    let fd = delay_fd(&p_sat, &(x0 + h * e), &(x0 - h * e), &(2.0 * h * e), h);
                    track(&mut scale, &mut err, 0, 0, jac.matrix[(i, col)], fd);
                    // velocity enters through k dt
                    let h = STEP_VELOCITY;
                    let w = kdt * h * e;
                    let fd = delay_fd(&p_sat, &(x0 + w), &(x0 - w), &(2.0 * w), h);
                    track(&mut scale, &mut err, 0, 1, jac.matrix[(3 + i, col)], fd);
                    // orientation rotates the body-frame offset
                    let h = STEP_ORIENTATION;
                    let mut phi_p = phi0;
                    let mut phi_m = phi0;
                    phi_p[i] += h;
                    phi_m[i] -= h;
                    let shift_p = rotation_matrix(&phi_p)? * offset;
                    let shift_m = rotation_matrix(&phi_m)? * offset;
                    let xp = p0 + kdt * v0 + shift_p;
                    let xm = p0 + kdt * v0 + shift_m;
                    let fd = delay_fd(&p_sat, &xp, &xm, &(shift_p - shift_m), h);
                    track(&mut scale, &mut err, 0, 2, jac.matrix[(6 + i, col)], fd);
                }
            }

            // Doppler observable: geometry anchored at the nominal slot
            // trajectory; the velocity parameter enters only the
            // relative-velocity term.
            let col = jac.cols.doppler(b, k);
            let nu_of = |p: &Vector3<f64>, v: &Vector3<f64>| -> f64 {
                let sep = (p + kdt * v0) - p_sat;
                let d = sep.norm();
                (sep / d).dot(&(link.v_sat - v)) / SPEED_OF_LIGHT
            };
            for i in 0..3 {
                let mut e = Vector3::zeros();
                e[i] = 1.0;
                let h = STEP_POSITION;
                let fd = (nu_of(&(p0 + h * e), &v0) - nu_of(&(p0 - h * e), &v0)) / (2.0 * h);
                track(&mut scale, &mut err, 1, 0, jac.matrix[(i, col)], fd);
                let h = STEP_VELOCITY;
                let fd = (nu_of(&p0, &(v0 + h * e)) - nu_of(&p0, &(v0 - h * e))) / (2.0 * h);
                track(&mut scale, &mut err, 1, 1, jac.matrix[(3 + i, col)], fd);
                // orientation does not enter the Doppler observable
                track(&mut scale, &mut err, 1, 2, jac.matrix[(6 + i, col)], 0.0);
            }
        }
    }

    let mut worst: f64 = 0.0;
    for obs in 0..2 {
        for g in 0..3 {
            if scale[obs][g] > 0.0 {
                worst = worst.max(err[obs][g] / scale[obs][g]);
            } else if err[obs][g] != 0.0 {
                // analytically-zero group with a nonzero numeric
                // derivative is an outright failure
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(worst)
}

/// A randomized but physically sane scenario for verification sweeps:
/// arbitrary look angles, altitudes, receiver kinematics, orientation,
/// sync mode, and SNR, with elevations kept above ~20 degrees.
pub fn randomized_scenario(rng: &mut impl rand::Rng, min_sats: usize) -> Scenario {
    use crate::scenario::{default_scenario, satellite_from_look_angles, SyncMode};
    use std::f64::consts::PI;

    let n_sats = rng.gen_range(min_sats.max(1)..=min_sats.max(1) + 3);
    let n_slots = rng.gen_range(1..=3);
    let n_ant = *[1usize, 2, 4].get(rng.gen_range(0..3)).unwrap();
    let modes = [
        SyncMode::FullSync,
        SyncMode::TimeOffsetOnly,
        SyncMode::FreqOffsetOnly,
        SyncMode::BothOffsets,
        SyncMode::GpsShared,
    ];
    let mode = modes[rng.gen_range(0..modes.len())];

    let mut s = default_scenario(n_sats, n_slots, n_ant, mode);
    s.slot_spacing_s = rng.gen_range(2.0..30.0);
    s.satellites = (0..n_sats)
        .map(|_| {
            satellite_from_look_angles(
                rng.gen_range(-PI..PI),
                rng.gen_range(0.35..1.45),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(400.0e3..1200.0e3),
                rng.gen_range(7000.0..7800.0),
                n_slots,
                s.slot_spacing_s,
            )
        })
        .collect();
    s.receiver.orientation = Vector3::new(
        rng.gen_range(-0.6..0.6),
        rng.gen_range(-0.6..0.6),
        rng.gen_range(-0.6..0.6),
    );
    s.receiver.speed = rng.gen_range(0.0..30.0);
    s.receiver.heading =
        crate::geometry::Direction::new(rng.gen_range(-PI..PI), rng.gen_range(0.2..PI / 2.0));
    s.with_snr_db(rng.gen_range(-30.0..0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fim::channel_fim_block;
    use crate::scenario::{default_scenario, SyncMode};
    use approx::assert_relative_eq;

    fn test_link() -> OracleLink {
        OracleLink {
            carrier_hz: 1.0e7,
            delay: 3.0e-9,
            doppler: 2.0e-5,
            gain: 0.7,
            time_offset: 1.0e-9,
            freq_offset: 100.0,
        }
    }

    #[test]
    fn gaussian_waveform_moments() {
        let sigma = 4.0e-9;
        let w = SampledWaveform::gaussian(sigma, 12).unwrap();
        w.validate_for_oracle().unwrap();
        // alpha_o = sqrt(2) sigma, alpha1 = 1 / (4 pi sigma)
        assert_relative_eq!(w.rms_duration(), 2.0_f64.sqrt() * sigma, max_relative = 1e-6);
        assert_relative_eq!(
            w.rms_bandwidth(),
            1.0 / (4.0 * std::f64::consts::PI * sigma),
            max_relative = 1e-5
        );
    }

    #[test]
    fn numeric_fim_matches_analytic_block() {
        let sigma = 4.0e-9;
        let pulse = SampledWaveform::gaussian(sigma, 12).unwrap();
        let link = test_link();
        let n0 = 2.5e-9;
        let numeric = numeric_channel_fim(&pulse, &link, n0).unwrap();

        let snr = matched_snr(&pulse, link.gain, n0);
        let alpha1 = pulse.rms_bandwidth();
        let alpha_o = pulse.rms_duration();
        let f_ob = link.carrier_hz * (1.0 - link.doppler) + link.freq_offset;
        let omega = alpha1 * alpha1 + f_ob * f_ob; // symmetric spectrum: alpha2 = 0
        let analytic =
            channel_fim_block(snr, omega, link.carrier_hz, alpha_o, link.gain).unwrap();

        for i in 0..5 {
            for j in 0..5 {
                let a = analytic[(i, j)];
                if a != 0.0 {
                    assert_relative_eq!(numeric[(i, j)], a, max_relative = 1e-4);
                } else {
                    let norm = (analytic[(i, i)] * analytic[(j, j)]).sqrt();
                    assert!(
                        numeric[(i, j)].abs() < 1e-4 * norm,
                        "zero-pattern entry ({i},{j}) = {} vs scale {}",
                        numeric[(i, j)],
                        norm
                    );
                }
            }
        }
    }

    #[test]
    fn doubling_noise_halves_information() {
        let pulse = SampledWaveform::gaussian(4.0e-9, 10).unwrap();
        let link = test_link();
        let a = numeric_channel_fim(&pulse, &link, 1.0e-9).unwrap();
        let b = numeric_channel_fim(&pulse, &link, 2.0e-9).unwrap();
        assert_relative_eq!((b * 2.0 - a).norm() / a.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_rejects_out_of_window_shift() {
        let pulse = SampledWaveform::gaussian(4.0e-9, 10).unwrap();
        let mut link = test_link();
        link.delay = 1.0e-6;
        assert!(matches!(
            numeric_channel_fim(&pulse, &link, 1.0e-9),
            Err(Error::OracleInvalid(_))
        ));
    }

    #[test]
    fn sample_interval_halving_converges() {
        let link = test_link();
        let coarse = numeric_channel_fim(
            &SampledWaveform::gaussian(4.0e-9, 10).unwrap(),
            &link,
            1.0e-9,
        )
        .unwrap();
        let fine = numeric_channel_fim(
            &SampledWaveform::gaussian(4.0e-9, 20).unwrap(),
            &link,
            1.0e-9,
        )
        .unwrap();
        for i in 0..5 {
            assert_relative_eq!(coarse[(i, i)], fine[(i, i)], max_relative = 1e-5);
        }
    }

    #[test]
    fn default_scenario_jacobian_agrees() {
        let s = default_scenario(3, 3, 4, SyncMode::BothOffsets);
        let worst = jacobian_fd_check(&s).unwrap();
        assert!(worst <= 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn single_antenna_orientation_columns_vanish() {
        let s = default_scenario(2, 2, 1, SyncMode::FullSync);
        let jac = build_jacobian(&s).unwrap();
        for col in 0..jac.matrix.ncols() {
            for row in 6..9 {
                assert_eq!(jac.matrix[(row, col)], 0.0);
            }
        }
        assert!(jacobian_fd_check(&s).unwrap() <= 1e-6);
    }
}
