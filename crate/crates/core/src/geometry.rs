//! Constellation and receiver kinematics: positions, rotations, unit
//! direction vectors, propagation delays, Doppler shifts, and their
//! analytic derivatives.
//!
//! All quantities are SI (meters, seconds, radians). Everything here is a
//! pure function of its inputs.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Azimuth/polar angle pair describing a unit direction.
///
/// `polar` is measured from the +z axis, so `polar = 0` points at zenith
/// and `polar = pi/2` lies in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth: f64,
    pub polar: f64,
}

impl Direction {
    pub fn new(azimuth: f64, polar: f64) -> Self {
        Self { azimuth, polar }
    }

    pub fn unit_vector(&self) -> Result<Vector3<f64>> {
        unit_direction(self.azimuth, self.polar)
    }

    /// Recover the angle pair from a unit vector.
    pub fn from_unit_vector(v: &Vector3<f64>) -> Self {
        Self {
            azimuth: v.y.atan2(v.x),
            polar: v.z.clamp(-1.0, 1.0).acos(),
        }
    }
}

/// Unit direction vector `[cos(az) sin(polar), sin(az) sin(polar), cos(polar)]`.
pub fn unit_direction(azimuth: f64, polar: f64) -> Result<Vector3<f64>> {
    if !azimuth.is_finite() || !polar.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "unit_direction angles must be finite, got azimuth={azimuth}, polar={polar}"
        )));
    }
    let (sa, ca) = azimuth.sin_cos();
    let (sp, cp) = polar.sin_cos();
    Ok(Vector3::new(ca * sp, sa * sp, cp))
}

/// 3D rotation from the orientation angles `[alpha, psi, phi]`.
///
/// ZYX intrinsic composition: yaw `alpha` about z, then pitch `psi` about
/// y, then roll `phi` about x, i.e. `Q = Rz(alpha) * Ry(psi) * Rx(phi)`.
pub fn rotation_matrix(orientation: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if !orientation.iter().all(|a| a.is_finite()) {
        return Err(Error::InvalidArgument(
            "rotation_matrix angles must be finite".into(),
        ));
    }
    let (sa, ca) = orientation.x.sin_cos();
    let (sp, cp) = orientation.y.sin_cos();
    let (sr, cr) = orientation.z.sin_cos();
    let rz = Matrix3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    Ok(rz * ry * rx)
}

/// Partial derivatives of `rotation_matrix` with respect to each of the
/// three orientation angles, in order `[d/d alpha, d/d psi, d/d phi]`.
pub fn rotation_matrix_partials(orientation: &Vector3<f64>) -> Result<[Matrix3<f64>; 3]> {
    if !orientation.iter().all(|a| a.is_finite()) {
        return Err(Error::InvalidArgument(
            "rotation_matrix angles must be finite".into(),
        ));
    }
    let (sa, ca) = orientation.x.sin_cos();
    let (sp, cp) = orientation.y.sin_cos();
    let (sr, cr) = orientation.z.sin_cos();
    let rz = Matrix3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let dz = Matrix3::new(-sa, -ca, 0.0, ca, -sa, 0.0, 0.0, 0.0, 0.0);
    let dy = Matrix3::new(-sp, 0.0, cp, 0.0, 0.0, 0.0, -cp, 0.0, -sp);
    let dx = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sr, -cr, 0.0, cr, -sr);
    Ok([dz * ry * rx, rz * dy * rx, rz * ry * dx])
}

/// One LEO satellite: reference position, speed, and a per-slot motion
/// direction (the tangent rotates slot to slot for a curved orbit).
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState {
    /// Reference position at slot 0, meters.
    pub position: Vector3<f64>,
    /// Speed along the per-slot direction, m/s.
    pub speed: f64,
    /// Motion direction per slot; if fewer entries than slots the last
    /// entry is reused.
    pub headings: Vec<Direction>,
}

impl SatelliteState {
    pub fn validate(&self) -> Result<()> {
        if self.speed < 0.0 || !self.speed.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "satellite speed must be nonnegative and finite, got {}",
                self.speed
            )));
        }
        if self.headings.is_empty() {
            return Err(Error::InvalidArgument(
                "satellite needs at least one heading".into(),
            ));
        }
        for h in &self.headings {
            let v = h.unit_vector()?;
            if (v.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("satellite heading not unit".into()));
            }
        }
        Ok(())
    }

    pub fn heading(&self, slot: usize) -> &Direction {
        self.headings.get(slot).unwrap_or_else(|| {
            self.headings
                .last()
                .expect("validated satellite has headings")
        })
    }

    /// `p_{b,k} = p_{b,0} + k Δt v_b Δ_{b,k}`.
    pub fn position_at(&self, slot: usize, slot_spacing: f64) -> Result<Vector3<f64>> {
        let dir = self.heading(slot).unit_vector()?;
        Ok(self.position + (slot as f64) * slot_spacing * self.speed * dir)
    }

    /// Velocity vector at the given slot.
    pub fn velocity_at(&self, slot: usize) -> Result<Vector3<f64>> {
        Ok(self.speed * self.heading(slot).unit_vector()?)
    }
}

/// Multi-antenna receiver: centroid kinematics, orientation, and
/// body-frame antenna offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverState {
    /// Centroid reference position at slot 0, meters.
    pub centroid: Vector3<f64>,
    /// Speed, m/s.
    pub speed: f64,
    /// Motion direction (held across slots).
    pub heading: Direction,
    /// Orientation angles `[alpha, psi, phi]`, radians.
    pub orientation: Vector3<f64>,
    /// Body-frame antenna offsets, meters.
    pub antenna_offsets: Vec<Vector3<f64>>,
}

impl ReceiverState {
    pub fn validate(&self) -> Result<()> {
        if self.speed < 0.0 || !self.speed.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "receiver speed must be nonnegative and finite, got {}",
                self.speed
            )));
        }
        if self.antenna_offsets.is_empty() {
            return Err(Error::InvalidArgument(
                "receiver needs at least one antenna".into(),
            ));
        }
        for (i, a) in self.antenna_offsets.iter().enumerate() {
            for (j, b) in self.antenna_offsets.iter().enumerate().skip(i + 1) {
                if (a - b).norm() == 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "antenna offsets {i} and {j} coincide"
                    )));
                }
            }
        }
        let q = rotation_matrix(&self.orientation)?;
        let defect = (q.transpose() * q - Matrix3::identity()).norm();
        if defect > 1e-12 || (q.determinant() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "orientation does not build a proper rotation".into(),
            ));
        }
        Ok(())
    }

    pub fn n_antennas(&self) -> usize {
        self.antenna_offsets.len()
    }

    /// Nominal velocity vector of the centroid.
    pub fn velocity(&self) -> Result<Vector3<f64>> {
        Ok(self.speed * self.heading.unit_vector()?)
    }

    /// `p_{U,k} = p_{U,0} + k Δt v_U Δ_U`.
    pub fn centroid_at(&self, slot: usize, slot_spacing: f64) -> Result<Vector3<f64>> {
        Ok(self.centroid + (slot as f64) * slot_spacing * self.velocity()?)
    }

    pub fn rotation(&self) -> Result<Matrix3<f64>> {
        rotation_matrix(&self.orientation)
    }
}

/// `p_{u,k} = p_{U,k} + Q_U s̃_u`.
pub fn antenna_position(
    receiver: &ReceiverState,
    antenna: usize,
    slot: usize,
    slot_spacing: f64,
) -> Result<Vector3<f64>> {
    let offset = receiver.antenna_offsets.get(antenna).ok_or_else(|| {
        Error::IndexOutOfRange(format!(
            "antenna {antenna} of {}",
            receiver.antenna_offsets.len()
        ))
    })?;
    Ok(receiver.centroid_at(slot, slot_spacing)? + receiver.rotation()? * offset)
}

/// `τ = ‖p_u − p_b‖ / c`.
pub fn propagation_delay(p_u: &Vector3<f64>, p_b: &Vector3<f64>) -> f64 {
    (p_u - p_b).norm() / SPEED_OF_LIGHT
}

/// `ν = Δᵀ (v_b − v_U) / c` with `Δ` the satellite-to-receiver unit vector.
pub fn doppler_shift(
    delta: &Vector3<f64>,
    v_sat: &Vector3<f64>,
    v_rx: &Vector3<f64>,
) -> Result<f64> {
    if (delta.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "doppler_shift needs a unit direction, got norm {}",
            delta.norm()
        )));
    }
    Ok(delta.dot(&(v_sat - v_rx)) / SPEED_OF_LIGHT)
}

/// Gradient of the Doppler shift with respect to the receiver position:
/// `(I − ΔΔᵀ)(v_b − v_U) / (c d)`.
///
/// Orthogonal to `Δ`; the norm scales as `1/d`.
pub fn doppler_position_gradient(
    delta: &Vector3<f64>,
    distance: f64,
    v_sat: &Vector3<f64>,
    v_rx: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    if distance <= 0.0 {
        return Err(Error::SingularGeometry(format!(
            "doppler_position_gradient needs d > 0, got {distance}"
        )));
    }
    let v_rel = v_sat - v_rx;
    let transverse = v_rel - delta.dot(&v_rel) * delta;
    Ok(transverse / (SPEED_OF_LIGHT * distance))
}

/// Per-(satellite, slot) link geometry: centroid range, direction,
/// Doppler, and the per-antenna delays/directions.
#[derive(Debug, Clone)]
pub struct LinkGeometry {
    pub satellite: usize,
    pub slot: usize,
    /// Centroid distance `d_{bU,k}`, meters.
    pub distance: f64,
    /// Satellite-to-centroid unit vector `Δ_{bU,k}`.
    pub delta: Vector3<f64>,
    /// Azimuth/polar of `Δ_{bU,k}`.
    pub direction: Direction,
    /// Doppler fraction `ν_{bU,k}`.
    pub doppler: f64,
    /// Satellite velocity at the slot.
    pub v_sat: Vector3<f64>,
    /// Receiver nominal velocity.
    pub v_rx: Vector3<f64>,
    /// Per-antenna propagation delay `τ_{bu,k}`, seconds.
    pub delays: Vec<f64>,
    /// Per-antenna distance `d_{bu,k}`, meters.
    pub antenna_distances: Vec<f64>,
    /// Per-antenna satellite-to-antenna unit vectors `Δ_{bu,k}`.
    pub antenna_deltas: Vec<Vector3<f64>>,
}

impl LinkGeometry {
    /// Build the link for one satellite and slot.
    pub fn compute(
        satellite_index: usize,
        satellite: &SatelliteState,
        receiver: &ReceiverState,
        slot: usize,
        slot_spacing: f64,
    ) -> Result<Self> {
        let p_b = satellite.position_at(slot, slot_spacing)?;
        let p_u0 = receiver.centroid_at(slot, slot_spacing)?;
        let sep = p_u0 - p_b;
        let distance = sep.norm();
        if distance == 0.0 {
            return Err(Error::SingularGeometry(format!(
                "satellite {satellite_index} coincides with the receiver at slot {slot}"
            )));
        }
        let delta = sep / distance;
        let v_sat = satellite.velocity_at(slot)?;
        let v_rx = receiver.velocity()?;
        let doppler = doppler_shift(&delta, &v_sat, &v_rx)?;

        let n_u = receiver.n_antennas();
        let mut delays = Vec::with_capacity(n_u);
        let mut antenna_distances = Vec::with_capacity(n_u);
        let mut antenna_deltas = Vec::with_capacity(n_u);
        for u in 0..n_u {
            let p_u = antenna_position(receiver, u, slot, slot_spacing)?;
            let sep_u = p_u - p_b;
            let d_u = sep_u.norm();
            if d_u == 0.0 {
                return Err(Error::SingularGeometry(format!(
                    "satellite {satellite_index} coincides with antenna {u} at slot {slot}"
                )));
            }
            delays.push(d_u / SPEED_OF_LIGHT);
            antenna_deltas.push(sep_u / d_u);
            antenna_distances.push(d_u);
        }

        Ok(Self {
            satellite: satellite_index,
            slot,
            distance,
            direction: Direction::from_unit_vector(&delta),
            delta,
            doppler,
            v_sat,
            v_rx,
            delays,
            antenna_distances,
            antenna_deltas,
        })
    }

    pub fn position_gradient(&self) -> Result<Vector3<f64>> {
        doppler_position_gradient(&self.delta, self.distance, &self.v_sat, &self.v_rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    #[test]
    fn unit_direction_pole_and_axis() {
        let pole = unit_direction(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(pole, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        let x = unit_direction(0.0, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(x, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn unit_direction_hand_value() {
        // az = pi/4, polar = pi/3 -> [sqrt(6)/4, sqrt(6)/4, 1/2]
        let v = unit_direction(FRAC_PI_4, FRAC_PI_3).unwrap();
        let s6_4 = 6.0_f64.sqrt() / 4.0;
        assert_relative_eq!(v.x, s6_4, max_relative = 1e-14);
        assert_relative_eq!(v.y, s6_4, max_relative = 1e-14);
        assert_relative_eq!(v.z, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn unit_direction_rejects_non_finite() {
        assert!(unit_direction(f64::NAN, 0.0).is_err());
        assert!(unit_direction(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn unit_direction_norms_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let az = rng.gen_range(-PI..PI);
            let pol = rng.gen_range(0.0..PI);
            let v = unit_direction(az, pol).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_identity_at_zero() {
        let q = rotation_matrix(&Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(q, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn rotation_yaw_quarter_turn() {
        // alpha = pi/2 about z sends x to y under ZYX.
        let q = rotation_matrix(&Vector3::new(FRAC_PI_2, 0.0, 0.0)).unwrap();
        let y = q * Vector3::new(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(y, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rotation_orthonormal_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let phi = Vector3::new(
                rng.gen_range(-PI..PI),
                rng.gen_range(-PI..PI),
                rng.gen_range(-PI..PI),
            );
            let q = rotation_matrix(&phi).unwrap();
            assert!((q.transpose() * q - Matrix3::identity()).norm() < 1e-12);
            assert!((q.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_partials_match_finite_differences() {
        let phi = Vector3::new(0.3, -0.7, 1.1);
        let parts = rotation_matrix_partials(&phi).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut plus = phi;
            let mut minus = phi;
            plus[j] += h;
            minus[j] -= h;
            let fd =
                (rotation_matrix(&plus).unwrap() - rotation_matrix(&minus).unwrap()) / (2.0 * h);
            assert!((fd - parts[j]).norm() < 1e-8);
        }
    }

    fn test_receiver() -> ReceiverState {
        ReceiverState {
            centroid: Vector3::new(100.0, -50.0, 0.0),
            speed: 1.0,
            heading: Direction::new(0.0, FRAC_PI_2),
            orientation: Vector3::zeros(),
            antenna_offsets: vec![Vector3::zeros()],
        }
    }

    #[test]
    fn antenna_position_centroid_and_displacement() {
        let rx = test_receiver();
        let p0 = antenna_position(&rx, 0, 0, 10.0).unwrap();
        assert_abs_diff_eq!(p0, rx.centroid, epsilon = 1e-12);
        // k=2, dt=10, v=1 m/s along +x -> +[20,0,0]
        let p2 = antenna_position(&rx, 0, 2, 10.0).unwrap();
        assert_abs_diff_eq!(p2, rx.centroid + Vector3::new(20.0, 0.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn antenna_position_identity_rotation_adds_offset() {
        let mut rx = test_receiver();
        rx.antenna_offsets = vec![Vector3::new(0.1, 0.2, 0.3)];
        let p = antenna_position(&rx, 0, 0, 10.0).unwrap();
        assert_abs_diff_eq!(p, rx.centroid + Vector3::new(0.1, 0.2, 0.3), epsilon = 1e-12);
    }

    #[test]
    fn antenna_position_index_out_of_range() {
        let rx = test_receiver();
        assert!(antenna_position(&rx, 3, 0, 10.0).is_err());
    }

    #[test]
    fn propagation_delay_basics() {
        let origin = Vector3::zeros();
        assert_eq!(propagation_delay(&origin, &origin), 0.0);
        let sat = Vector3::new(0.0, 0.0, 5.0e5);
        let tau = propagation_delay(&origin, &sat);
        assert_relative_eq!(tau, 5.0e5 / SPEED_OF_LIGHT, max_relative = 1e-15);
        assert_eq!(tau, propagation_delay(&sat, &origin));
    }

    #[test]
    fn doppler_shift_cases() {
        let delta = Vector3::new(0.0, 0.0, -1.0);
        let v = Vector3::new(0.0, 0.0, -7500.0);
        assert_eq!(doppler_shift(&delta, &v, &v).unwrap(), 0.0);
        let transverse = Vector3::new(7500.0, 0.0, 0.0);
        assert_eq!(
            doppler_shift(&delta, &transverse, &Vector3::zeros()).unwrap(),
            0.0
        );
        let nu = doppler_shift(&delta, &v, &Vector3::zeros()).unwrap();
        assert_relative_eq!(nu, 7500.0 / SPEED_OF_LIGHT, max_relative = 1e-15);
        assert!(doppler_shift(&(delta * 1.5), &v, &Vector3::zeros()).is_err());
    }

    #[test]
    fn doppler_gradient_zero_cases() {
        let delta = Vector3::new(0.0, 0.0, -1.0);
        let v = Vector3::new(0.0, 1000.0, -7500.0);
        let g = doppler_position_gradient(&delta, 1.0e6, &v, &v).unwrap();
        assert_abs_diff_eq!(g, Vector3::zeros(), epsilon = 1e-20);
        let radial = Vector3::new(0.0, 0.0, -7500.0);
        let g = doppler_position_gradient(&delta, 1.0e6, &radial, &Vector3::zeros()).unwrap();
        assert!(g.norm() < 1e-25);
        assert!(doppler_position_gradient(&delta, 0.0, &v, &Vector3::zeros()).is_err());
    }

    #[test]
    fn doppler_gradient_orthogonal_and_inverse_distance() {
        let delta = unit_direction(0.4, 1.0).unwrap();
        let v = Vector3::new(4000.0, -2000.0, 5000.0);
        let d = 6.5e5;
        let g = doppler_position_gradient(&delta, d, &v, &Vector3::zeros()).unwrap();
        assert!(g.dot(&delta).abs() < 1e-12 * g.norm().max(1.0));
        let g2 = doppler_position_gradient(&delta, 2.0 * d, &v, &Vector3::zeros()).unwrap();
        for i in 0..3 {
            assert_relative_eq!(g2[i], 0.5 * g[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn doppler_gradient_matches_finite_difference() {
        // Central difference of the Doppler shift w.r.t. receiver position.
        let p_b = Vector3::new(2.0e5, -1.0e5, 6.0e5);
        let p_u = Vector3::new(10.0, 20.0, 0.0);
        let v_sat = Vector3::new(3000.0, 6000.0, -2000.0);
        let v_rx = Vector3::new(5.0, -3.0, 0.0);
        let nu_of = |p: &Vector3<f64>| {
            let sep = p - p_b;
            let d = sep.norm();
            doppler_shift(&(sep / d), &v_sat, &v_rx).unwrap()
        };
        let sep = p_u - p_b;
        let d = sep.norm();
        let g = doppler_position_gradient(&(sep / d), d, &v_sat, &v_rx).unwrap();
        let h = 1e-3 * d.max(1.0) * 1e-3; // ~1 m for LEO ranges
        for i in 0..3 {
            let mut plus = p_u;
            let mut minus = p_u;
            plus[i] += h;
            minus[i] -= h;
            let fd = (nu_of(&plus) - nu_of(&minus)) / (2.0 * h);
            assert_relative_eq!(fd, g[i], max_relative = 1e-6, epsilon = 1e-18);
        }
    }

    #[test]
    fn satellite_kinematics() {
        let sat = SatelliteState {
            position: Vector3::new(0.0, 0.0, 6.0e5),
            speed: 7500.0,
            headings: vec![Direction::new(0.0, FRAC_PI_2)],
        };
        sat.validate().unwrap();
        let p1 = sat.position_at(1, 10.0).unwrap();
        assert_abs_diff_eq!(
            p1,
            Vector3::new(75000.0, 0.0, 6.0e5),
            epsilon = 1e-6
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = Direction::new(rng.gen_range(-PI..PI), rng.gen_range(0.0..PI));
            let v = d.unit_vector().unwrap();
            let back = Direction::from_unit_vector(&v);
            assert_abs_diff_eq!(back.unit_vector().unwrap(), v, epsilon = 1e-12);
        }
    }
}
