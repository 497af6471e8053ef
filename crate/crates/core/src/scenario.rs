//! Scenario definition, validation, JSON config schema, and the default
//! experiment family used by the identifiability tables and sweeps.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, LinkGeometry, ReceiverState, SatelliteState};
use crate::waveform::{LinkBudget, PulseSpec, PulseStatistics};

/// Mean Earth radius, meters.
pub const EARTH_RADIUS: f64 = 6.371e6;

/// Synchronization regime: which clock/oscillator offsets are unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncMode {
    /// No time or frequency offsets.
    FullSync,
    /// One unknown time offset per satellite.
    TimeOffsetOnly,
    /// One unknown frequency offset per satellite.
    FreqOffsetOnly,
    /// Unknown time and frequency offsets per satellite.
    BothOffsets,
    /// A single time and a single frequency offset shared by every
    /// satellite (the GPS-style comparison structure).
    GpsShared,
}

impl SyncMode {
    pub fn has_time_offset(self) -> bool {
        !matches!(self, SyncMode::FullSync | SyncMode::FreqOffsetOnly)
    }

    pub fn has_freq_offset(self) -> bool {
        !matches!(self, SyncMode::FullSync | SyncMode::TimeOffsetOnly)
    }

    pub fn shares_offsets(self) -> bool {
        matches!(self, SyncMode::GpsShared)
    }

    pub fn label(self) -> &'static str {
        match self {
            SyncMode::FullSync => "full-sync",
            SyncMode::TimeOffsetOnly => "time-offset-only",
            SyncMode::FreqOffsetOnly => "freq-offset-only",
            SyncMode::BothOffsets => "both-offsets",
            SyncMode::GpsShared => "gps-shared",
        }
    }
}

impl std::str::FromStr for SyncMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full-sync" | "full" => Ok(SyncMode::FullSync),
            "time-offset-only" | "time-offset" => Ok(SyncMode::TimeOffsetOnly),
            "freq-offset-only" | "freq-offset" => Ok(SyncMode::FreqOffsetOnly),
            "both-offsets" | "both" => Ok(SyncMode::BothOffsets),
            "gps-shared" | "gps" => Ok(SyncMode::GpsShared),
            other => Err(Error::InvalidArgument(format!(
                "unknown sync mode '{other}' (expected full-sync, time-offset-only, \
                 freq-offset-only, both-offsets, or gps-shared)"
            ))),
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub carrier_hz: f64,
    pub slot_count: usize,
    pub slot_spacing_s: f64,
    pub sync_mode: SyncMode,
    pub satellites: Vec<SatelliteState>,
    pub receiver: ReceiverState,
    pub pulse: PulseSpec,
    pub budget: LinkBudget,
}

impl Scenario {
    pub fn n_satellites(&self) -> usize {
        self.satellites.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.receiver.n_antennas()
    }

    pub fn n_slots(&self) -> usize {
        self.slot_count
    }

    pub fn validate(&self) -> Result<()> {
        if self.satellites.is_empty() {
            return Err(Error::Config("N_B must be >= 1 (no satellites)".into()));
        }
        if self.slot_count == 0 {
            return Err(Error::Config("N_K must be >= 1 (no time slots)".into()));
        }
        if !(self.slot_spacing_s > 0.0) {
            return Err(Error::Config(format!(
                "slot spacing must satisfy Δt > 0, got {}",
                self.slot_spacing_s
            )));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must satisfy f_c > 0, got {}",
                self.carrier_hz
            )));
        }
        for sat in &self.satellites {
            sat.validate()?;
        }
        self.receiver.validate()?;
        self.pulse.validate()?;
        self.budget.validate()?;
        Ok(())
    }

    /// Pulse statistics resolved once per scenario.
    pub fn pulse_statistics(&self) -> Result<PulseStatistics> {
        self.pulse.statistics()
    }

    /// Link geometry for every satellite and slot, satellite-major.
    pub fn links(&self) -> Result<Vec<Vec<LinkGeometry>>> {
        self.satellites
            .iter()
            .enumerate()
            .map(|(b, sat)| {
                (0..self.slot_count)
                    .map(|k| {
                        LinkGeometry::compute(b, sat, &self.receiver, k, self.slot_spacing_s)
                    })
                    .collect()
            })
            .collect()
    }

    /// Copy with a different antenna count, rebuilding the default planar
    /// array at the same pitch.
    pub fn with_antennas(&self, n_antennas: usize) -> Self {
        let mut s = self.clone();
        s.receiver.antenna_offsets = planar_array(n_antennas, DEFAULT_ARRAY_PITCH);
        s
    }

    pub fn with_slot_spacing(&self, slot_spacing_s: f64) -> Self {
        let mut s = self.clone();
        s.slot_spacing_s = slot_spacing_s;
        s
    }

    /// Copy at another carrier; the physical array is left untouched so
    /// frequency effects are purely informational.
    pub fn with_carrier(&self, carrier_hz: f64) -> Self {
        let mut s = self.clone();
        s.carrier_hz = carrier_hz;
        s
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        let mut s = self.clone();
        s.budget = LinkBudget::SnrDb { value: snr_db };
        s
    }

    pub fn with_sync_mode(&self, mode: SyncMode) -> Self {
        let mut s = self.clone();
        s.sync_mode = mode;
        s
    }
}

/// Element pitch of the default square planar array, meters (λ/2 at 1 GHz).
pub const DEFAULT_ARRAY_PITCH: f64 = 0.15;

/// Default satellite altitude, meters.
pub const DEFAULT_ALTITUDE: f64 = 550.0e3;

/// Default satellite tangential speed, m/s.
pub const DEFAULT_SATELLITE_SPEED: f64 = 7590.0;

/// Default RMS time duration, seconds (long coherent integration of the
/// known reference signal within each observation slot).
pub const DEFAULT_ALPHA_O: f64 = 0.3;

/// Square-ish planar array in the body xy-plane, centered on the
/// centroid, with the given pitch. One antenna sits at the centroid.
pub fn planar_array(n_antennas: usize, pitch: f64) -> Vec<Vector3<f64>> {
    if n_antennas == 1 {
        return vec![Vector3::zeros()];
    }
    let cols = (n_antennas as f64).sqrt().ceil() as usize;
    let mut offsets = Vec::with_capacity(n_antennas);
    for i in 0..n_antennas {
        let r = i / cols;
        let c = i % cols;
        offsets.push(Vector3::new(c as f64 * pitch, r as f64 * pitch, 0.0));
    }
    let centroid: Vector3<f64> = offsets.iter().sum::<Vector3<f64>>() / n_antennas as f64;
    for o in &mut offsets {
        *o -= centroid;
    }
    offsets
}

/// Slant range from a ground receiver to a satellite at `altitude` seen
/// at the given elevation above the horizon (spherical Earth).
pub fn slant_range(altitude: f64, elevation: f64) -> f64 {
    let re = EARTH_RADIUS;
    let rs = re + altitude;
    let s = re * elevation.sin();
    (s * s + rs * rs - re * re).sqrt() - s
}

/// Satellite state seen from a receiver at the local origin: placed along
/// the (azimuth, elevation) line of sight at the slant range for the
/// altitude, moving tangentially with the heading azimuth. Per-slot
/// motion directions rotate about the orbit normal at the circular-orbit
/// rate v/(R_E + h), which is what makes multi-slot single-satellite
/// geometry non-planar.
pub fn satellite_from_look_angles(
    azimuth: f64,
    elevation: f64,
    heading_azimuth: f64,
    altitude: f64,
    speed: f64,
    slot_count: usize,
    slot_spacing: f64,
) -> SatelliteState {
    let polar = PI / 2.0 - elevation;
    let look = crate::geometry::unit_direction(azimuth, polar).expect("finite angles");
    let position = slant_range(altitude, elevation) * look;

    // Local radial direction at the satellite (Earth center at -R_E z).
    let geocentric = position + Vector3::new(0.0, 0.0, EARTH_RADIUS);
    let radial = geocentric.normalize();
    // Tangent plane basis at the satellite.
    let east = Vector3::new(-radial.y, radial.x, 0.0)
        .try_normalize(1e-12)
        .unwrap_or_else(|| Vector3::new(1.0, 0.0, 0.0));
    let north = radial.cross(&east);
    let tangent0 = heading_azimuth.cos() * north + heading_azimuth.sin() * east;
    let normal = radial.cross(&tangent0).normalize();

    let orbit_rate = speed / (EARTH_RADIUS + altitude);
    let mut headings = Vec::with_capacity(slot_count.max(1));
    for k in 0..slot_count.max(1) {
        let angle = orbit_rate * slot_spacing * k as f64;
        let tangent = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(normal),
            angle,
        ) * tangent0;
        headings.push(Direction::from_unit_vector(&tangent.normalize()));
    }

    SatelliteState {
        position,
        speed,
        headings,
    }
}

/// Default look angles used by the scenario family: azimuths spread
/// evenly, elevations and headings cycled from fixed lists.
fn default_look_angles(n_sats: usize) -> Vec<(f64, f64, f64)> {
    let elevations = [60.0_f64, 45.0, 70.0, 35.0, 55.0, 65.0, 40.0, 75.0];
    let headings = [20.0_f64, 80.0, 140.0, 200.0, 260.0, 320.0, 50.0, 110.0];
    (0..n_sats)
        .map(|b| {
            let az = 360.0 * b as f64 / n_sats as f64;
            (
                az.to_radians(),
                elevations[b % elevations.len()].to_radians(),
                headings[b % headings.len()].to_radians(),
            )
        })
        .collect()
}

/// The default scenario family: satellites at 550 km, receiver static at
/// the origin with a square planar array, -20 dB per-link SNR, 1 GHz
/// carrier, 100 MHz effective baseband bandwidth, 10 s slot spacing.
pub fn default_scenario(
    n_sats: usize,
    n_slots: usize,
    n_antennas: usize,
    mode: SyncMode,
) -> Scenario {
    let slot_spacing = 10.0;
    let satellites = default_look_angles(n_sats)
        .into_iter()
        .map(|(az, el, heading)| {
            satellite_from_look_angles(
                az,
                el,
                heading,
                DEFAULT_ALTITUDE,
                DEFAULT_SATELLITE_SPEED,
                n_slots,
                slot_spacing,
            )
        })
        .collect();
    Scenario {
        carrier_hz: 1.0e9,
        slot_count: n_slots,
        slot_spacing_s: slot_spacing,
        sync_mode: mode,
        satellites,
        receiver: ReceiverState {
            centroid: Vector3::zeros(),
            speed: 0.0,
            heading: Direction::new(0.0, 0.0),
            orientation: Vector3::zeros(),
            antenna_offsets: planar_array(n_antennas, DEFAULT_ARRAY_PITCH),
        },
        pulse: PulseSpec::Direct {
            alpha1_hz: 1.0e8,
            alpha2: 0.0,
            alpha_o_s: DEFAULT_ALPHA_O,
        },
        budget: LinkBudget::SnrDb { value: -20.0 },
    }
}

// ---------------------------------------------------------------------
// JSON schema. Angles in the file are degrees; elevation is above the
// horizon. Everything internal is radians/SI.
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub carrier_frequency_hz: f64,
    #[serde(default = "default_slot_count")]
    pub slot_count: usize,
    #[serde(default = "default_slot_spacing")]
    pub slot_spacing_s: f64,
    #[serde(default = "default_sync_mode")]
    pub sync_mode: SyncMode,
    pub satellites: Vec<SatelliteFile>,
    pub receiver: ReceiverFile,
    #[serde(default = "default_pulse")]
    pub pulse: PulseSpec,
    #[serde(default = "default_budget")]
    pub link_budget: LinkBudget,
}

fn default_slot_count() -> usize {
    1
}
fn default_slot_spacing() -> f64 {
    10.0
}
fn default_sync_mode() -> SyncMode {
    SyncMode::BothOffsets
}
fn default_pulse() -> PulseSpec {
    PulseSpec::Direct {
        alpha1_hz: 1.0e8,
        alpha2: 0.0,
        alpha_o_s: DEFAULT_ALPHA_O,
    }
}
fn default_budget() -> LinkBudget {
    LinkBudget::SnrDb { value: -20.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionFile {
    pub azimuth_deg: f64,
    /// Elevation above the horizon, degrees.
    pub elevation_deg: f64,
}

impl DirectionFile {
    fn to_direction(&self) -> Direction {
        Direction::new(
            self.azimuth_deg.to_radians(),
            (90.0 - self.elevation_deg).to_radians(),
        )
    }

    fn from_direction(d: &Direction) -> Self {
        Self {
            azimuth_deg: d.azimuth.to_degrees(),
            elevation_deg: 90.0 - d.polar.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteFile {
    pub position_m: [f64; 3],
    pub speed_mps: f64,
    /// One entry per slot (or a single entry held constant).
    pub headings: Vec<DirectionFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverFile {
    #[serde(default)]
    pub position_m: [f64; 3],
    #[serde(default)]
    pub speed_mps: f64,
    #[serde(default = "default_rx_heading")]
    pub heading: DirectionFile,
    /// Orientation angles [alpha, psi, phi], degrees.
    #[serde(default)]
    pub orientation_deg: [f64; 3],
    pub antenna_offsets_m: Vec<[f64; 3]>,
}

fn default_rx_heading() -> DirectionFile {
    DirectionFile {
        azimuth_deg: 0.0,
        elevation_deg: 90.0,
    }
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let satellites = self
            .satellites
            .iter()
            .map(|s| SatelliteState {
                position: Vector3::from(s.position_m),
                speed: s.speed_mps,
                headings: s.headings.iter().map(|h| h.to_direction()).collect(),
            })
            .collect();
        let receiver = ReceiverState {
            centroid: Vector3::from(self.receiver.position_m),
            speed: self.receiver.speed_mps,
            heading: self.receiver.heading.to_direction(),
            orientation: Vector3::new(
                self.receiver.orientation_deg[0].to_radians(),
                self.receiver.orientation_deg[1].to_radians(),
                self.receiver.orientation_deg[2].to_radians(),
            ),
            antenna_offsets: self
                .receiver
                .antenna_offsets_m
                .iter()
                .map(|&o| Vector3::from(o))
                .collect(),
        };
        let scenario = Scenario {
            carrier_hz: self.carrier_frequency_hz,
            slot_count: self.slot_count,
            slot_spacing_s: self.slot_spacing_s,
            sync_mode: self.sync_mode,
            satellites,
            receiver,
            pulse: self.pulse.clone(),
            budget: self.link_budget,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            carrier_frequency_hz: s.carrier_hz,
            slot_count: s.slot_count,
            slot_spacing_s: s.slot_spacing_s,
            sync_mode: s.sync_mode,
            satellites: s
                .satellites
                .iter()
                .map(|sat| SatelliteFile {
                    position_m: sat.position.into(),
                    speed_mps: sat.speed,
                    headings: sat
                        .headings
                        .iter()
                        .map(DirectionFile::from_direction)
                        .collect(),
                })
                .collect(),
            receiver: ReceiverFile {
                position_m: s.receiver.centroid.into(),
                speed_mps: s.receiver.speed,
                heading: DirectionFile::from_direction(&s.receiver.heading),
                orientation_deg: [
                    s.receiver.orientation.x.to_degrees(),
                    s.receiver.orientation.y.to_degrees(),
                    s.receiver.orientation.z.to_degrees(),
                ],
                antenna_offsets_m: s
                    .receiver
                    .antenna_offsets
                    .iter()
                    .map(|&o| o.into())
                    .collect(),
            },
            pulse: s.pulse.clone(),
            link_budget: s.budget,
        }
    }
}

/// Load and validate a scenario from a JSON file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    file.to_scenario()
}

/// Serialize a scenario to pretty JSON.
pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("schema serializes")
}
