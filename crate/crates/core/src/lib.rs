//! Fisher-information analysis for 9D localization (3D position,
//! velocity, and orientation) of a multi-antenna receiver from delay and
//! Doppler observations of unsynchronized LEO satellites.
//!
//! Pipeline: link geometry → channel-parameter FIM → location-parameter
//! transform → Schur-complement nuisance elimination → identifiability
//! verdicts and Cramér–Rao bounds. The `oracle` module re-derives the
//! information matrix and Jacobians numerically so every closed form is
//! cross-checked.

pub mod analysis;
pub mod efim;
pub mod error;
pub mod fim;
pub mod geometry;
pub mod oracle;
pub mod output;
pub mod scenario;
pub mod transform;
pub mod waveform;

pub use analysis::{
    check_identifiability, crlb_report, minimal_config_search, parameter_sweep, ConfigRanges,
    CrlbReport, IdentifiabilityVerdict, SweepAxis, Target,
};
pub use efim::{offset_loss_terms, scenario_efim, schur_efim, EfimResult, OffsetLoss};
pub use error::{Error, Result};
pub use fim::{assemble_channel_fim, channel_fim_block, ChannelParameterIndex, FimMatrix};
pub use geometry::{Direction, LinkGeometry, ReceiverState, SatelliteState, SPEED_OF_LIGHT};
pub use oracle::{jacobian_fd_check, numeric_channel_fim, OracleLink, SampledWaveform};
pub use scenario::{default_scenario, load_scenario, Scenario, SyncMode};
pub use transform::{build_jacobian, location_fim, transform_fim, LocationParameterIndex};
pub use waveform::{LinkBudget, PulseSpec, PulseStatistics};
