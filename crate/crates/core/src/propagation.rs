//! Path loss, log-normal shadowing and link budget.
//!
//! Macro links (MeNB -> UE) use `15.3 + 37.6 log10(D)` plus the outdoor wall
//! loss for indoor receivers. Femto links (HeNB -> UE) use
//! `127 + 30 log10(d / 1000)` irrespective of receiver location. Shadowing is
//! zero-mean normal in dB, drawn once per (run, link) and never resampled.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{ScenarioConfig, ServingFemtoModel};
use crate::deployment::{Node, NodeId, NodeKind, Scenario};
use crate::seeding;
use crate::units::db_to_linear;

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("distance must be positive, got {0} m")]
    Distance(f64),
    #[error("no link model from {tx:?} {tx_id} to {rx:?} {rx_id}")]
    UnsupportedLink {
        tx: NodeKind,
        tx_id: NodeId,
        rx: NodeKind,
        rx_id: NodeId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Macro,
    Femto,
}

/// Link budget of one transmitter/receiver pair. All terms in dB except
/// `total_gain_linear`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkLoss {
    pub pathloss: f64,
    pub shadowing: f64,
    pub tx_antenna_gain: f64,
    pub rx_antenna_gain: f64,
    pub total_gain_linear: f64,
}

impl LinkLoss {
    pub fn new(pathloss: f64, shadowing: f64, tx_antenna_gain: f64, rx_antenna_gain: f64) -> Self {
        Self {
            pathloss,
            shadowing,
            tx_antenna_gain,
            rx_antenna_gain,
            total_gain_linear: db_to_linear(-pathloss - shadowing + tx_antenna_gain + rx_antenna_gain),
        }
    }

    /// Net loss in dB (path loss + shadowing - antenna gains).
    pub fn total_loss_db(&self) -> f64 {
        self.pathloss + self.shadowing - self.tx_antenna_gain - self.rx_antenna_gain
    }
}

fn positive(d: f64) -> Result<f64, PropagationError> {
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(PropagationError::Distance(d))
    }
}

/// MeNB -> UE path loss in dB.
pub fn macro_pathloss(distance: f64, rx_indoor: bool, wall_loss: f64) -> Result<f64, PropagationError> {
    let d = positive(distance)?;
    let base = 15.3 + 37.6 * d.log10();
    Ok(if rx_indoor { base + wall_loss } else { base })
}

/// HeNB -> UE path loss in dB.
pub fn femto_pathloss(distance: f64) -> Result<f64, PropagationError> {
    let d = positive(distance)?;
    Ok(127.0 + 30.0 * (d / 1000.0).log10())
}

/// Same-apartment line-of-sight loss, used for the serving femto link when
/// [`ServingFemtoModel::IndoorLos`] is selected.
pub fn indoor_los_pathloss(distance: f64) -> Result<f64, PropagationError> {
    let d = positive(distance)?;
    Ok(38.46 + 20.0 * d.log10())
}

/// Thermal noise plus noise figure over the system bandwidth, in dBm.
pub fn noise_power_dbm(config: &ScenarioConfig) -> f64 {
    config.thermal_noise_density + 10.0 * config.bandwidth.log10() + config.noise_figure
}

pub fn shadow_std(kind: LinkKind, config: &ScenarioConfig) -> f64 {
    match kind {
        LinkKind::Macro => config.shadow_std_macro,
        LinkKind::Femto => config.shadow_std_femto,
    }
}

/// One zero-mean normal shadowing sample in dB.
pub fn sample_shadowing<R: Rng + ?Sized>(kind: LinkKind, config: &ScenarioConfig, rng: &mut R) -> f64 {
    let sigma = shadow_std(kind, config);
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
}

/// Source of frozen per-link shadowing values.
pub trait Shadowing: Sync {
    fn shadowing_db(&self, tx: &Node, rx: &Node) -> f64;
}

/// Shadowing switched off.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoShadowing;

impl Shadowing for NoShadowing {
    fn shadowing_db(&self, _tx: &Node, _rx: &Node) -> f64 {
        0.0
    }
}

/// Draws each link's shadowing from a stream keyed by
/// `(seed, run, tx id, rx id)`.
#[derive(Debug, Clone)]
pub struct KeyedShadowing {
    config: ScenarioConfig,
    run_index: usize,
}

impl KeyedShadowing {
    pub fn new(config: &ScenarioConfig, run_index: usize) -> Self {
        Self {
            config: config.clone(),
            run_index,
        }
    }

    pub fn draw(&self, tx: &Node, rx: &Node) -> f64 {
        let kind = if tx.kind == NodeKind::MeNB {
            LinkKind::Macro
        } else {
            LinkKind::Femto
        };
        let mut rng = seeding::stream(
            self.config.rng_seed,
            &[
                seeding::DOMAIN_SHADOWING,
                self.run_index as u64,
                tx.id.0 as u64,
                rx.id.0 as u64,
            ],
        );
        sample_shadowing(kind, &self.config, &mut rng)
    }
}

impl Shadowing for KeyedShadowing {
    fn shadowing_db(&self, tx: &Node, rx: &Node) -> f64 {
        self.draw(tx, rx)
    }
}

/// All station -> UE shadowing values of a drop, drawn once with
/// [`KeyedShadowing`] and looked up afterwards. Node ids are stable across
/// steps, so one field serves every step of a run.
#[derive(Debug, Clone, Default)]
pub struct ShadowingField {
    values: HashMap<(NodeId, NodeId), f64>,
}

impl ShadowingField {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let keyed = KeyedShadowing::new(&scenario.config, scenario.run_index);
        let stations: Vec<&Node> = scenario.nodes.iter().filter(|n| n.kind.is_station()).collect();
        let ues: Vec<&Node> = scenario.nodes.iter().filter(|n| !n.kind.is_station()).collect();
        let mut values = HashMap::with_capacity(stations.len() * ues.len());
        for tx in &stations {
            for rx in &ues {
                values.insert((tx.id, rx.id), keyed.draw(tx, rx));
            }
        }
        Self { values }
    }
}

impl Shadowing for ShadowingField {
    fn shadowing_db(&self, tx: &Node, rx: &Node) -> f64 {
        self.values.get(&(tx.id, rx.id)).copied().unwrap_or(0.0)
    }
}

/// Link budget for a station -> UE pair.
pub fn path_gain(
    tx: &Node,
    rx: &Node,
    config: &ScenarioConfig,
    shadowing: &dyn Shadowing,
) -> Result<LinkLoss, PropagationError> {
    let unsupported = || PropagationError::UnsupportedLink {
        tx: tx.kind,
        tx_id: tx.id,
        rx: rx.kind,
        rx_id: rx.id,
    };
    let rx_gain = match rx.kind {
        NodeKind::Mue => config.mue_antenna_gain,
        NodeKind::Fue => config.fue_antenna_gain,
        _ => return Err(unsupported()),
    };
    let d = tx.position.distance(rx.position).max(config.min_link_distance);
    let (pathloss, tx_gain) = match tx.kind {
        NodeKind::MeNB => (
            macro_pathloss(d, rx.indoor, config.outdoor_wall_loss)?,
            config.menb_antenna_gain,
        ),
        NodeKind::HeNB => {
            let serving = rx.kind == NodeKind::Fue && rx.serving == Some(tx.id);
            let pl = match (serving, config.serving_femto_model) {
                (true, ServingFemtoModel::IndoorLos) => indoor_los_pathloss(d)?,
                _ => femto_pathloss(d)?,
            };
            (pl, config.henb_antenna_gain)
        }
        _ => return Err(unsupported()),
    };
    Ok(LinkLoss::new(
        pathloss,
        shadowing.shadowing_db(tx, rx),
        tx_gain,
        rx_gain,
    ))
}
