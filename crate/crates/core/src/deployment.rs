//! Drop geometry: one MeNB at the origin, MUEs uniform over the macro disc,
//! HeNBs uniform over the disc with one FUE inside each HeNB's apartment.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::propagation::{self, KeyedShadowing, PropagationError, Shadowing};
use crate::seeding;

#[derive(Debug, Error)]
pub enum DeploymentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{what} {value} out of range (limit {limit})")]
    Range {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("malformed scenario: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    MeNB,
    HeNB,
    Mue,
    Fue,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::MeNB => "menb",
            NodeKind::HeNB => "henb",
            NodeKind::Mue => "mue",
            NodeKind::Fue => "fue",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "menb" => Some(NodeKind::MeNB),
            "henb" => Some(NodeKind::HeNB),
            "mue" => Some(NodeKind::Mue),
            "fue" => Some(NodeKind::Fue),
            _ => None,
        }
    }

    pub fn is_station(self) -> bool {
        matches!(self, NodeKind::MeNB | NodeKind::HeNB)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Point,
    pub indoor: bool,
    /// MUE -> MeNB, FUE -> its HeNB, stations -> none.
    pub serving: Option<NodeId>,
}

/// One Monte-Carlo drop at a given displacement step.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub nodes: Vec<Node>,
    pub step_index: usize,
    pub run_index: usize,
}

/// True when `p` lies inside the square apartment centered on `henb`.
pub fn in_apartment(p: Point, henb: Point, side: f64) -> bool {
    let half = side / 2.0;
    (p.x - henb.x).abs() <= half && (p.y - henb.y).abs() <= half
}

fn uniform_in_disc<R: Rng>(rng: &mut R, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

fn uniform_in_footprint<R: Rng>(rng: &mut R, center: Point, side: f64, radius: f64) -> Point {
    let half = side / 2.0;
    loop {
        let p = Point::new(
            center.x + rng.random_range(-half..=half),
            center.y + rng.random_range(-half..=half),
        );
        if p.norm() <= radius {
            return p;
        }
    }
}

/// Build the drop for `run_index`. Deterministic in `(config.rng_seed, run_index)`.
pub fn generate_scenario(config: &ScenarioConfig, run_index: usize) -> Result<Scenario, DeploymentError> {
    config.validate()?;
    if run_index >= config.num_runs {
        return Err(DeploymentError::Range {
            what: "run_index",
            value: run_index,
            limit: config.num_runs,
        });
    }
    let mut rng = seeding::stream(config.rng_seed, &[seeding::DOMAIN_GEOMETRY, run_index as u64]);
    let m = config.num_mues;
    let f = config.num_henbs;
    let radius = config.macro_radius;

    let mue_pos: Vec<Point> = (0..m).map(|_| uniform_in_disc(&mut rng, radius)).collect();
    let henb_pos: Vec<Point> = (0..f).map(|_| uniform_in_disc(&mut rng, radius)).collect();
    let fue_pos: Vec<Point> = henb_pos
        .iter()
        .map(|&h| uniform_in_footprint(&mut rng, h, config.apartment_side, radius))
        .collect();

    let mut nodes = Vec::with_capacity(1 + m + 2 * f);
    let menb = NodeId(0);
    nodes.push(Node {
        id: menb,
        kind: NodeKind::MeNB,
        position: Point::ORIGIN,
        indoor: false,
        serving: None,
    });
    for (i, &p) in mue_pos.iter().enumerate() {
        nodes.push(Node {
            id: NodeId(1 + i as u32),
            kind: NodeKind::Mue,
            position: p,
            indoor: henb_pos.iter().any(|&h| in_apartment(p, h, config.apartment_side)),
            serving: Some(menb),
        });
    }
    let henb_base = 1 + m as u32;
    let fue_base = henb_base + f as u32;
    for (i, &p) in henb_pos.iter().enumerate() {
        nodes.push(Node {
            id: NodeId(henb_base + i as u32),
            kind: NodeKind::HeNB,
            position: p,
            indoor: true,
            serving: None,
        });
    }
    for (i, &p) in fue_pos.iter().enumerate() {
        nodes.push(Node {
            id: NodeId(fue_base + i as u32),
            kind: NodeKind::Fue,
            position: p,
            indoor: true,
            serving: Some(NodeId(henb_base + i as u32)),
        });
    }
    Ok(Scenario {
        config: config.clone(),
        nodes,
        step_index: 0,
        run_index,
    })
}

/// Move every MUE away from its strongest interfering HeNB.
pub fn advance_step(scenario: &Scenario) -> Result<Scenario, DeploymentError> {
    let shadowing = KeyedShadowing::new(&scenario.config, scenario.run_index);
    advance_step_with(scenario, &shadowing)
}

/// [`advance_step`] with a caller-provided shadowing source, so a run can
/// reuse one precomputed shadowing field across steps.
///
/// The displacement length is uniform on `[0, 2 * step_distance]` and points
/// straight away from the HeNB with the largest path gain to the MUE. A move
/// that would leave the macro disc stops at the boundary and continues along
/// the circle in the direction that keeps increasing the distance to that
/// HeNB, up to the antipodal point.
pub fn advance_step_with(scenario: &Scenario, shadowing: &dyn Shadowing) -> Result<Scenario, DeploymentError> {
    let cfg = &scenario.config;
    if scenario.step_index >= cfg.num_steps {
        return Err(DeploymentError::Range {
            what: "step_index",
            value: scenario.step_index,
            limit: cfg.num_steps,
        });
    }
    let henbs: Vec<&Node> = scenario.henbs().collect();
    let mut next = scenario.clone();
    next.step_index += 1;
    if henbs.is_empty() {
        return Ok(next);
    }
    let henb_pos: Vec<Point> = henbs.iter().map(|h| h.position).collect();

    for node in next.nodes.iter_mut().filter(|n| n.kind == NodeKind::Mue) {
        let mut best: Option<(f64, &Node)> = None;
        for h in &henbs {
            let gain = propagation::path_gain(h, node, cfg, shadowing)?.total_gain_linear;
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, h));
            }
        }
        let (_, aggressor) = best.expect("at least one HeNB");
        let mut rng = seeding::stream(
            cfg.rng_seed,
            &[
                seeding::DOMAIN_STEP,
                scenario.run_index as u64,
                scenario.step_index as u64,
                node.id.0 as u64,
            ],
        );
        let length = if cfg.step_distance > 0.0 {
            rng.random_range(0.0..=2.0 * cfg.step_distance)
        } else {
            0.0
        };
        let fallback_angle = 2.0 * PI * rng.random::<f64>();
        node.position = flee(
            node.position,
            aggressor.position,
            length,
            cfg.macro_radius,
            fallback_angle,
        );
        node.indoor = henb_pos
            .iter()
            .any(|&h| in_apartment(node.position, h, cfg.apartment_side));
    }
    Ok(next)
}

/// Displace `from` by `length` directly away from `threat`, clipped to the
/// disc of `radius` around the origin.
pub fn flee(from: Point, threat: Point, length: f64, radius: f64, fallback_angle: f64) -> Point {
    if length <= 0.0 {
        return from;
    }
    let (dx, dy) = (from.x - threat.x, from.y - threat.y);
    let d = dx.hypot(dy);
    let (ux, uy) = if d > 0.0 {
        (dx / d, dy / d)
    } else {
        (fallback_angle.cos(), fallback_angle.sin())
    };
    // Exit parameter of the ray from + t u on the circle |p| = radius.
    let b = from.x * ux + from.y * uy;
    let c = from.x * from.x + from.y * from.y - radius * radius;
    let t_exit = (-b + (b * b - c).max(0.0).sqrt()).max(0.0);
    if length <= t_exit {
        return Point::new(from.x + length * ux, from.y + length * uy);
    }
    let edge = Point::new(from.x + t_exit * ux, from.y + t_exit * uy);
    let remaining = length - t_exit;
    if threat.norm() == 0.0 {
        return clamp_to_disc(edge, radius);
    }
    let theta_h = threat.y.atan2(threat.x);
    let theta_e = edge.y.atan2(edge.x);
    let mut diff = theta_e - theta_h;
    while diff > PI {
        diff -= 2.0 * PI;
    }
    while diff <= -PI {
        diff += 2.0 * PI;
    }
    let sign = if diff >= 0.0 { 1.0 } else { -1.0 };
    let slid = sign * (diff.abs() + remaining / radius).min(PI);
    let theta = theta_h + slid;
    clamp_to_disc(Point::new(radius * theta.cos(), radius * theta.sin()), radius)
}

fn clamp_to_disc(p: Point, radius: f64) -> Point {
    let n = p.norm();
    if n > radius {
        Point::new(p.x * radius / n, p.y * radius / n)
    } else {
        p
    }
}

impl Scenario {
    pub fn menb(&self) -> &Node {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::MeNB)
            .expect("scenario has an MeNB")
    }

    pub fn mues(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Mue)
    }

    pub fn henbs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::HeNB)
    }

    pub fn fues(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Fue)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// The FUE served by `henb`.
    pub fn fue_of(&self, henb: NodeId) -> Option<&Node> {
        self.fues().find(|n| n.serving == Some(henb))
    }

    /// Smallest MUE-HeNB distance in the drop, `None` without HeNBs.
    pub fn min_mue_henb_distance(&self) -> Option<f64> {
        self.mues()
            .flat_map(|m| self.henbs().map(move |h| m.position.distance(h.position)))
            .min_by(f64::total_cmp)
    }

    /// Check the structural invariants of a drop.
    pub fn validate(&self) -> Result<(), DeploymentError> {
        let bad = |s: String| Err(DeploymentError::Malformed(s));
        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return bad(format!("duplicate node id {}", n.id));
            }
        }
        let menbs: Vec<&Node> = self.nodes.iter().filter(|n| n.kind == NodeKind::MeNB).collect();
        if menbs.len() != 1 {
            return bad(format!("expected exactly one MeNB, found {}", menbs.len()));
        }
        let menb = menbs[0];
        let kinds: BTreeMap<NodeId, NodeKind> = self.nodes.iter().map(|n| (n.id, n.kind)).collect();
        let tol = self.config.macro_radius * 1e-9;
        let mut fue_count: BTreeMap<NodeId, usize> = self.henbs().map(|h| (h.id, 0)).collect();
        for n in &self.nodes {
            if n.position.distance(menb.position) > self.config.macro_radius + tol {
                return bad(format!("node {} lies outside the macro disc", n.id));
            }
            match n.kind {
                NodeKind::Mue if n.serving != Some(menb.id) => {
                    return bad(format!("MUE {} must be served by the MeNB", n.id));
                }
                NodeKind::Fue => match n.serving {
                    Some(s) if kinds.get(&s) == Some(&NodeKind::HeNB) => {
                        *fue_count.get_mut(&s).expect("HeNB present") += 1;
                    }
                    _ => return bad(format!("FUE {} must be served by a HeNB", n.id)),
                },
                _ => {}
            }
        }
        if let Some((h, c)) = fue_count.iter().find(|(_, &c)| c != 1) {
            return bad(format!("HeNB {h} serves {c} FUEs, expected 1"));
        }
        Ok(())
    }

    /// Line-oriented dump: a header comment, then one node per line as
    /// `id kind x y indoor serving` (`indoor` is 0/1, `serving` is `-` for
    /// stations). Coordinates use shortest round-trip formatting so
    /// [`Scenario::from_text`] restores them bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# absf-sim scenario v1").unwrap();
        writeln!(out, "# run={} step={}", self.run_index, self.step_index).unwrap();
        writeln!(out, "# id kind x y indoor serving").unwrap();
        for n in &self.nodes {
            let serving = n.serving.map_or("-".to_string(), |s| s.to_string());
            writeln!(
                out,
                "{} {} {} {} {} {}",
                n.id,
                n.kind.as_str(),
                n.position.x,
                n.position.y,
                u8::from(n.indoor),
                serving
            )
            .unwrap();
        }
        out
    }

    /// Parse the format written by [`Scenario::to_text`]. Commas are accepted
    /// as separators too. The result is validated.
    pub fn from_text(text: &str, config: &ScenarioConfig) -> Result<Scenario, DeploymentError> {
        let mut run_index = 0;
        let mut step_index = 0;
        let mut nodes = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for tok in comment.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("run=") {
                        run_index = v.parse().unwrap_or(0);
                    } else if let Some(v) = tok.strip_prefix("step=") {
                        step_index = v.parse().unwrap_or(0);
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let err = |what: &str| DeploymentError::Malformed(format!("line {}: {what}", lineno + 1));
            if fields.len() != 6 {
                return Err(err("expected 6 fields: id kind x y indoor serving"));
            }
            let id = NodeId(fields[0].parse().map_err(|_| err("bad id"))?);
            let kind = NodeKind::parse(fields[1]).ok_or_else(|| err("bad kind"))?;
            let x: f64 = fields[2].parse().map_err(|_| err("bad x"))?;
            let y: f64 = fields[3].parse().map_err(|_| err("bad y"))?;
            let indoor = match fields[4] {
                "0" | "false" => false,
                "1" | "true" => true,
                _ => return Err(err("bad indoor flag")),
            };
            let serving = match fields[5] {
                "-" => None,
                s => Some(NodeId(s.parse().map_err(|_| err("bad serving id"))?)),
            };
            nodes.push(Node {
                id,
                kind,
                position: Point::new(x, y),
                indoor,
                serving,
            });
        }
        let mut cfg = config.clone();
        cfg.num_mues = nodes.iter().filter(|n| n.kind == NodeKind::Mue).count();
        cfg.num_henbs = nodes.iter().filter(|n| n.kind == NodeKind::HeNB).count();
        let scenario = Scenario {
            config: cfg,
            nodes,
            step_index,
            run_index,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
