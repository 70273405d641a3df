//! Downlink SINR of the macro and femto tiers.
//!
//! For MUE `m`, `gamma_m = G(M,m) P(m) / (sum_f P(F_f) G(F_f,m) + sigma_m)`.
//! The normalized interference matrix is `F(m,f) = G(F_f,m) gamma_0 / G(M,m)`
//! and the threshold term `b(m) = gamma_0 sigma_m / G(M,m)`, so that the
//! SINR requirement reads `F P_F <= P_M - b`. All arithmetic is linear (mW).

use nalgebra::{DMatrix, DVector};

use crate::config::ScenarioConfig;
use crate::deployment::{NodeId, Scenario};
use crate::propagation::{self, KeyedShadowing, PropagationError, Shadowing};
use crate::units::{db_to_linear, dbm_to_mw, linear_to_db};

/// Linear path gains of one drop. Rows are ordered by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGainMatrix {
    pub mue_ids: Vec<NodeId>,
    pub henb_ids: Vec<NodeId>,
    /// FUE served by `henb_ids[f]`.
    pub fue_ids: Vec<NodeId>,
    /// MeNB -> MUE.
    pub serving_gain: Vec<f64>,
    /// `cross_gain[(m, f)]`: HeNB f -> MUE m.
    pub cross_gain: DMatrix<f64>,
    /// HeNB f -> its own FUE.
    pub fue_serving_gain: Vec<f64>,
    /// MeNB -> FUE of HeNB f.
    pub fue_macro_gain: Vec<f64>,
    /// `fue_cross_gain[(f, g)]`: HeNB g -> FUE of HeNB f. The diagonal holds
    /// the serving gain and is not used as interference.
    pub fue_cross_gain: DMatrix<f64>,
    /// Receiver noise power (mW).
    pub noise_mw: f64,
}

/// Transmit powers in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct TxPowers {
    pub menb_mw: f64,
    pub henb_mw: Vec<f64>,
}

impl TxPowers {
    pub fn from_config(config: &ScenarioConfig, num_henbs: usize) -> Self {
        Self {
            menb_mw: dbm_to_mw(config.menb_power),
            henb_mw: vec![dbm_to_mw(config.henb_power); num_henbs],
        }
    }
}

pub fn build_gain_matrix(scenario: &Scenario) -> Result<PathGainMatrix, PropagationError> {
    let shadowing = KeyedShadowing::new(&scenario.config, scenario.run_index);
    build_gain_matrix_with(scenario, &shadowing)
}

/// One path-gain evaluation per (station, receiver) pair.
pub fn build_gain_matrix_with(
    scenario: &Scenario,
    shadowing: &dyn Shadowing,
) -> Result<PathGainMatrix, PropagationError> {
    let cfg = &scenario.config;
    let menb = scenario.menb();
    let mut mues: Vec<_> = scenario.mues().collect();
    mues.sort_by_key(|n| n.id);
    let mut henbs: Vec<_> = scenario.henbs().collect();
    henbs.sort_by_key(|n| n.id);
    let fues: Vec<_> = henbs
        .iter()
        .map(|h| scenario.fue_of(h.id).expect("every HeNB has an FUE"))
        .collect();
    let gain = |tx, rx| propagation::path_gain(tx, rx, cfg, shadowing).map(|l| l.total_gain_linear);

    let serving_gain = mues.iter().map(|m| gain(menb, m)).collect::<Result<Vec<_>, _>>()?;
    let mut cross_gain = DMatrix::zeros(mues.len(), henbs.len());
    for (i, m) in mues.iter().enumerate() {
        for (j, h) in henbs.iter().enumerate() {
            cross_gain[(i, j)] = gain(h, m)?;
        }
    }
    let fue_serving_gain = henbs
        .iter()
        .zip(&fues)
        .map(|(h, u)| gain(h, u))
        .collect::<Result<Vec<_>, _>>()?;
    let fue_macro_gain = fues.iter().map(|u| gain(menb, u)).collect::<Result<Vec<_>, _>>()?;
    let mut fue_cross_gain = DMatrix::zeros(henbs.len(), henbs.len());
    for (i, u) in fues.iter().enumerate() {
        for (j, h) in henbs.iter().enumerate() {
            fue_cross_gain[(i, j)] = gain(h, u)?;
        }
    }
    Ok(PathGainMatrix {
        mue_ids: mues.iter().map(|n| n.id).collect(),
        henb_ids: henbs.iter().map(|n| n.id).collect(),
        fue_ids: fues.iter().map(|n| n.id).collect(),
        serving_gain,
        cross_gain,
        fue_serving_gain,
        fue_macro_gain,
        fue_cross_gain,
        noise_mw: dbm_to_mw(propagation::noise_power_dbm(cfg)),
    })
}

/// Per-MUE SINR state plus the normalized matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    pub mue_ids: Vec<NodeId>,
    pub henb_ids: Vec<NodeId>,
    /// Linear threshold gamma_0.
    pub gamma0: f64,
    /// `G(M,m) P(m)` (mW).
    pub signal: Vec<f64>,
    /// `interference[(m, f)] = P(F_f) G(F_f, m)` (mW).
    pub interference: DMatrix<f64>,
    pub noise: Vec<f64>,
    /// Interference plus noise, eta_m (mW).
    pub eta: Vec<f64>,
    /// Linear SINR.
    pub gamma: Vec<f64>,
    pub gamma_db: Vec<f64>,
    pub f_matrix: DMatrix<f64>,
    pub b_vector: DVector<f64>,
    pub menb_power_mw: f64,
    pub henb_power_mw: Vec<f64>,
    /// Indices (into `mue_ids`) with gamma_m < gamma_0.
    pub victims: Vec<usize>,
    /// Unmuted FUE SINR, one per HeNB.
    pub fue_gamma: Vec<f64>,
}

impl SinrReport {
    pub fn num_mues(&self) -> usize {
        self.mue_ids.len()
    }

    pub fn num_henbs(&self) -> usize {
        self.henb_ids.len()
    }

    pub fn is_victim(&self, m: usize) -> bool {
        self.gamma[m] < self.gamma0
    }

    /// Total interference at MUE `m` (mW).
    pub fn total_interference(&self, m: usize) -> f64 {
        self.interference.row(m).sum()
    }

    /// SINR of MUE `m` when HeNB `f` transmits only a fraction
    /// `1 - rates[f]` of the frame.
    pub fn muted_gamma(&self, m: usize, rates: &[f64]) -> f64 {
        let i: f64 = (0..self.num_henbs())
            .map(|f| self.interference[(m, f)] * (1.0 - rates[f]))
            .sum();
        self.signal[m] / (i + self.noise[m])
    }
}

pub fn compute_sinr(gains: &PathGainMatrix, powers: &TxPowers, gamma0_db: f64) -> SinrReport {
    let nm = gains.mue_ids.len();
    let nf = gains.henb_ids.len();
    assert_eq!(powers.henb_mw.len(), nf, "one power per HeNB");
    let gamma0 = db_to_linear(gamma0_db);
    let signal: Vec<f64> = gains.serving_gain.iter().map(|g| g * powers.menb_mw).collect();
    let interference = DMatrix::from_fn(nm, nf, |m, f| gains.cross_gain[(m, f)] * powers.henb_mw[f]);
    let noise = vec![gains.noise_mw; nm];
    let eta: Vec<f64> = (0..nm).map(|m| interference.row(m).sum() + noise[m]).collect();
    let gamma: Vec<f64> = (0..nm).map(|m| signal[m] / eta[m]).collect();
    let gamma_db = gamma.iter().map(|&g| linear_to_db(g)).collect();
    let f_matrix = DMatrix::from_fn(nm, nf, |m, f| gains.cross_gain[(m, f)] * gamma0 / gains.serving_gain[m]);
    let b_vector = DVector::from_fn(nm, |m, _| gamma0 * noise[m] / gains.serving_gain[m]);
    let victims = (0..nm).filter(|&m| gamma[m] < gamma0).collect();

    let fue_gamma = (0..nf)
        .map(|f| {
            let own = gains.fue_serving_gain[f] * powers.henb_mw[f];
            let others: f64 = (0..nf)
                .filter(|&g| g != f)
                .map(|g| gains.fue_cross_gain[(f, g)] * powers.henb_mw[g])
                .sum();
            own / (gains.fue_macro_gain[f] * powers.menb_mw + others + gains.noise_mw)
        })
        .collect();

    SinrReport {
        mue_ids: gains.mue_ids.clone(),
        henb_ids: gains.henb_ids.clone(),
        gamma0,
        signal,
        interference,
        noise,
        eta,
        gamma,
        gamma_db,
        f_matrix,
        b_vector,
        menb_power_mw: powers.menb_mw,
        henb_power_mw: powers.henb_mw.clone(),
        victims,
        fue_gamma,
    }
}

/// Aggressor HeNB indices per MUE, sorted. Empty for non-victims.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AggressorSets {
    pub per_mue: Vec<Vec<usize>>,
}

impl AggressorSets {
    pub fn of(&self, m: usize) -> &[usize] {
        &self.per_mue[m]
    }
}

/// HeNB `f` is an aggressor of victim `n` when it contributes more than
/// `epsilon * eta_n` to the victim's interference-plus-noise.
pub fn detect_aggressors(report: &SinrReport, epsilon: f64) -> AggressorSets {
    let per_mue = (0..report.num_mues())
        .map(|m| {
            if !report.is_victim(m) {
                return Vec::new();
            }
            (0..report.num_henbs())
                .filter(|&f| report.interference[(m, f)] > epsilon * report.eta[m])
                .collect()
        })
        .collect();
    AggressorSets { per_mue }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::{generate_scenario, Node, NodeKind, Point};
    use proptest::prelude::*;

    /// Hand-built gain matrix with unit noise.
    fn gains(serving: Vec<f64>, cross: Vec<Vec<f64>>) -> PathGainMatrix {
        let nm = serving.len();
        let nf = cross.first().map_or(0, |r| r.len());
        PathGainMatrix {
            mue_ids: (0..nm as u32).map(|i| NodeId(i + 1)).collect(),
            henb_ids: (0..nf as u32).map(|i| NodeId(100 + i)).collect(),
            fue_ids: (0..nf as u32).map(|i| NodeId(200 + i)).collect(),
            serving_gain: serving,
            cross_gain: DMatrix::from_fn(nm, nf, |m, f| cross[m][f]),
            fue_serving_gain: vec![1.0; nf],
            fue_macro_gain: vec![1.0; nf],
            fue_cross_gain: DMatrix::from_element(nf, nf, 1.0),
            noise_mw: 1.0,
        }
    }

    fn unit_powers(nf: usize) -> TxPowers {
        TxPowers {
            menb_mw: 1.0,
            henb_mw: vec![1.0; nf],
        }
    }

    #[test]
    fn unit_sinr_without_femtos() {
        let r = compute_sinr(&gains(vec![1.0], vec![vec![]]), &unit_powers(0), 0.0);
        assert_eq!(r.gamma[0], 1.0);
        assert!(r.gamma_db[0].abs() < 1e-15);
        assert!(r.victims.is_empty());
    }

    #[test]
    fn hand_evaluated_sinr() {
        let r = compute_sinr(&gains(vec![10.0], vec![vec![9.0]]), &unit_powers(1), 0.0);
        assert_eq!(r.eta[0], 10.0);
        assert_eq!(r.gamma[0], 1.0);
        assert!(!r.is_victim(0));
    }

    #[test]
    fn matrix_form_identity() {
        // gamma_m >= gamma0  <=>  sum_f F(m,f) P_f <= P_M - b(m)
        let g = gains(vec![3.0, 0.5], vec![vec![0.2, 1.5], vec![0.01, 0.02]]);
        let p = TxPowers {
            menb_mw: 4.0,
            henb_mw: vec![2.0, 0.5],
        };
        let r = compute_sinr(&g, &p, 1.5);
        for m in 0..2 {
            let lhs: f64 = (0..2).map(|f| r.f_matrix[(m, f)] * p.henb_mw[f]).sum();
            let rhs = p.menb_mw - r.b_vector[m];
            // Scaling both sides by G(M,m)/gamma0 recovers the SINR inequality.
            let scale = g.serving_gain[m] / r.gamma0;
            assert!((lhs * scale - r.total_interference(m)).abs() < 1e-12);
            assert!((rhs * scale - (r.signal[m] / r.gamma0 - r.noise[m])).abs() < 1e-12);
            assert_eq!(lhs <= rhs, r.gamma[m] >= r.gamma0);
        }
    }

    #[test]
    fn aggressor_detection() {
        // MUE 0 victim with one interferer; MUE 1 not a victim.
        let g = gains(vec![1.0, 100.0], vec![vec![5.0, 1e-6], vec![5.0, 5.0]]);
        let r = compute_sinr(&g, &unit_powers(2), 0.0);
        let a = detect_aggressors(&r, 0.01);
        assert_eq!(a.of(0), &[0]);
        assert!(a.of(1).is_empty());
    }

    #[test]
    fn isolated_henb_is_nobodys_aggressor() {
        // Three HeNBs next to MUEs, one far from everybody.
        let cfg = ScenarioConfig {
            num_mues: 3,
            num_henbs: 4,
            shadow_std_macro: 0.0,
            shadow_std_femto: 0.0,
            num_runs: 1,
            ..Default::default()
        };
        let mut s = generate_scenario(&cfg, 0).unwrap();
        let mue_pos = [Point::new(400.0, 0.0), Point::new(0.0, 400.0), Point::new(-400.0, 0.0)];
        let henb_pos = [
            Point::new(0.0, -450.0),
            Point::new(405.0, 0.0),
            Point::new(0.0, 405.0),
            Point::new(-405.0, 0.0),
        ];
        for (n, p) in s.nodes.iter_mut().filter(|n| n.kind == NodeKind::Mue).zip(mue_pos) {
            n.position = p;
            n.indoor = false;
        }
        let henb_ids: Vec<NodeId> = s.henbs().map(|h| h.id).collect();
        for (id, p) in henb_ids.iter().zip(henb_pos) {
            let node: &mut Node = s.nodes.iter_mut().find(|n| n.id == *id).unwrap();
            node.position = p;
            let fue = s.nodes.iter_mut().find(|n| n.serving == Some(*id)).unwrap();
            fue.position = Point::new(p.x, p.y + 1.0);
        }
        let r = compute_sinr(&build_gain_matrix(&s).unwrap(), &TxPowers::from_config(&cfg, 4), 0.0);
        assert_eq!(r.victims, vec![0, 1, 2]);
        let a = detect_aggressors(&r, 0.05);
        assert!(a.per_mue.iter().all(|set| !set.contains(&0)));
        assert_eq!(a.per_mue, vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn gain_matrix_shapes() {
        let cfg = ScenarioConfig {
            num_runs: 1,
            ..Default::default()
        };
        let s = generate_scenario(&cfg, 0).unwrap();
        let g = build_gain_matrix(&s).unwrap();
        assert_eq!(g.cross_gain.shape(), (10, 40));
        assert_eq!(g.fue_cross_gain.shape(), (40, 40));
        assert!(g.cross_gain.iter().all(|&x| x > 0.0));

        let cfg0 = ScenarioConfig {
            num_henbs: 0,
            num_runs: 1,
            ..Default::default()
        };
        let g0 = build_gain_matrix(&generate_scenario(&cfg0, 0).unwrap()).unwrap();
        assert_eq!(g0.cross_gain.ncols(), 0);
    }

    #[test]
    fn gain_matrix_ignores_node_order() {
        let cfg = ScenarioConfig {
            num_mues: 6,
            num_henbs: 8,
            num_runs: 1,
            ..Default::default()
        };
        let s = generate_scenario(&cfg, 0).unwrap();
        let mut shuffled = s.clone();
        shuffled.nodes.reverse();
        shuffled.nodes.swap(1, 5);
        assert_eq!(build_gain_matrix(&s).unwrap(), build_gain_matrix(&shuffled).unwrap());
    }

    proptest! {
        #[test]
        fn removing_a_henb_never_hurts(
            serving in prop::collection::vec(1e-9f64..1e-3, 1..5),
            cross in prop::collection::vec(1e-12f64..1e-4, 12),
            drop in 0usize..3,
        ) {
            let nm = serving.len();
            let rows: Vec<Vec<f64>> = (0..nm).map(|m| cross[m * 3 % 12..m * 3 % 12 + 3].to_vec()).collect();
            let p = TxPowers { menb_mw: 4e4, henb_mw: vec![100.0; 3] };
            let full = compute_sinr(&gains(serving.clone(), rows.clone()), &p, 0.0);
            let reduced_rows: Vec<Vec<f64>> = rows.iter().map(|r| {
                r.iter().enumerate().filter(|(f, _)| *f != drop).map(|(_, &x)| x).collect()
            }).collect();
            let p2 = TxPowers { menb_mw: 4e4, henb_mw: vec![100.0; 2] };
            let reduced = compute_sinr(&gains(serving, reduced_rows), &p2, 0.0);
            for m in 0..nm {
                prop_assert!(reduced.gamma[m] >= full.gamma[m]);
            }
        }

        #[test]
        fn sinr_recomputes_and_victims_match(
            serving in prop::collection::vec(1e-12f64..1e-3, 1..6),
            cross in prop::collection::vec(1e-14f64..1e-4, 24),
            g0 in -6.0f64..6.0,
        ) {
            let nm = serving.len();
            let rows: Vec<Vec<f64>> = (0..nm).map(|m| cross[m * 4..m * 4 + 4].to_vec()).collect();
            let g = gains(serving, rows);
            let p = TxPowers { menb_mw: 4e4, henb_mw: vec![100.0; 4] };
            let r = compute_sinr(&g, &p, g0);
            for m in 0..nm {
                let eta: f64 = (0..4).map(|f| p.henb_mw[f] * g.cross_gain[(m, f)]).sum::<f64>() + g.noise_mw;
                let gamma = g.serving_gain[m] * p.menb_mw / eta;
                prop_assert!((r.eta[m] - eta).abs() / eta < 1e-10);
                prop_assert!((r.gamma[m] - gamma).abs() / gamma < 1e-10);
                prop_assert_eq!(r.victims.contains(&m), gamma < db_to_linear(g0));
                for f in 0..4 {
                    prop_assert!(r.f_matrix[(m, f)] >= 0.0);
                }
            }
        }

        #[test]
        fn f_matrix_homogeneity(gm in 1e-9f64..1e-3, gf in 1e-12f64..1e-4) {
            let base = compute_sinr(&gains(vec![gm], vec![vec![gf]]), &unit_powers(1), 0.0);
            let dbl_f = compute_sinr(&gains(vec![gm], vec![vec![2.0 * gf]]), &unit_powers(1), 0.0);
            let dbl_m = compute_sinr(&gains(vec![2.0 * gm], vec![vec![gf]]), &unit_powers(1), 0.0);
            let f = base.f_matrix[(0, 0)];
            prop_assert!((dbl_f.f_matrix[(0, 0)] - 2.0 * f).abs() <= 1e-12 * f);
            prop_assert!((dbl_m.f_matrix[(0, 0)] - 0.5 * f).abs() <= 1e-12 * f);
        }
    }
}
