//! Scenario loading, verifier orchestration and report emission.

mod config;
mod report;
mod scenario;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::json;

pub use config::ConfigFile;
pub use report::{Artifact, Check, Status, VerificationReport};
pub use scenario::{Budgets, Context, Derived, MetricSpec, NetSpec, Scenario};

use crate::directions::{injectivity_experiment, local_direction_map, DriftParams};
use crate::error::{Error, Result};
use crate::manifold::{distance, ChartPoint};
use crate::netlattice::{distortion_audit, gamma_checked, BoundingBox};
use crate::triangulation::{locate, KuhnSimplex};

/// Tolerance on negative slack for inequality checks.
pub const SLACK_TOLERANCE: f64 = 1e-7;
/// Relative error allowed between shooting distances and the oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-6;
pub const FACE_TOLERANCE: f64 = 1e-6;
pub const COLLAPSE_TOLERANCE: f64 = 1e-9;
pub const CONTINUITY_STEP: f64 = 1e-6;
pub const CONTINUITY_TOLERANCE: f64 = 1e-4;
pub const SURJECTIVITY_TOLERANCE: f64 = 1e-6;
pub const ANTIPODAL_GAP: f64 = 0.1;
pub const ODDNESS_TOLERANCE: f64 = 1e-3;
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subcommand {
    Audit,
    PhiVerify,
    NetCheck,
    Degree,
    Directions,
    All,
}

impl Subcommand {
    pub const STAGES: [Subcommand; 5] = [
        Subcommand::Audit,
        Subcommand::PhiVerify,
        Subcommand::NetCheck,
        Subcommand::Degree,
        Subcommand::Directions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Audit => "audit",
            Subcommand::PhiVerify => "phi-verify",
            Subcommand::NetCheck => "net-check",
            Subcommand::Degree => "degree",
            Subcommand::Directions => "directions",
            Subcommand::All => "all",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::STAGES
            .into_iter()
            .chain([Subcommand::All])
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown subcommand `{s}`")))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Overrides the scenario's sampling seed.
    pub seed: Option<u64>,
    /// When false, `wall_ms` is reported as 0 so summaries are byte-identical.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: None, timing: true }
    }
}

struct Run<'a> {
    scenario: &'a Scenario,
    ctx: Context,
    seed: u64,
    checks: Vec<Check>,
    artifacts: Vec<Artifact>,
    details: std::collections::BTreeMap<String, serde_json::Value>,
}

/// Runs one subcommand (or all of them) on a validated scenario.
pub fn run(sub: Subcommand, scenario: &Scenario, opts: &RunOptions) -> Result<VerificationReport> {
    let start = Instant::now();
    let ctx = scenario.build()?;
    let mut r = Run {
        scenario,
        ctx,
        seed: opts.seed.unwrap_or(scenario.seed),
        checks: Vec::new(),
        artifacts: Vec::new(),
        details: Default::default(),
    };
    let stages: Vec<Subcommand> = match sub {
        Subcommand::All => Subcommand::STAGES.to_vec(),
        s => vec![s],
    };
    let mut violated = false;
    for stage in &stages {
        match stage {
            Subcommand::Audit => violated = !r.audit(),
            Subcommand::PhiVerify => r.phi_verify(),
            Subcommand::NetCheck => r.net_check(),
            Subcommand::Degree => r.degree(),
            Subcommand::Directions => r.directions(),
            Subcommand::All => unreachable!(),
        }
        if violated {
            for later in Subcommand::STAGES.iter().skip(1) {
                r.checks.push(Check::not_applicable(
                    later.as_str(),
                    "net embedding is not isometric; theorem hypotheses fail",
                ));
            }
            break;
        }
    }
    Ok(VerificationReport {
        scenario: scenario.clone(),
        subcommand: sub.as_str().into(),
        checks: r.checks,
        hypothesis_violated: violated,
        details: r.details,
        wall_ms: if opts.timing { start.elapsed().as_millis() as u64 } else { 0 },
        artifacts: r.artifacts,
    })
}

fn fnv(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn uniform_in(b: &BoundingBox, count: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    (0..count).map(|_| b.sample(rng)).collect()
}

fn min_by_slack<T>(items: &[T], slack: impl Fn(&T) -> f64) -> Option<&T> {
    items.iter().min_by(|a, b| slack(a).total_cmp(&slack(b)))
}

impl Run<'_> {
    fn rng(&self, tag: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ fnv(tag))
    }

    fn n(&self) -> usize {
        self.scenario.dim
    }

    fn record(&mut self, name: &str, result: Result<Check>) {
        let check = result.unwrap_or_else(|e| Check::error(name, &e));
        log::info!("{name}: {:?}", check.status);
        self.checks.push(check);
    }

    /// Returns false when the isometry hypothesis fails.
    fn audit(&mut self) -> bool {
        let s = self.scenario;
        let res = distortion_audit(&self.ctx.net, &s.audit_box(), s.budgets.audit_pairs, self.seed);
        let ok = match res {
            Ok(rep) => {
                let mut a = Artifact::with_vectors("distortion", &[("p", self.n()), ("q", self.n()), ("euclidean", 1), ("riemannian", 1), ("distortion", 1)]);
                for row in &rep.rows {
                    a.rows.push([row.p.clone(), row.q.clone(), vec![row.euclidean, row.riemannian, row.distortion]].concat());
                }
                self.artifacts.push(a);
                let mut c = Check::below("distortion", s.audit_threshold, rep.max_distortion, rep.pairs);
                if let Some((p, q)) = &rep.worst_pair {
                    c = c.with_message(format!("worst pair {:?} {:?}", p.coords.as_slice(), q.coords.as_slice()));
                }
                let pass = c.pass;
                if !pass {
                    c = c.with_message(format!(
                        "isometry hypothesis violated: distortion {:.4e} exceeds {:.1e}",
                        rep.max_distortion, s.audit_threshold
                    ));
                }
                self.checks.push(c);
                pass
            }
            Err(e) => {
                self.checks.push(Check::error("distortion", &e));
                false
            }
        };
        if self.ctx.net.metric().has_oracle() {
            let res = self.oracle();
            self.record("oracle", res);
        }
        ok
    }

    fn oracle(&mut self) -> Result<Check> {
        let s = self.scenario;
        let mut rng = self.rng("oracle");
        let core = s.core_box();
        let pairs: Vec<(DVector<f64>, DVector<f64>)> =
            (0..s.budgets.oracle_pairs).map(|_| (core.sample(&mut rng), core.sample(&mut rng))).collect();
        let metric = self.ctx.net.metric();
        let rows: Vec<Vec<f64>> = pairs
            .par_iter()
            .map(|(x, y)| {
                let d = distance(metric, &ChartPoint::new(x.clone())?, &ChartPoint::new(y.clone())?)?;
                let o = metric.oracle_distance(x.as_slice(), y.as_slice()).expect("oracle family");
                let rel = (d - o).abs() / o.max(f64::MIN_POSITIVE);
                Ok([x.as_slice(), y.as_slice(), &[d, o, rel]].concat())
            })
            .collect::<Result<_>>()?;
        let n = self.n();
        let worst = rows.iter().map(|r| r[2 * n + 2]).fold(0.0, f64::max);
        let mut a = Artifact::with_vectors("oracle", &[("x", n), ("y", n), ("distance", 1), ("oracle", 1), ("relative_error", 1)]);
        a.rows = rows;
        self.artifacts.push(a);
        Ok(Check::below("oracle", ORACLE_TOLERANCE, worst, pairs.len()))
    }

    fn phi_verify(&mut self) {
        let res = self.round_preserving();
        self.record("round_preserving", res);
        let res = self.condition_iii();
        self.record("condition_iii", res);
        let res = self.face_consistency();
        self.record("face_consistency", res);
        let res = self.lower_bound();
        self.record("lower_bound", res);
        self.gamma();
        if self.scenario.is_flat_identity() {
            let res = self.collapse();
            self.record("collapse", res);
        }
        let res = self.continuity();
        self.record("continuity", res);
        if self.scenario.budgets.surjectivity > 0 {
            let res = self.surjectivity();
            self.record("surjectivity", res);
        }
    }

    fn round_preserving(&mut self) -> Result<Check> {
        let s = self.scenario;
        let xs = uniform_in(&s.core_box(), s.budgets.round_preserving, &mut self.rng("round_preserving"));
        let g = &self.ctx.glued;
        let samples: Vec<_> = xs.par_iter().map(|x| g.round_preserving(x.as_slice())).collect::<Result<_>>()?;
        let n = self.n();
        let mut a = Artifact::with_vectors("round_preserving", &[("x", n), ("phi", n), ("bound", 1), ("observed", 1), ("slack", 1)]);
        for p in &samples {
            a.rows.push([p.x.clone(), p.phi.clone(), vec![p.bound, p.observed, p.slack]].concat());
        }
        self.artifacts.push(a);
        let w = min_by_slack(&samples, |p| p.slack).ok_or_else(|| Error::Precondition("no samples".into()))?;
        Ok(Check::slack("round_preserving", w.bound, w.observed, w.slack, samples.len(), SLACK_TOLERANCE))
    }

    fn random_simplices(&self, tag: &str, count: usize) -> Vec<KuhnSimplex> {
        let mut rng = self.rng(tag);
        let lattice = self.ctx.evaluator.lattice();
        (0..count)
            .map(|_| locate(self.scenario.core_box().sample(&mut rng).as_slice(), lattice).simplex)
            .collect()
    }

    fn condition_iii(&mut self) -> Result<Check> {
        let b = &self.scenario.budgets;
        let k = b.condition_simplices.max(1);
        let per = b.condition_iii.div_ceil(k);
        let mut a = Artifact::new("condition_iii", &["simplex", "bound", "worst", "slack", "samples"]);
        let mut worst: Option<crate::simplexmap::ConditionReport> = None;
        let mut total = 0;
        for (i, s) in self.random_simplices("condition_iii", k).iter().enumerate() {
            let rep = self.ctx.evaluator.verify_condition_iii(&s.vertices(), per)?;
            a.rows.push(vec![i as f64, rep.bound, rep.worst, rep.slack, rep.samples as f64]);
            total += rep.samples;
            if worst.as_ref().is_none_or(|w| rep.slack < w.slack) {
                worst = Some(rep);
            }
        }
        self.artifacts.push(a);
        let w = worst.expect("at least one simplex");
        Ok(Check::slack("condition_iii", w.bound, w.worst, w.slack, total, SLACK_TOLERANCE))
    }

    fn face_consistency(&mut self) -> Result<Check> {
        let b = &self.scenario.budgets;
        let n = self.n();
        let mut rng = self.rng("face_facets");
        let pairs: Vec<_> = self
            .random_simplices("face_consistency", b.face_pairs)
            .into_iter()
            .map(|s| {
                let k = rng.random_range(0..=n);
                let t = s.facet_neighbor(k);
                (s, t)
            })
            .collect();
        let ev = &self.ctx.evaluator;
        let reps: Vec<_> = pairs
            .par_iter()
            .map(|(s, t)| ev.verify_face_consistency(s, t, b.face_points))
            .collect::<Result<_>>()?;
        let mut a = Artifact::new("face_consistency", &["pair", "max_discrepancy", "samples"]);
        for (i, r) in reps.iter().enumerate() {
            a.rows.push(vec![i as f64, r.max_discrepancy, r.samples as f64]);
        }
        self.artifacts.push(a);
        let worst = reps.iter().map(|r| r.max_discrepancy).fold(0.0, f64::max);
        Ok(Check::below("face_consistency", FACE_TOLERANCE, worst, reps.iter().map(|r| r.samples).sum()))
    }

    fn lower_bound(&mut self) -> Result<Check> {
        let s = self.scenario;
        let n = self.n();
        let radius = 3.0 * s.derived.r1;
        let mut rng = self.rng("lower_bound");
        let xs: Vec<DVector<f64>> = (0..s.budgets.lower_bound)
            .map(|_| {
                let d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
                let u: f64 = rng.random();
                d * (radius * u.powf(1.0 / n as f64))
            })
            .collect();
        let g = &self.ctx.glued;
        let samples: Vec<_> = xs.par_iter().map(|x| g.lower_bound(x.as_slice())).collect::<Result<_>>()?;
        let mut a = Artifact::with_vectors("lower_bound", &[("x", n), ("norm", 1), ("distance", 1), ("slack", 1)]);
        for p in &samples {
            a.rows.push([p.x.clone(), vec![p.norm, p.distance, p.slack]].concat());
        }
        self.artifacts.push(a);
        let w = min_by_slack(&samples, |p| p.slack).ok_or_else(|| Error::Precondition("no samples".into()))?;
        Ok(Check::slack("lower_bound", w.distance + s.derived.r0, w.norm, w.slack, samples.len(), SLACK_TOLERANCE))
    }

    /// Γ on a dyadic grid (exactly representable, so `−x` is exact and
    /// half-lattice ties occur).
    fn gamma(&mut self) {
        let s = self.scenario;
        let n = self.n();
        let lattice = *self.ctx.evaluator.lattice();
        let eps = lattice.epsilon();
        let mut rng = self.rng("gamma");
        let span = (s.core / eps * 64.0).ceil() as i64;
        let xs: Vec<Vec<f64>> = (0..s.budgets.gamma)
            .map(|_| (0..n).map(|_| rng.random_range(-span..=span) as f64 / 64.0 * eps).collect())
            .collect();
        let (mut worst, mut odd_failures, mut ties) = (0.0f64, 0usize, 0usize);
        for x in &xs {
            let r = gamma_checked(x, &lattice);
            let p = lattice.point(&r.index);
            worst = worst.max((p - DVector::from_column_slice(x)).norm());
            let neg: Vec<f64> = x.iter().map(|c| -c).collect();
            let back: Vec<i64> = gamma_checked(&neg, &lattice).index.iter().map(|k| -k).collect();
            odd_failures += usize::from(back != r.index);
            ties += r.ties;
        }
        let bound = eps * (n as f64).sqrt() / 2.0;
        self.checks.push(Check::slack("gamma_bound", bound, worst, bound - worst, xs.len(), 0.0));
        self.checks.push(Check::slack("gamma_oddness", 0.0, odd_failures as f64, -(odd_failures as f64), xs.len(), 0.0));
        self.checks.push(Check::slack("gamma_ties", 0.0, ties as f64, -(ties as f64), xs.len(), 0.0));
    }

    fn collapse(&mut self) -> Result<Check> {
        let s = self.scenario;
        let xs = uniform_in(&s.core_box(), s.budgets.collapse, &mut self.rng("collapse"));
        let g = &self.ctx.glued;
        let worst = xs
            .par_iter()
            .map(|x| Ok(g.phi(x.as_slice())?.chart_distance(&ChartPoint::new(x.clone())?)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(Check::slack("collapse", COLLAPSE_TOLERANCE, worst, COLLAPSE_TOLERANCE - worst, xs.len(), 0.0))
    }

    fn continuity(&mut self) -> Result<Check> {
        let s = self.scenario;
        let xs = uniform_in(&s.core_box(), s.budgets.continuity, &mut self.rng("continuity"));
        let g = &self.ctx.glued;
        let seed = self.seed;
        let worst = xs
            .par_iter()
            .enumerate()
            .map(|(i, x)| g.continuity_probe(x.as_slice(), CONTINUITY_STEP, 8, seed ^ i as u64))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(Check::below("continuity", CONTINUITY_TOLERANCE, worst, xs.len() * 8))
    }

    fn surjectivity(&mut self) -> Result<Check> {
        let s = self.scenario;
        let half = BoundingBox::symmetric(self.n(), s.core / 2.0)?;
        let ys = uniform_in(&half, s.budgets.surjectivity, &mut self.rng("surjectivity"));
        let g = &self.ctx.glued;
        let starts = 4 * (1..=self.n()).product::<usize>();
        let probes: Vec<_> = ys
            .par_iter()
            .map(|y| g.surjectivity_probe(&ChartPoint::new(y.clone())?, starts))
            .collect::<Result<_>>()?;
        let found = probes.iter().filter(|p| p.preimage.is_some()).count();
        let worst = probes.iter().map(|p| p.residual).fold(0.0, f64::max);
        let n = self.n();
        let mut a = Artifact::with_vectors("surjectivity", &[("y", n), ("residual", 1), ("found", 1)]);
        for p in &probes {
            a.rows.push([p.target.clone(), vec![p.residual, f64::from(u8::from(p.preimage.is_some()))]].concat());
        }
        self.artifacts.push(a);
        Ok(Check::below("surjectivity", SURJECTIVITY_TOLERANCE, worst, probes.len())
            .with_message(format!("{found}/{} preimages found", probes.len())))
    }

    fn net_check(&mut self) {
        let res = self.net_property();
        self.record("net_property", res);
    }

    fn net_property(&mut self) -> Result<Check> {
        let s = self.scenario;
        let ys = uniform_in(&s.core_box(), s.budgets.net_check, &mut self.rng("net_check"));
        let en = &self.ctx.net;
        let hits: Vec<_> = ys
            .par_iter()
            .map(|y| en.nearest_image(&ChartPoint::new(y.clone())?))
            .collect::<Result<_>>()?;
        let n = self.n();
        let mut a = Artifact::with_vectors("net_check", &[("y", n), ("net_point", n), ("distance", 1), ("evaluated", 1)]);
        for (y, h) in ys.iter().zip(&hits) {
            a.rows.push([y.as_slice(), h.point.coords.as_slice(), &[h.distance, h.evaluated as f64]].concat());
        }
        self.artifacts.push(a);
        let worst = hits.iter().map(|h| h.distance).fold(0.0, f64::max);
        Ok(Check::below("net_property", s.derived.delta_tilde, worst, hits.len()))
    }

    fn degree(&mut self) {
        let s = self.scenario;
        let r1 = s.derived.r1;
        for (label, r) in [("r1", r1), ("2r1", 2.0 * r1)] {
            let resolution = if self.n() == 2 { s.budgets.winding } else { s.budgets.icosphere };
            let seed = self.seed ^ fnv(label);
            match self.ctx.glued.degree(r, resolution, seed) {
                Ok(rep) => {
                    let d = rep.degree as f64;
                    let name = format!("degree_{label}");
                    let mut c = Check::slack(&name, 1.0, d, -(d - 1.0).abs(), rep.samples, 0.0)
                        .with_message(format!("raw degree {:.9}", rep.raw_degree));
                    c.pass = rep.degree == 1;
                    self.checks.push(c);
                    self.checks.push(Check::above(&format!("antipodal_gap_{label}"), ANTIPODAL_GAP, rep.min_antipodal_gap, rep.samples));
                    self.details.insert(format!("degree_{label}"), json!(rep));
                }
                Err(e) => {
                    self.checks.push(Check::error(&format!("degree_{label}"), &e));
                    self.checks.push(Check::error(&format!("antipodal_gap_{label}"), &e));
                }
            }
            let name = format!("antipodal_inequality_{label}");
            let res = self.ctx.glued.antipodal_check(r, s.budgets.antipodal).map(|rep| {
                let n = self.n();
                let mut a = Artifact::with_vectors(&format!("antipodal_{label}"), &[("v", n), ("angle", 1), ("radial_gap", 1), ("separation", 1)]);
                for p in &rep.samples {
                    a.rows.push([p.v.clone(), vec![p.angle, p.radial_gap, p.separation]].concat());
                }
                self.artifacts.push(a);
                Check::above(&name, 0.0, rep.min_inequality_slack, rep.samples.len())
                    .with_message(format!("min angle {:.6}", rep.min_angle))
            });
            self.record(&name, res);
        }
    }

    fn directions(&mut self) {
        let s = self.scenario;
        let params = DriftParams::standard(s.derived.r1);
        let en = self.ctx.net.clone();
        let base = match en.nu(&s.base) {
            Ok(b) => b.point,
            Err(e) => {
                self.checks.push(Check::error("direction_map", &e));
                return;
            }
        };
        match local_direction_map(&en, &base, s.budgets.direction_resolution, &params) {
            Ok(t) => {
                let n = self.n();
                let m = t.entries.len();
                let mut a = Artifact::with_vectors("directions", &[("v", n), ("w", n), ("oddness_defect", 1), ("trace_len", 1), ("final_gap", 1)]);
                for e in &t.entries {
                    a.rows.push([e.v.clone(), e.w.clone(), vec![e.oddness_defect, e.trace_len as f64, e.final_gap]].concat());
                }
                self.artifacts.push(a);
                self.checks.push(Check::below("direction_oddness", ODDNESS_TOLERANCE, t.max_oddness_defect, m));
                self.checks.push(Check::above("direction_separation", t.grid_spacing / 2.0, t.min_separation, m));
                let converged = t.entries.iter().filter(|e| e.converged).count();
                self.checks.push(
                    Check::below("direction_convergence", params.tol, t.max_final_gap, m)
                        .with_message(format!("{converged}/{m} traces converged")),
                );
                if s.is_flat_identity() {
                    let worst = t
                        .entries
                        .iter()
                        .map(|e| e.v.iter().zip(&e.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                        .fold(0.0, f64::max);
                    self.checks.push(Check::slack("direction_identity", IDENTITY_TOLERANCE, worst, IDENTITY_TOLERANCE - worst, m, 0.0));
                }
            }
            Err(e) => self.checks.push(Check::error("direction_map", &e)),
        }
        let (u, v) = (DVector::from_column_slice(&s.u), DVector::from_column_slice(&s.v));
        match injectivity_experiment(&en, &base, &u, &v, &params) {
            Ok(rep) => {
                let k = 1;
                self.checks.push(Check::below("injectivity_witness", rep.delta_tilde, rep.witness_distance, k));
                let off = (rep.base_to_witness - rep.horizon).abs();
                self.checks.push(
                    Check::below("injectivity_bracket", rep.delta_tilde, off, k)
                        .with_message(format!("|p - q| = {:.6}, T = {}", rep.base_to_witness, rep.horizon)),
                );
                self.checks.push(Check::below("injectivity_drift", 1.0 - rep.epsilon, rep.drift_alignment, k));
                self.checks.push(Check::above("injectivity_drift_radius", rep.horizon, rep.drift_radius, k));
                self.checks.push(Check::above("injectivity_separation", rep.delta_tilde, rep.segment_separation, k));
                self.details.insert("injectivity".into(), json!(rep));
            }
            Err(e) => self.checks.push(Check::error("injectivity_witness", &e)),
        }
    }
}

/// Loads and runs in one step; configuration problems surface as errors.
pub fn run_file(sub: Subcommand, path: &std::path::Path, opts: &RunOptions) -> Result<VerificationReport> {
    run(sub, &Scenario::load(path)?, opts)
}
