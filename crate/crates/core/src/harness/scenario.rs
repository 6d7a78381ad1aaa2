//! Scenario files: metric, net, embedding, lattice and sample budgets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::ConfigFile;
use crate::directions::separation_epsilon;
use crate::error::{Error, Result};
use crate::gluedmap::{constants, GluedMap};
use crate::manifold::{MetricField, SineTerm};
use crate::netlattice::{BoundingBox, EmbeddedNet, Embedding, Lattice, Net};
use crate::simplexmap::SimplexMapEvaluator;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MetricSpec {
    Flat,
    Linear { matrix: Vec<f64> },
    Sine {
        components: Vec<usize>,
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
    Conformal { linear: Vec<f64>, quadratic: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct NetSpec {
    pub epsilon_base: Option<f64>,
    pub delta: f64,
    pub jitter: f64,
    pub seed: u64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Budgets {
    pub audit_pairs: usize,
    pub oracle_pairs: usize,
    pub round_preserving: usize,
    pub condition_iii: usize,
    pub condition_simplices: usize,
    pub face_pairs: usize,
    pub face_points: usize,
    pub lower_bound: usize,
    pub gamma: usize,
    pub collapse: usize,
    pub continuity: usize,
    pub surjectivity: usize,
    pub net_check: usize,
    pub winding: usize,
    pub icosphere: usize,
    pub antipodal: usize,
    pub direction_resolution: usize,
}

/// Quantities derived from the scenario parameters, echoed in every report.
#[derive(Clone, Debug, Serialize)]
pub struct Derived {
    pub delta_tilde: f64,
    pub r0: f64,
    pub r1: f64,
    pub direction_epsilon: f64,
    pub horizon: f64,
    pub required_half_width: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub metric: MetricSpec,
    pub net: NetSpec,
    pub embedding: String,
    pub embedding_file: Option<PathBuf>,
    pub lattice_epsilon: f64,
    pub core: f64,
    pub audit_lo: Vec<f64>,
    pub audit_hi: Vec<f64>,
    pub seed: u64,
    pub budgets: Budgets,
    pub base: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub audit_threshold: f64,
    pub output: Option<PathBuf>,
    pub derived: Derived,
}

/// Runtime objects built from a scenario.
#[derive(Clone, Debug)]
pub struct Context {
    pub net: Arc<EmbeddedNet>,
    pub evaluator: Arc<SimplexMapEvaluator>,
    pub glued: Arc<GluedMap>,
}

fn box_from(values: &[f64], n: usize, key: &str, errors: &mut Vec<String>) -> Option<(Vec<f64>, Vec<f64>)> {
    match values.len() {
        1 if values[0] > 0.0 => Some((vec![-values[0]; n], vec![values[0]; n])),
        2 if values[0] < values[1] => Some((vec![values[0]; n], vec![values[1]; n])),
        m if m == 2 * n && (0..n).all(|i| values[i] < values[n + i]) => {
            Some((values[..n].to_vec(), values[n..].to_vec()))
        }
        _ => {
            errors.push(format!(
                "`{key}` must be a half-width, a `lo, hi` pair or {} bounds with lo < hi",
                2 * n
            ));
            None
        }
    }
}

fn unit(values: Option<Vec<f64>>, default: Vec<f64>, key: &str, n: usize, errors: &mut Vec<String>) -> Vec<f64> {
    let v = values.unwrap_or(default);
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if v.len() != n || !(norm > 0.0) {
        errors.push(format!("`{key}` must be a nonzero vector with {n} entries"));
        return vec![0.0; n];
    }
    v.iter().map(|c| c / norm).collect()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_string();
        Self::parse(&text, &stem, &base_dir)
    }

    /// Parses and validates; every problem found is listed in one
    /// configuration error.
    pub fn parse(text: &str, default_name: &str, base_dir: &Path) -> Result<Scenario> {
        let cfg: ConfigFile = text.parse()?;
        let mut errors = Vec::new();
        let e = &mut errors;
        let name = cfg.string("scenario.name").unwrap_or_else(|| default_name.to_string());
        let n: usize = cfg.require("scenario.dimension", e).unwrap_or(2);
        if !(2..=3).contains(&n) {
            e.push(format!("`scenario.dimension` must be 2 or 3, got {n}"));
        }
        let resolve = |p: String| -> PathBuf {
            let p = PathBuf::from(p);
            if p.is_absolute() { p } else { base_dir.join(p) }
        };

        let family = cfg.string("metric.family").unwrap_or_else(|| {
            e.push("missing required key `metric.family`".into());
            "flat".into()
        });
        let metric = match family.as_str() {
            "flat" => MetricSpec::Flat,
            "linear" => MetricSpec::Linear {
                matrix: cfg.array("metric.matrix", e).unwrap_or_else(|| {
                    e.push("missing required key `metric.matrix`".into());
                    Vec::new()
                }),
            },
            "sine" => {
                let components: Vec<usize> = cfg.array("metric.components", e).unwrap_or_default();
                let k = components.len();
                let amplitudes = cfg.array("metric.amplitudes", e).unwrap_or_default();
                let frequencies = cfg.array("metric.frequencies", e).unwrap_or_default();
                let phases = cfg.array("metric.phases", e).unwrap_or_else(|| vec![0.0; k]);
                if k == 0 || amplitudes.len() != k || phases.len() != k || frequencies.len() != k * n {
                    e.push(format!(
                        "sine metric needs matching `components`, `amplitudes`, `phases` and {n} `frequencies` per term"
                    ));
                }
                MetricSpec::Sine { components, amplitudes, frequencies, phases }
            }
            "conformal" => MetricSpec::Conformal {
                linear: cfg.array("metric.linear", e).unwrap_or_else(|| vec![0.0; n]),
                quadratic: cfg.get_or("metric.quadratic", 0.0, e),
            },
            other => {
                e.push(format!("unknown metric family `{other}` (flat, linear, sine, conformal)"));
                MetricSpec::Flat
            }
        };

        let embedding = cfg.string("embedding.mode").unwrap_or_else(|| "identity".into());
        if !["identity", "pullback", "table"].contains(&embedding.as_str()) {
            e.push(format!("unknown embedding mode `{embedding}` (identity, pullback, table)"));
        }
        let embedding_file = cfg.string("embedding.file").map(resolve);
        if embedding == "table" && embedding_file.is_none() {
            e.push("table embedding needs `embedding.file`".into());
        }
        let net_file = cfg.string("net.file").map(resolve);
        let listed = net_file.is_some() || embedding == "table";
        let epsilon_base: Option<f64> = if listed {
            cfg.get("net.epsilon_base", e)
        } else {
            cfg.require("net.epsilon_base", e)
        };
        let file_delta = match (&net_file, &embedding_file) {
            (_, Some(f)) if embedding == "table" => header_delta(f, e),
            (Some(f), _) => header_delta(f, e),
            _ => None,
        };
        let delta: f64 = match file_delta {
            Some(d) => cfg.get("net.delta", e).unwrap_or(d),
            None => cfg.require("net.delta", e).unwrap_or(f64::NAN),
        };
        let jitter: f64 = cfg.get_or("net.jitter", 0.0, e);
        let net_seed: u64 = cfg.get_or("net.seed", 0, e);
        let (lo, hi) = cfg
            .array::<f64>("net.box", e)
            .and_then(|b| box_from(&b, n, "net.box", e))
            .unwrap_or_else(|| {
                e.push("missing required key `net.box`".into());
                (vec![-1.0; n], vec![1.0; n])
            });

        let lattice_epsilon: f64 = cfg.require("lattice.epsilon", e).unwrap_or(f64::NAN);
        if !(lattice_epsilon > 0.0) {
            e.push(format!("`lattice.epsilon` must be positive, got {lattice_epsilon}"));
        }
        if !(delta > 0.0) {
            e.push(format!("`net.delta` must be positive, got {delta}"));
        }
        if let Some(eb) = epsilon_base.filter(|_| !listed) {
            let covering = eb * (n as f64).sqrt() / 2.0;
            if !(covering + jitter < delta) {
                e.push(format!(
                    "epsilon_base*sqrt(n)/2 + jitter < delta fails: {covering:.6} + {jitter} >= {delta}"
                ));
            }
        }

        let core: f64 = cfg.get_or("samples.core", 10.0, e);
        let seed: u64 = cfg.get_or("samples.seed", 0, e);
        let (audit_lo, audit_hi) = cfg
            .array::<f64>("samples.audit_region", e)
            .and_then(|b| box_from(&b, n, "samples.audit_region", e))
            .unwrap_or_else(|| (vec![-core.min(4.0); n], vec![core.min(4.0); n]));
        let budgets = Budgets {
            audit_pairs: cfg.get_or("samples.audit_pairs", 1000, e),
            oracle_pairs: cfg.get_or("samples.oracle_pairs", 1000, e),
            round_preserving: cfg.get_or("samples.round_preserving", 10_000, e),
            condition_iii: cfg.get_or("samples.condition_iii", 1000, e),
            condition_simplices: cfg.get_or("samples.condition_simplices", 4, e),
            face_pairs: cfg.get_or("samples.face_pairs", 100, e),
            face_points: cfg.get_or("samples.face_points", 50, e),
            lower_bound: cfg.get_or("samples.lower_bound", 1000, e),
            gamma: cfg.get_or("samples.gamma", 100_000, e),
            collapse: cfg.get_or("samples.collapse", 10_000, e),
            continuity: cfg.get_or("samples.continuity", 20, e),
            surjectivity: cfg.get_or("samples.surjectivity", 20, e),
            net_check: cfg.get_or("samples.net_check", 1000, e),
            winding: cfg.get_or("samples.winding", 10_000, e),
            icosphere: cfg.get_or("samples.icosphere", 4, e),
            antipodal: cfg.get_or("samples.antipodal", 500, e),
            direction_resolution: cfg.get_or("samples.direction_resolution", if n == 2 { 16 } else { 1 }, e),
        };
        if n == 2 && budgets.direction_resolution < 8 {
            e.push("`samples.direction_resolution` must be at least 8 for n = 2".into());
        }
        if n == 3 && budgets.direction_resolution < 1 {
            e.push("`samples.direction_resolution` must be at least 1 (42 directions) for n = 3".into());
        }

        let axis = |i: usize| -> Vec<f64> {
            let mut a = vec![0.0; n];
            a[i.min(n - 1)] = 1.0;
            a
        };
        let (du, dv) = (axis(0), axis(1));
        let base: Vec<f64> = cfg.array("directions.base", e).unwrap_or_else(|| vec![0.0; n]);
        if base.len() != n {
            e.push(format!("`directions.base` must have {n} entries"));
        }
        let u = unit(cfg.array("directions.u", e), du, "directions.u", n, e);
        let v = unit(cfg.array("directions.v", e), dv, "directions.v", n, e);
        let audit_threshold: f64 = cfg.get_or("thresholds.audit", 1e-6, e);
        let output = cfg.string("output.dir").map(resolve);
        errors.extend(cfg.unknown_keys());

        let dn = DVector::from_column_slice;
        let (direction_epsilon, horizon) = match separation_epsilon(&dn(&u), &dn(&v)) {
            Ok((eps, _)) => (eps, 6.0 * 2.0 * delta * n as f64 / eps),
            Err(err) => {
                errors.push(format!("directions: {err}"));
                (f64::NAN, f64::NAN)
            }
        };
        let c = constants(n, lattice_epsilon, delta);
        let lattice_diag = lattice_epsilon * (n as f64).sqrt();
        let required_half_width = core.max(2.0 * c.r1) + c.r1.max(horizon) + lattice_diag;
        let half = (0..n).map(|i| (-lo[i]).min(hi[i])).fold(f64::INFINITY, f64::min);
        if !(half >= required_half_width) {
            errors.push(format!(
                "net box reaches only {half} around the origin; core {core} needs max(core, 2 R1) + max(R1, T) + eps*sqrt(n) = {required_half_width:.4}"
            ));
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        Ok(Scenario {
            name,
            dim: n,
            metric,
            net: NetSpec { epsilon_base, delta, jitter, seed: net_seed, lo, hi, file: net_file },
            embedding,
            embedding_file,
            lattice_epsilon,
            core,
            audit_lo,
            audit_hi,
            seed,
            budgets,
            base,
            u,
            v,
            audit_threshold,
            output,
            derived: Derived {
                delta_tilde: 2.0 * delta * n as f64,
                r0: c.r0,
                r1: c.r1,
                direction_epsilon,
                horizon,
                required_half_width,
            },
        })
    }

    pub fn metric_field(&self) -> Result<MetricField> {
        let n = self.dim;
        match &self.metric {
            MetricSpec::Flat => MetricField::flat(n),
            MetricSpec::Linear { matrix } => {
                if matrix.len() != n * n {
                    return Err(Error::config(format!("`metric.matrix` needs {} entries", n * n)));
                }
                MetricField::linear_pullback(DMatrix::from_row_slice(n, n, matrix))
            }
            MetricSpec::Sine { components, amplitudes, frequencies, phases } => {
                let terms = (0..components.len())
                    .map(|k| SineTerm {
                        component: components[k],
                        amplitude: amplitudes[k],
                        frequency: frequencies[k * n..(k + 1) * n].to_vec(),
                        phase: phases[k],
                    })
                    .collect();
                MetricField::nonlinear_pullback(n, terms)
            }
            MetricSpec::Conformal { linear, quadratic } => {
                if linear.len() != n {
                    return Err(Error::config(format!("`metric.linear` needs {n} entries")));
                }
                MetricField::conformal(DVector::from_column_slice(linear), *quadratic)
            }
        }
    }

    pub fn net_box(&self) -> BoundingBox {
        BoundingBox::new(self.net.lo.clone(), self.net.hi.clone()).expect("validated at load")
    }

    pub fn core_box(&self) -> BoundingBox {
        BoundingBox::symmetric(self.dim, self.core).expect("validated at load")
    }

    pub fn audit_box(&self) -> BoundingBox {
        BoundingBox::new(self.audit_lo.clone(), self.audit_hi.clone()).expect("validated at load")
    }

    pub fn is_flat_identity(&self) -> bool {
        matches!(self.metric, MetricSpec::Flat)
            && self.embedding == "identity"
            && self.net.jitter == 0.0
            && self.net.file.is_none()
            && self.net.epsilon_base.is_some_and(|eb| {
                let k = self.lattice_epsilon / eb;
                (k - k.round()).abs() < 1e-12 && k >= 1.0
            })
    }

    pub fn build(&self) -> Result<Context> {
        let metric = Arc::new(self.metric_field()?);
        let region = self.net_box();
        let (net, embedding) = match (self.embedding.as_str(), &self.embedding_file, &self.net.file) {
            ("table", Some(f), _) => Embedding::load_table(f, Some(region))?,
            (mode, _, file) => {
                let net = match file {
                    Some(f) => Net::load(f, Some(region))?,
                    None => Net::generate(
                        self.net.epsilon_base.unwrap_or(f64::NAN),
                        self.net.delta,
                        self.net.jitter,
                        self.net.seed,
                        region,
                    )?,
                };
                (net, if mode == "pullback" { Embedding::Pullback } else { Embedding::Identity })
            }
        };
        let en = Arc::new(EmbeddedNet::new(metric, Arc::new(net), embedding)?);
        let evaluator = Arc::new(SimplexMapEvaluator::new(en.clone(), Lattice::new(self.lattice_epsilon)?));
        let glued = Arc::new(GluedMap::new(evaluator.clone())?);
        Ok(Context { net: en, evaluator, glued })
    }
}

fn header_delta(path: &Path, errors: &mut Vec<String>) -> Option<f64> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(err) => {
            errors.push(format!("cannot read {}: {err}", path.display()));
            return None;
        }
    };
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    let d = first.split_whitespace().nth(1)?.parse().ok();
    if d.is_none() {
        errors.push(format!("{}: header must be `n delta`", path.display()));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = "[scenario]\ndimension = 2\n[metric]\nfamily = flat\n[net]\nepsilon_base = 1\ndelta = 0.75\njitter = 0\nbox = 1000\n[lattice]\nepsilon = 1\n";

    fn parse(text: &str) -> Result<Scenario> {
        Scenario::parse(text, "t", Path::new("."))
    }

    #[test]
    fn flat_identity_is_valid() {
        let s = parse(FLAT).unwrap();
        assert!(s.is_flat_identity());
        assert_eq!(s.derived.delta_tilde, 3.0);
        assert_eq!(s.derived.direction_epsilon, 0.25);
        assert!((s.derived.horizon - 72.0).abs() < 1e-12);
        assert!((s.derived.r1 - (2.0 * 2.5 * 2.0 + 2.5 * 2f64.sqrt() + 5.25)).abs() < 1e-12);
    }

    #[test]
    fn covering_inequality_rejected() {
        let err = parse(&FLAT.replace("delta = 0.75", "delta = 0.7")).unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert!(list.iter().any(|m| m.contains("epsilon_base*sqrt(n)/2 + jitter < delta")));
        let err = parse(&FLAT.replace("jitter = 0", "jitter = 0.1")).unwrap_err();
        assert!(err.to_string().contains("jitter < delta"));
    }

    #[test]
    fn missing_delta_named() {
        let err = parse(&FLAT.replace("delta = 0.75\n", "")).unwrap_err();
        assert!(err.to_string().contains("`net.delta`"), "{err}");
    }

    #[test]
    fn problems_are_listed_together() {
        let text = FLAT.replace("box = 1000", "box = 20").replace("[lattice]", "bogus = 1\n[lattice]");
        let Error::Config(list) = parse(&text).unwrap_err() else { panic!() };
        assert_eq!(list.len(), 2, "{list:?}");
        assert!(list.iter().any(|m| m.contains("unknown key `net.bogus`")));
        assert!(list.iter().any(|m| m.contains("net box reaches only 20")));
    }
}
