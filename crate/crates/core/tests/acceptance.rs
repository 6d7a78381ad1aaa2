//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero if any fails.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use netembed::harness::{run, RunOptions, Scenario, Subcommand, VerificationReport};
use netembed::netlattice::{gamma_checked, Lattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VALID: [&str; 4] = ["flat2", "shear2", "sine2", "sine3"];

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

struct Runs {
    cache: HashMap<(String, Subcommand), (VerificationReport, f64)>,
}

impl Runs {
    /// Report and wall seconds; each (scenario, subcommand) runs once.
    fn get(&mut self, name: &str, sub: Subcommand) -> Result<(&VerificationReport, f64), String> {
        let key = (name.to_string(), sub);
        if !self.cache.contains_key(&key) {
            let scenario = Scenario::load(&scenario_path(name)).map_err(|e| format!("{name}: {e}"))?;
            let t = Instant::now();
            let report = run(sub, &scenario, &RunOptions { seed: None, timing: true }).map_err(|e| format!("{name} {sub}: {e}"))?;
            self.cache.insert(key.clone(), (report, t.elapsed().as_secs_f64()));
        }
        let (r, s) = &self.cache[&key];
        Ok((r, *s))
    }
}

type Criterion = Box<dyn Fn(&mut Runs) -> Result<Verdict, String>>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(failures: Vec<String>, ok: String) -> Verdict {
    if failures.is_empty() {
        Verdict { pass: true, detail: ok }
    } else {
        Verdict { pass: false, detail: failures.join("; ") }
    }
}

fn field(r: &VerificationReport, check: &str) -> Result<(f64, f64, usize), String> {
    let c = r.check(check).ok_or_else(|| format!("{} has no `{check}` check", r.scenario.name))?;
    match (c.worst, c.slack) {
        (Some(w), Some(s)) => Ok((w, s, c.samples)),
        _ => Err(format!(
            "{} `{check}` {}: {}",
            r.scenario.name,
            c.status.as_str(),
            c.message.clone().unwrap_or_default()
        )),
    }
}

fn oracle(runs: &mut Runs) -> Result<Verdict, String> {
    let mut fails = Vec::new();
    let mut secs = 0.0;
    let mut worst = 0.0f64;
    for name in ["shear2", "sine2"] {
        let (r, t) = runs.get(name, Subcommand::Audit)?;
        secs += t;
        let (w, _, k) = field(r, "oracle")?;
        worst = worst.max(w);
        if w >= 1e-6 || k < 1000 {
            fails.push(format!("{name}: relative error {w:.3e} over {k} pairs"));
        }
    }
    if secs >= 30.0 {
        fails.push(format!("runtime {secs:.1} s"));
    }
    Ok(verdict(fails, format!("max relative error {worst:.2e}, {secs:.1} s")))
}

fn collapse(runs: &mut Runs) -> Result<Verdict, String> {
    let t = Instant::now();
    let scenario = Scenario::load(&scenario_path("flat2")).map_err(|e| e.to_string())?;
    let (r, _) = runs.get("flat2", Subcommand::PhiVerify)?;
    let (worst, _, k) = field(r, "collapse")?;
    let ctx = scenario.build().map_err(|e| e.to_string())?;
    let d = ctx.glued.degree(20.0, 10_000, 1).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64() + runs.get("flat2", Subcommand::PhiVerify)?.1;
    let gap_err = (d.min_antipodal_gap - std::f64::consts::PI).abs();
    let mut fails = Vec::new();
    if worst > 1e-9 || k < 10_000 {
        fails.push(format!("|Φ(x) − x| = {worst:.3e} over {k}"));
    }
    if d.degree != 1 {
        fails.push(format!("degree {}", d.degree));
    }
    if gap_err > 1e-6 {
        fails.push(format!("antipodal gap off π by {gap_err:.3e}"));
    }
    if secs >= 10.0 {
        fails.push(format!("runtime {secs:.1} s"));
    }
    Ok(verdict(fails, format!("max |Φ(x) − x| {worst:.1e}, degree {}, gap error {gap_err:.1e}, {secs:.1} s", d.degree)))
}

fn slack_over_valid(runs: &mut Runs, check: &str, min_samples: usize, limit: Option<f64>) -> Result<Verdict, String> {
    let mut fails = Vec::new();
    let mut secs = 0.0;
    let mut least = f64::INFINITY;
    for name in VALID {
        let (r, t) = runs.get(name, Subcommand::PhiVerify)?;
        secs += t;
        let (_, s, k) = field(r, check)?;
        least = least.min(s);
        if s < -1e-7 || k < min_samples {
            fails.push(format!("{name}: slack {s:.3e} over {k}"));
        }
    }
    if let Some(l) = limit.filter(|l| secs >= *l) {
        fails.push(format!("runtime {secs:.1} s over {l} s"));
    }
    Ok(verdict(fails, format!("least slack {least:.2e}, phi-verify total {secs:.1} s")))
}

fn faces(runs: &mut Runs) -> Result<Verdict, String> {
    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    for name in VALID {
        let (r, _) = runs.get(name, Subcommand::PhiVerify)?;
        let (w, _, k) = field(r, "face_consistency")?;
        worst = worst.max(w);
        if w >= 1e-6 || k < 100 * 50 {
            fails.push(format!("{name}: discrepancy {w:.3e} over {k}"));
        }
    }
    Ok(verdict(fails, format!("max discrepancy {worst:.1e}")))
}

fn gamma_properties() -> Result<Verdict, String> {
    let t = Instant::now();
    let mut fails = Vec::new();
    let lattice = Lattice::new(0.5).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_slack = f64::INFINITY;
    for n in [2usize, 3] {
        let bound = lattice.epsilon() * (n as f64).sqrt() / 2.0;
        let (mut odd, mut ties) = (0usize, 0usize);
        for i in 0..100_000 {
            // Every fourth point sits on the half-lattice, where ties could arise.
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    if i % 4 == 0 {
                        rng.random_range(-400i64..=400) as f64 * 0.25
                    } else {
                        rng.random_range(-100.0..100.0)
                    }
                })
                .collect();
            let r = gamma_checked(&x, &lattice);
            let p = lattice.point(&r.index);
            let err = x.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst_slack = worst_slack.min(bound - err);
            let neg: Vec<f64> = x.iter().map(|c| -c).collect();
            let back: Vec<i64> = gamma_checked(&neg, &lattice).index.iter().map(|k| -k).collect();
            odd += usize::from(back != r.index);
            ties += r.ties;
        }
        if odd > 0 || ties > 0 {
            fails.push(format!("n = {n}: {odd} oddness failures, {ties} ties"));
        }
    }
    if worst_slack < 0.0 {
        fails.push(format!("bound exceeded by {:.3e}", -worst_slack));
    }
    let secs = t.elapsed().as_secs_f64();
    if secs >= 5.0 {
        fails.push(format!("runtime {secs:.1} s"));
    }
    Ok(verdict(fails, format!("least bound slack {worst_slack:.2e}, {secs:.2} s")))
}

fn net_property(runs: &mut Runs) -> Result<Verdict, String> {
    let mut fails = Vec::new();
    let mut secs = 0.0;
    let mut margins = Vec::new();
    for name in ["sine2", "sine3"] {
        let (r, t) = runs.get(name, Subcommand::NetCheck)?;
        secs += t;
        let (_, margin, k) = field(r, "net_property")?;
        margins.push(format!("{name} {margin:.3}"));
        if margin <= 0.0 || k < 1000 {
            fails.push(format!("{name}: margin {margin:.3e} over {k}"));
        }
    }
    if secs >= 600.0 {
        fails.push(format!("runtime {secs:.1} s"));
    }
    Ok(verdict(fails, format!("margins {}, {secs:.1} s", margins.join(", "))))
}

fn degree(runs: &mut Runs) -> Result<Verdict, String> {
    let mut fails = Vec::new();
    let mut least_gap = f64::INFINITY;
    for name in VALID {
        let (r, _) = runs.get(name, Subcommand::Degree)?;
        for radius in ["r1", "2r1"] {
            let (d, _, _) = field(r, &format!("degree_{radius}"))?;
            let (gap, _, _) = field(r, &format!("antipodal_gap_{radius}"))?;
            least_gap = least_gap.min(gap);
            if d != 1.0 || gap <= 0.1 {
                fails.push(format!("{name} at {radius}: degree {d}, gap {gap:.3}"));
            }
        }
    }
    Ok(verdict(fails, format!("degree 1 everywhere, least antipodal gap {least_gap:.3} rad")))
}

fn directions(runs: &mut Runs) -> Result<Verdict, String> {
    let mut fails = Vec::new();
    let mut worst_odd = 0.0f64;
    for name in VALID {
        let (r, _) = runs.get(name, Subcommand::Directions)?;
        let (odd, _, _) = field(r, "direction_oddness")?;
        worst_odd = worst_odd.max(odd);
        if odd >= 1e-3 {
            fails.push(format!("{name}: oddness defect {odd:.3e}"));
        }
        let sep = r.check("direction_separation").ok_or("missing direction_separation")?;
        if !sep.pass {
            fails.push(format!("{name}: separation {:?} vs {:?}", sep.worst, sep.bound));
        }
    }
    let (r, _) = runs.get("flat2", Subcommand::Directions)?;
    let (id, _, _) = field(r, "direction_identity")?;
    if id > 1e-9 {
        fails.push(format!("flat w(v) − v = {id:.3e}"));
    }
    Ok(verdict(fails, format!("max oddness defect {worst_odd:.1e}, flat identity error {id:.1e}")))
}

fn injectivity(runs: &mut Runs) -> Result<Verdict, String> {
    let (r, _) = runs.get("flat2", Subcommand::Directions)?;
    let d = r.details.get("injectivity").ok_or("no injectivity details")?;
    let num = |k: &str| d[k].as_f64().ok_or(format!("missing `{k}`"));
    let (eps, dt, horizon) = (num("epsilon")?, num("delta_tilde")?, num("horizon")?);
    let (witness, pq) = (num("witness_distance")?, num("base_to_witness")?);
    let mut fails = Vec::new();
    if eps != 0.25 || dt != 3.0 || (horizon - 72.0).abs() > 1e-12 {
        fails.push(format!("ε = {eps}, δ̃ = {dt}, T = {horizon}"));
    }
    if witness >= 3.0 {
        fails.push(format!("d(q, γ(T)) = {witness}"));
    }
    if !(69.0 < pq && pq < 75.0) {
        fails.push(format!("|p − q| = {pq}"));
    }
    Ok(verdict(fails, format!("ε = {eps}, δ̃ = {dt}, T = {horizon}, d(q, γ(T)) = {witness:.1e}, |p − q| = {pq:.3}")))
}

fn negative_control() -> Result<Verdict, String> {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_netembed"))
        .args(["audit", "--no-timing", "--config"])
        .arg(scenario_path("conformal2"))
        .arg("--out")
        .arg(out.path())
        .output()
        .map_err(|e| e.to_string())?;
    let json = std::fs::read_to_string(out.path().join("conformal2_audit.json")).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let distortion = v["checks"]
        .as_array()
        .and_then(|cs| cs.iter().find(|c| c["name"] == "distortion"))
        .ok_or("no distortion check")?;
    let worst = distortion["worst"].as_f64().unwrap_or(f64::NAN);
    let bound = distortion["bound"].as_f64().unwrap_or(f64::NAN);
    let mut fails = Vec::new();
    if worst.is_nan() || worst <= bound {
        fails.push(format!("distortion {worst} within {bound}"));
    }
    if v["hypothesis_violated"] != true {
        fails.push("hypothesis violation not marked".into());
    }
    let code = status.status.code();
    if code == Some(0) {
        fails.push("exit status 0".into());
    }
    Ok(verdict(fails, format!("distortion {worst:.3} > {bound:.0e}, exit {code:?}")))
}

fn main() -> ExitCode {
    let mut runs = Runs { cache: HashMap::new() };
    let criteria: Vec<(&str, Criterion)> = vec![
        ("oracle equivalence", Box::new(oracle)),
        ("flat-identity collapse", Box::new(collapse)),
        ("round-preserving bound", Box::new(|r| slack_over_valid(r, "round_preserving", 10_000, Some(300.0)))),
        ("condition (iii)", Box::new(|r| slack_over_valid(r, "condition_iii", 1000, None))),
        ("face consistency", Box::new(faces)),
        ("lattice rounding", Box::new(|_| gamma_properties())),
        ("net property", Box::new(net_property)),
        ("degree and antipodes", Box::new(degree)),
        ("direction map", Box::new(directions)),
        ("injectivity experiment", Box::new(injectivity)),
        ("negative control", Box::new(|_| negative_control())),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let v = f(&mut runs).unwrap_or_else(|e| Verdict { pass: false, detail: format!("error: {e}") });
        failed += usize::from(!v.pass);
        println!("criterion {:>2} {} {title}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
