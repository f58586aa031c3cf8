//! Experiment driver shared by the command-line tool and the test suites.

use std::fmt;
use std::str::FromStr;

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::k2k3::{DfVariant, Family, RuleTable};
use crate::ks::{verify_potential, PotentialLp, Synthesis, VerificationReport};
use crate::model::{universe, Configuration, Page};
use crate::oracle::{opt_cost, opt_cost_classical, WorkFunction};
use crate::scalar::{exact_string, Scalar};
use crate::simulate::{monte_carlo, DistributionalRun, RequestSequence};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Verify,
    Synthesize,
    Simulate,
    Exact,
    Enumerate,
    Opt,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::parse(s, "expected json or csv")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Generator {
    #[default]
    Uniform,
    Cyclic,
    Nemesis,
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Generator::Uniform),
            "cyclic" => Ok(Generator::Cyclic),
            "nemesis" => Ok(Generator::Nemesis),
            _ => Err(Error::parse(s, "expected uniform, cyclic or nemesis")),
        }
    }
}

/// Which potential table `verify` checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PotentialChoice {
    #[default]
    Certified,
    Printed,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub algorithm: Family,
    pub mode: Mode,
    pub pages: u32,
    pub length: usize,
    pub trials: u64,
    pub seed: u64,
    pub ratio: Option<Rational>,
    pub format: Format,
    pub sequence: Option<RequestSequence>,
    pub generator: Generator,
    pub potential: PotentialChoice,
    pub df: DfVariant,
}

impl ExperimentConfig {
    pub fn new(algorithm: Family, mode: Mode) -> Self {
        let (pages, length) = match algorithm {
            Family::K2 => (3, 12),
            Family::K3 => (5, 8),
        };
        ExperimentConfig {
            algorithm,
            mode,
            pages,
            length,
            trials: 1000,
            seed: 0,
            ratio: None,
            format: Format::Json,
            sequence: None,
            generator: Generator::Uniform,
            potential: PotentialChoice::Certified,
            df: DfVariant::NewPage,
        }
    }

    pub fn rules(&self) -> RuleTable {
        match self.algorithm {
            Family::K2 => RuleTable::k2(),
            Family::K3 => RuleTable::k3_with(self.df),
        }
    }

    /// The first `k` pages of the universe.
    pub fn initial(&self) -> Configuration {
        Configuration::new(universe(self.algorithm.k() as u32)).expect("distinct pages")
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.algorithm.k() as u32;
        let needs_pages = matches!(self.mode, Mode::Simulate | Mode::Exact | Mode::Enumerate | Mode::Opt)
            && self.sequence.is_none();
        if needs_pages && self.pages < k + 1 {
            return Err(Error::input(format!("--pages must be at least {} for {}", k + 1, self.algorithm)));
        }
        if self.mode == Mode::Simulate && self.trials == 0 {
            return Err(Error::input("--trials must be at least 1"));
        }
        if let Some(r) = &self.ratio {
            if !r.is_positive() {
                return Err(Error::input("--ratio must be positive"));
            }
        }
        Ok(())
    }

    fn sequence(&self) -> RequestSequence {
        self.sequence.clone().unwrap_or_else(|| {
            generate_sequence(self.generator, &self.rules(), self.pages, self.length, self.seed)
        })
    }
}

/// A request sequence over pages `0..pages`. `Cyclic` walks the first `k+1`
/// pages round-robin; `Nemesis` asks for the least likely cached page of the
/// distributional run (lowest page on ties).
pub fn generate_sequence(kind: Generator, rules: &RuleTable, pages: u32, length: usize, seed: u64) -> RequestSequence {
    let k = rules.k() as u32;
    match kind {
        Generator::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            RequestSequence::new((0..length).map(|_| Page(rng.gen_range(0..pages))).collect())
        }
        Generator::Cyclic => {
            let n = (k + 1).min(pages);
            RequestSequence::new((0..length).map(|t| Page(t as u32 % n)).collect())
        }
        Generator::Nemesis => {
            let initial = Configuration::new(universe(k)).expect("distinct pages");
            let mut run = DistributionalRun::start(rules, &initial).expect("k-page initial cache");
            let mut seq = RequestSequence::default();
            for _ in 0..length {
                let r = universe(pages)
                    .into_iter()
                    .map(|p| (run.page_probability(p), p))
                    .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)))
                    .expect("non-empty universe")
                    .1;
                run.step(rules, r);
                seq.push(r);
            }
            seq
        }
    }
}

/// Worst case of `E(cost) − C·opt` over every sequence up to a length.
#[derive(Clone, Debug, PartialEq)]
pub struct Enumeration {
    pub sequences: u64,
    pub max_excess: Rational,
    pub worst: RequestSequence,
}

impl Enumeration {
    fn better(self, other: Enumeration) -> Enumeration {
        let sequences = self.sequences + other.sequences;
        let pick_other = other.max_excess > self.max_excess
            || (other.max_excess == self.max_excess && other.worst.requests() < self.worst.requests());
        let best = if pick_other { other } else { self };
        Enumeration { sequences, ..best }
    }
}

/// Visits every sequence of length `0..=length` over `pages` pages from the
/// class-`A` start on the first `k` pages.
pub fn enumerate(rules: &RuleTable, pages: u32, length: usize, ratio: &Rational) -> Enumeration {
    let initial = Configuration::new(universe(rules.k() as u32)).expect("distinct pages");
    let run = DistributionalRun::start(rules, &initial).expect("k-page initial cache");
    let wf = WorkFunction::with_pages(&initial, &universe(pages));
    let node = Node {
        run,
        wf,
        seq: RequestSequence::default(),
    };
    visit(rules, &universe(pages), length, ratio, node)
}

struct Node {
    run: DistributionalRun,
    wf: WorkFunction,
    seq: RequestSequence,
}

fn visit(rules: &RuleTable, pages: &[Page], left: usize, ratio: &Rational, node: Node) -> Enumeration {
    let excess = node.run.expected_cost.clone() - ratio.clone() * Rational::from_count(node.wf.min());
    let here = Enumeration {
        sequences: 1,
        max_excess: excess,
        worst: node.seq.clone(),
    };
    if left == 0 {
        return here;
    }
    let child = |&r: &Page| {
        let mut seq = node.seq.clone();
        seq.push(r);
        let mut wf = node.wf.clone();
        wf.step(r);
        let next = Node {
            run: node.run.clone().stepped(rules, r),
            wf,
            seq,
        };
        visit(rules, pages, left - 1, ratio, next)
    };
    // Parallel near the root only; results are folded in page order.
    let children: Vec<Enumeration> = if node.seq.len() < 2 {
        pages.par_iter().map(child).collect()
    } else {
        pages.iter().map(child).collect()
    };
    children.into_iter().fold(here, Enumeration::better)
}

/// An exact scalar as `{"exact": "p/q", "approx": f64}`.
pub fn num(q: &Rational) -> Value {
    json!({ "exact": exact_string(q), "approx": q.approx() })
}

/// Outcome of [`run`]: a pass flag plus JSON and CSV renderings.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub pass: bool,
    pub json: Value,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
}

impl Report {
    fn new(pass: bool, json: Value, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Report {
            pass,
            json,
            csv_header: header.iter().map(|s| s.to_string()).collect(),
            csv_rows: rows,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json).expect("report is valid JSON") + "\n",
            Format::Csv => {
                let mut out = self.csv_header.join(",") + "\n";
                for row in &self.csv_rows {
                    out += &row.join(",");
                    out += "\n";
                }
                out
            }
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(Format::Json))
    }
}

fn verification_json(rep: &VerificationReport<Rational>) -> (Value, Vec<Vec<String>>) {
    let checks: Vec<Value> = rep
        .checks
        .iter()
        .map(|c| {
            json!({
                "action": c.label,
                "state_class": c.state_class,
                "request": c.request_class,
                "cost": num(&c.cost),
                "adjust": num(&c.adjust),
                "delta_phi": num(&c.delta_phi),
                "slack": num(&c.slack),
            })
        })
        .collect();
    let rows = rep
        .checks
        .iter()
        .map(|c| {
            vec![
                c.label.clone(),
                exact_string(&c.cost),
                exact_string(&c.adjust),
                exact_string(&c.delta_phi),
                exact_string(&c.slack),
                (!c.slack.is_negative()).to_string(),
            ]
        })
        .collect();
    (
        json!({ "ratio": num(&rep.ratio), "feasible": rep.feasible, "checks": checks }),
        rows,
    )
}

const ACTION_HEADER: &[&str] = &["action", "cost", "adjust", "delta_phi", "slack", "ok"];

/// Runs one experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let rules = cfg.rules();
    let ratio = cfg.ratio.clone().unwrap_or_else(|| rules.ratio());
    match cfg.mode {
        Mode::Verify => {
            let phi = match cfg.potential {
                PotentialChoice::Certified => rules.certified_potentials(),
                PotentialChoice::Printed => rules.printed_potentials(),
            };
            let rep = verify_potential(rules.actions(), &phi, &ratio);
            let (mut body, rows) = verification_json(&rep);
            body["algorithm"] = json!(cfg.algorithm.to_string());
            body["potential"] = Value::Object(phi.iter().map(|(k, v)| (k.clone(), num(v))).collect());
            Ok(Report::new(rep.feasible, body, ACTION_HEADER, rows))
        }
        Mode::Synthesize => {
            let lp = PotentialLp::new(rules.actions(), cfg.ratio.clone());
            match lp.solve() {
                Synthesis::Infeasible => Ok(Report::new(
                    false,
                    json!({ "algorithm": cfg.algorithm.to_string(), "feasible": false }),
                    &["class", "value", "min", "max"],
                    Vec::new(),
                )),
                Synthesis::Feasible { ratio, table } => {
                    let at = PotentialLp::new(rules.actions(), Some(ratio.clone()));
                    let mut classes = serde_json::Map::new();
                    let mut rows = Vec::new();
                    for (class, v) in table.iter() {
                        let (lo, hi) = at.range(class).expect("feasible at the synthesized ratio");
                        let hi_text = hi.as_ref().map_or("unbounded".to_string(), exact_string);
                        classes.insert(
                            class.clone(),
                            json!({ "value": num(v), "min": num(&lo), "max": hi.as_ref().map(num) }),
                        );
                        rows.push(vec![class.clone(), exact_string(v), exact_string(&lo), hi_text]);
                    }
                    Ok(Report::new(
                        true,
                        json!({
                            "algorithm": cfg.algorithm.to_string(),
                            "feasible": true,
                            "ratio": num(&ratio),
                            "potential": classes,
                        }),
                        &["class", "value", "min", "max"],
                        rows,
                    ))
                }
            }
        }
        Mode::Simulate | Mode::Exact => {
            let seq = cfg.sequence();
            let initial = cfg.initial();
            let dist = DistributionalRun::run(&rules, &initial, &seq)?;
            let (opt, _) = opt_cost(&seq, &initial);
            let opt_q = Rational::from_count(opt);
            let slack = dist.expected_cost.clone() - ratio.clone() * opt_q.clone();
            let empirical = (opt > 0).then(|| dist.expected_cost.clone() / opt_q);
            let mut body = json!({
                "algorithm": cfg.algorithm.to_string(),
                "length": seq.len(),
                "expected_cost": num(&dist.expected_cost),
                "opt_cost": opt,
                "ratio": empirical.as_ref().map(num),
                "bound": num(&ratio),
                "adjust_total": num(&dist.expected_adjust),
                "additive_slack": num(&slack),
            });
            if cfg.mode == Mode::Simulate {
                let mc = monte_carlo(&rules, &initial, &seq, cfg.trials, cfg.seed)?;
                body["monte_carlo"] = json!({
                    "trials": mc.trials,
                    "seed": cfg.seed,
                    "mean": mc.mean,
                    "variance": mc.variance,
                    "standard_error": mc.standard_error(),
                });
            }
            let mut cost = Rational::from_int(0);
            let rows = seq
                .requests()
                .iter()
                .zip(&dist.step_log)
                .enumerate()
                .map(|(t, (r, s))| {
                    cost += s.cost.clone();
                    vec![
                        (t + 1).to_string(),
                        r.to_string(),
                        exact_string(&s.cost),
                        exact_string(&s.adjust),
                        exact_string(&cost),
                    ]
                })
                .collect();
            Ok(Report::new(
                true,
                body,
                &["step", "request", "cost", "adjust", "cumulative_cost"],
                rows,
            ))
        }
        Mode::Enumerate => {
            let e = enumerate(&rules, cfg.pages, cfg.length, &ratio);
            let pass = !e.max_excess.is_positive();
            let body = json!({
                "algorithm": cfg.algorithm.to_string(),
                "pages": cfg.pages,
                "length": cfg.length,
                "ratio": num(&ratio),
                "sequences": e.sequences,
                "max_excess": num(&e.max_excess),
                "worst_sequence": e.worst.to_string(),
                "phi0": num(&Rational::from_int(0)),
                "pass": pass,
            });
            let row = vec![
                cfg.pages.to_string(),
                cfg.length.to_string(),
                e.sequences.to_string(),
                exact_string(&e.max_excess),
                e.worst.to_string(),
            ];
            Ok(Report::new(
                pass,
                body,
                &["pages", "length", "sequences", "max_excess", "worst_sequence"],
                vec![row],
            ))
        }
        Mode::Opt => {
            let seq = cfg.sequence();
            let initial = cfg.initial();
            let (opt, wf) = opt_cost(&seq, &initial);
            let classical = opt_cost_classical(&seq, &initial);
            let table: serde_json::Map<String, Value> =
                wf.values().iter().map(|(x, v)| (x.to_string(), json!(v))).collect();
            let rows = wf.values().iter().map(|(x, v)| vec![x.to_string(), v.to_string()]).collect();
            Ok(Report::new(
                opt == classical,
                json!({
                    "length": seq.len(),
                    "opt_cost": opt,
                    "classical": classical,
                    "work_function": table,
                }),
                &["configuration", "work"],
                rows,
            ))
        }
    }
}
