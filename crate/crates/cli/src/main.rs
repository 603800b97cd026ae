use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use bratteli::criteria::{
    blocks_analysis, chain_analysis, exact_count_determinant, unique_ergodicity, BlockPartition, BlocksOptions, ChainOptions,
    Criterion, DetOptions, UeOptions,
};
use bratteli::measure::{check_invariance, count_measures, polytope_slice, slice_diameter, CountOptions, TowerMeasure};
use bratteli::rational::{q_f64, q_str};
use bratteli::report::{csv, error_json, ReportDocument};
use bratteli::stationary::{default_width, stationary_measures};
use bratteli::subdiagram::{extend_measure, extension_test, thinness_test, SubdiagramSpec};
use bratteli::vershik::{cylinders, orbit_frequencies, order_diagnostics, OrderSpec, OrderedTruncation};
use bratteli::words::{
    complexity_profile, generate, measure_bounds, min_frequencies, return_words, special_factors, BoundsOptions, Generator,
    SubstitutionRule, Word,
};
use bratteli::{BratteliDiagram, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "bk", version, about = "Invariant measures and ergodicity of Bratteli diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Levels (or series terms) examined.
    #[arg(long)]
    depth: Option<usize>,
    /// Clustering tolerance (L1).
    #[arg(long)]
    eps: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Reserved for randomized diagnostics; no core path uses it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable analysis on a diagram.
    Analyze {
        diagram: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Telescope a diagram along the given levels.
    Telescope {
        diagram: PathBuf,
        /// Comma-separated increasing levels starting at 0, e.g. 0,2,4,6.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Nested polytope slices and measure clusters; optionally check a measure file.
    Measures {
        diagram: PathBuf,
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long)]
        base: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Classes, spectral radii and measures of a stationary diagram.
    Stationary {
        diagram: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Unique-ergodicity criteria.
    Ue {
        diagram: PathBuf,
        /// Criterion name or "all".
        #[arg(long, default_value = "all")]
        criterion: String,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-ergodicity counts: determinant criterion, blocks and chains.
    Count {
        diagram: PathBuf,
        /// Partition file for the block and chain analyses.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        skip_singular_prefix: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Thinness and measure extension for a subdiagram.
    Sub {
        diagram: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Invariant measure on the subdiagram.
        #[arg(long)]
        measure: Option<PathBuf>,
        /// Include the extended measure in the report.
        #[arg(long)]
        extend: bool,
        #[arg(long)]
        allow_unproved: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Vershik orbit statistics on a truncation.
    Orbit {
        diagram: PathBuf,
        /// Number of successor steps.
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        /// Depth of the counted cylinders.
        #[arg(long, default_value_t = 1)]
        cylinder_depth: usize,
        /// Steps per CSV window.
        #[arg(long)]
        window: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Factor complexity of a substitution fixed point or a word file.
    Word {
        #[arg(long, conflicts_with = "word")]
        substitution: Option<String>,
        #[arg(long)]
        word: Option<PathBuf>,
        /// Repeat the word file periodically instead of reading it as a prefix.
        #[arg(long)]
        periodic: bool,
        /// Largest factor length N.
        #[arg(long, default_value_t = 20)]
        complexity: usize,
        /// Prefix length; defaults to max(1000, 40 N).
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        bounds: bool,
        /// Factor whose return words are listed.
        #[arg(long)]
        returns: Option<String>,
        /// Intervals of an interval exchange realizing the subshift.
        #[arg(long)]
        iet_intervals: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

struct Output {
    doc: ReportDocument,
    csv: Option<String>,
}

struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn new() -> Inputs {
        Inputs { hasher: Sha256::new() }
    }

    fn read(&mut self, p: &Path) -> Result<String> {
        let s = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        self.hasher.update(s.as_bytes());
        Ok(s)
    }

    fn json(&mut self, p: &Path) -> Result<Value> {
        let s = self.read(p)?;
        serde_json::from_str(&s).map_err(|e| Error::Schema(format!("{}: {e}", p.display())))
    }

    fn diagram(&mut self, p: &Path) -> Result<Arc<BratteliDiagram>> {
        Ok(Arc::new(BratteliDiagram::from_json_str(&self.read(p)?)?))
    }

    fn digest(self) -> String {
        self.hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn doc(name: &str, inputs: Inputs) -> ReportDocument {
    ReportDocument::new(name).with_digest(inputs.digest())
}

fn criteria(name: &str) -> Result<Vec<Criterion>> {
    if name == "all" {
        Ok(Criterion::ALL.to_vec())
    } else {
        Ok(vec![Criterion::parse(name)?])
    }
}

/// Runs one analysis; failures become an error record in the report.
fn attempt<T: serde::Serialize>(r: Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => error_json(&e),
    }
}

fn summary(d: &BratteliDiagram, depth: usize) -> Result<Value> {
    let shown = d.max_vertex_level().map_or(depth, |m| m.min(depth));
    let counts: Vec<usize> = (1..=shown).map(|n| d.vertex_count(n)).collect::<Result<_>>()?;
    let heights: Vec<Vec<String>> =
        (1..=shown.min(8)).map(|n| Ok(d.heights(n)?.iter().map(|h| h.to_string()).collect())).collect::<Result<_>>()?;
    Ok(json!({
        "name": d.name(),
        "infinite": d.is_infinite(),
        "vertex_counts": counts,
        "heights": heights,
        "stationary": d.stationary_matrix().is_some(),
    }))
}

fn ue_section(d: &BratteliDiagram, cs: &[Criterion], depth: usize) -> (Value, Vec<Vec<String>>) {
    let o = UeOptions { depth, ..UeOptions::default() };
    let mut out = serde_json::Map::new();
    let mut rows = vec![];
    for &c in cs {
        let r = unique_ergodicity(d, c, &o);
        if let Ok(v) = &r {
            for (i, t) in v.trace.iter().enumerate() {
                rows.push(vec![c.name().into(), (i + 1).to_string(), bratteli::rational::fmt12(*t)]);
            }
        }
        out.insert(c.name().into(), attempt(r));
    }
    (Value::Object(out), rows)
}

fn run(cmd: Command) -> Result<(Output, Common)> {
    let mut inputs = Inputs::new();
    match cmd {
        Command::Analyze { diagram, common } => {
            let d = inputs.diagram(&diagram)?;
            let depth = common.depth.unwrap_or(30);
            let mut doc = doc("analyze", inputs);
            doc.section("diagram", summary(&d, depth)?)?;
            let (ue, rows) = ue_section(&d, &Criterion::ALL, depth);
            doc.section("ue", ue)?;
            let co = CountOptions { depth, eps: common.eps.unwrap_or(0.1), ..CountOptions::default() };
            doc.section("measures", attempt(count_measures(&d, &co)))?;
            doc.section("determinant", attempt(exact_count_determinant(&d, &DetOptions { depth, ..DetOptions::default() })))?;
            if d.stationary_matrix().is_some() {
                doc.section("stationary", attempt(stationary_measures(&d, depth, &default_width())))?;
            }
            let csv = csv(&["criterion", "n", "value"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
        Command::Telescope { diagram, levels, common } => {
            let d = inputs.diagram(&diagram)?;
            let t = d.telescope(&levels)?;
            let depth = common.depth.unwrap_or(8);
            let mut doc = doc("telescope", inputs);
            doc.section("levels", &levels)?;
            doc.section("diagram", t.to_json(depth)?)?;
            doc.section("summary", summary(&t, depth)?)?;
            Ok((Output { doc, csv: None }, common))
        }
        Command::Measures { diagram, measure, base, common } => {
            let d = inputs.diagram(&diagram)?;
            let mu = measure.map(|p| inputs.json(&p)).transpose()?;
            let depth = common.depth.unwrap_or(30);
            let co = CountOptions { base, depth, eps: common.eps.unwrap_or(0.1), ..CountOptions::default() };
            let report = count_measures(&d, &co)?;
            let mut rows = vec![];
            for m in 1..=report.depth.min(12) {
                let s = polytope_slice(&d, report.base, m)?;
                let diam = slice_diameter(&s);
                rows.push(vec![report.base.to_string(), m.to_string(), q_str(&diam), bratteli::rational::fmt12(q_f64(&diam))]);
            }
            let mut doc = doc("measures", inputs);
            if let Some(v) = mu {
                let tm = TowerMeasure::from_json(&v)?;
                let levels = tm.depth().unwrap_or(depth);
                doc.section("invariance", check_invariance(&d, &tm, levels.saturating_sub(1).max(1))?)?;
            }
            doc.section("clusters", &report)?;
            let diams: Vec<Value> = rows.iter().map(|r| json!({ "m": r[1], "diameter": r[2] })).collect();
            doc.section("diameters", diams)?;
            let csv = csv(&["base", "m", "diameter", "diameter_f64"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
        Command::Stationary { diagram, common } => {
            let d = inputs.diagram(&diagram)?;
            let depth = common.depth.unwrap_or(10);
            let r = stationary_measures(&d, depth, &default_width())?;
            let mut rows = vec![];
            for m in &r.measures {
                for (n, lvl) in m.values.iter().enumerate() {
                    for (v, x) in lvl.iter().enumerate() {
                        let s = match x {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        rows.push(vec![m.class.to_string(), (n + 1).to_string(), v.to_string(), s]);
                    }
                }
            }
            let mut doc = doc("stationary", inputs);
            doc.section("stationary", &r)?;
            let csv = csv(&["class", "n", "vertex", "value"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
        Command::Ue { diagram, criterion, common } => {
            let d = inputs.diagram(&diagram)?;
            let cs = criteria(&criterion)?;
            let depth = common.depth.unwrap_or(64);
            let mut doc = doc("ue", inputs);
            if cs.len() == 1 {
                // a single requested criterion must succeed
                let v = unique_ergodicity(&d, cs[0], &UeOptions { depth, ..UeOptions::default() })?;
                let rows: Vec<Vec<String>> = v
                    .trace
                    .iter()
                    .enumerate()
                    .map(|(i, t)| vec![cs[0].name().into(), (i + 1).to_string(), bratteli::rational::fmt12(*t)])
                    .collect();
                doc.section("ue", json!({ cs[0].name(): v }))?;
                let csv = csv(&["criterion", "n", "value"], &rows);
                return Ok((Output { doc, csv: Some(csv) }, common));
            }
            let (ue, rows) = ue_section(&d, &cs, depth);
            doc.section("ue", ue)?;
            let csv = csv(&["criterion", "n", "value"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
        Command::Count { diagram, partition, skip_singular_prefix, common } => {
            let d = inputs.diagram(&diagram)?;
            let part = partition.map(|p| inputs.json(&p)).transpose()?;
            let depth = common.depth.unwrap_or(64);
            let mut doc = doc("count", inputs);
            let det = exact_count_determinant(&d, &DetOptions { depth, skip_singular_prefix, ..DetOptions::default() });
            doc.section("determinant", attempt(det))?;
            let co = CountOptions { depth: depth.min(30), eps: common.eps.unwrap_or(0.1), ..CountOptions::default() };
            doc.section("measures", attempt(count_measures(&d, &co)))?;
            let mut rows = vec![];
            if let Some(v) = part {
                let p = BlockPartition::from_json(&v)?;
                doc.section("blocks", blocks_analysis(&d, &p, &BlocksOptions { depth: depth.min(40), ..BlocksOptions::default() })?)?;
                let ch = chain_analysis(&d, &p, &ChainOptions { depth: common.depth.unwrap_or(10), ..ChainOptions::default() })?;
                rows = ch.prefix_counts.iter().enumerate().map(|(i, c)| vec![(ch.start + i).to_string(), c.to_string()]).collect();
                doc.section("chains", &ch)?;
            }
            let csv = csv(&["level", "chain_prefixes"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
        Command::Sub { diagram, spec, measure, extend, allow_unproved, common } => {
            let d = inputs.diagram(&diagram)?;
            let s = SubdiagramSpec::from_json(&inputs.json(&spec)?)?;
            let mu = measure.map(|p| inputs.json(&p)).transpose()?.map(|v| TowerMeasure::from_json(&v)).transpose()?;
            let depth = common.depth.unwrap_or(30);
            let thin = thinness_test(&d, &s, depth)?;
            let ext = extension_test(&d, &s, mu.as_ref(), depth)?;
            let rows: Vec<Vec<String>> = ext
                .forms
                .iter()
                .chain(std::iter::once(&ext.sufficient))
                .flat_map(|f| f.partial_sums.iter().enumerate().map(move |(i, x)| vec![f.name.clone(), (i + 1).to_string(), x.clone()]))
                .collect();
            let mut doc = doc("sub", inputs);
            doc.section("spec", s.to_json())?;
            doc.section("thinness", &thin)?;
            doc.section("extension", &ext)?;
            if extend {
                let m = extend_measure(&d, &s, mu.as_ref(), depth, allow_unproved)?;
                doc.section("extended_measure", m.to_json(&d, depth.min(12))?)?;
            }
            let csv = csv(&["series", "n", "partial_sum"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
        Command::Orbit { diagram, steps, cylinder_depth, window, common } => {
            let d = inputs.diagram(&diagram)?;
            let order = d.order().cloned().unwrap_or(OrderSpec::Consecutive);
            let depth = common.depth.unwrap_or(8).max(cylinder_depth);
            let t = OrderedTruncation::new(&d, &order, depth)?;
            let cyl = cylinders(&d, &order, cylinder_depth)?;
            let start = t.min_path_into(depth, 0);
            let total = orbit_frequencies(&d, &order, &start, steps, &cyl)?;
            let w = window.unwrap_or(steps.div_ceil(10)).max(1);
            let mut rows = vec![];
            let mut p = start;
            let mut done = 0;
            while done < steps {
                let k = w.min(steps - done);
                let part = orbit_frequencies(&d, &order, &p, k, &cyl)?;
                done += k;
                for (i, f) in part.frequencies.iter().enumerate() {
                    rows.push(vec![done.to_string(), i.to_string(), bratteli::rational::fmt12(*f)]);
                }
                p = part.end;
            }
            let mut doc = doc("orbit", inputs);
            if total.wraps > 0 {
                doc.warn(format!("orbit: {} wraps from the maximal to the minimal truncated path", total.wraps));
            }
            doc.section("cylinders", &cyl)?;
            doc.section("orbit", &total)?;
            doc.section("order", attempt(order_diagnostics(&d, &order, depth.min(6), 2)))?;
            let csv = csv(&["step", "cylinder", "frequency"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
        Command::Word { substitution, word, periodic, complexity, length, bounds, returns, iet_intervals, common } => {
            let n = complexity;
            let len = length.unwrap_or((40 * n).max(1000));
            let g = match (&substitution, &word) {
                (Some(s), _) => Generator::substitution(SubstitutionRule::parse(s)?)?,
                (None, Some(p)) => {
                    let text: String = inputs.read(p)?.split_whitespace().collect();
                    if periodic {
                        Generator::Periodic(text)
                    } else {
                        Generator::Explicit(text)
                    }
                }
                (None, None) => return Err(Error::Argument("give --substitution or --word".into())),
            };
            if let Some(s) = &substitution {
                inputs.hasher.update(s.as_bytes());
            }
            let w: Word = match &g {
                Generator::Explicit(t) if length.is_none() => Word::explicit(t)?,
                _ => generate(&g, len)?,
            };
            let prof = complexity_profile(&w, n)?;
            let rows: Vec<Vec<String>> = (1..=n)
                .map(|k| {
                    let dp = prof.differences.get(k - 1).map_or(String::new(), |x| x.to_string());
                    vec![k.to_string(), prof.p[k].to_string(), dp]
                })
                .collect();
            let mut doc = doc("word", inputs);
            doc.section("word", json!({ "generator": g.describe(), "length": w.len(), "alphabet": w.alphabet.iter().collect::<String>() }))?;
            doc.section("complexity", &prof)?;
            if prof.periodic_at.is_some() {
                doc.warn(format!("word: p(n+1) = p(n) or p(n) <= n at n = {}", prof.periodic_at.unwrap()));
            }
            if bounds {
                let opts = BoundsOptions { min_frequencies: Some(min_frequencies(&w, n)?), iet_intervals };
                doc.section("bounds", measure_bounds(&prof, &opts))?;
                doc.section("special", special_factors(&w, n)?)?;
            }
            if let Some(u) = returns {
                let r = return_words(&w, &u)?;
                doc.section("return_words", json!({ "factor": r.factor, "occurrences": r.occurrences, "words": r.words, "ratio": r.ratio }))?;
            }
            doc.warn(format!("word: counts are lower bounds for p(n) from a prefix of length {}", w.len()));
            let csv = csv(&["n", "p", "dp"], &rows);
            Ok((Output { doc, csv: Some(csv) }, common))
        }
    }
}

fn emit(out: &Output, common: &Common) -> Result<()> {
    let text = match common.format {
        Format::Json => out.doc.to_string_pretty(),
        Format::Csv => out.csv.clone().ok_or_else(|| Error::Argument(format!("{} has no CSV output", out.doc.command)))?,
    };
    match &common.out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", error_json(e));
    ExitCode::from(if e.is_numeric() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = Error::Argument(e.to_string().trim().to_string());
            return fail(&err);
        }
    };
    match run(cli.command).and_then(|(out, common)| emit(&out, &common)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bratteli::rational::parse_q;

    #[test]
    fn criteria_parse() {
        assert_eq!(criteria("all").unwrap().len(), 6);
        assert_eq!(criteria("min_sum").unwrap(), vec![Criterion::MinSum]);
        assert!(criteria("bogus").is_err());
    }

    #[test]
    fn rationals_parse_for_measure_files() {
        assert_eq!(q_str(&parse_q("2/4").unwrap()), "1/2");
    }
}
