//! Command implementations behind the `collsim` binary.
//!
//! Every command expands a [`RunSpec`] into an ordered list of [`Case`]s
//! and renders deterministic text; `main.rs` only parses flags and maps
//! outcomes to exit codes.

use std::fmt::Write as _;

use collsim::algorithms::{generate, Algorithm, CollectiveParams, OpKind};
use collsim::cost::{time_schedule, CostParams};
use collsim::semantics::verify;
use collsim::{MachineShape, Placement, Schedule};
use rayon::prelude::*;
use serde::Serialize;

/// Command failure classes, mapped to exit codes by the binary.
#[derive(Debug, PartialEq, Eq)]
pub enum CliError {
    /// Bad flag combination or parameter; exit code 2.
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl From<collsim::Error> for CliError {
    fn from(e: collsim::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Test hook: damage generated schedules before verifying them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Remove the last event of the last non-empty round.
    DropLastEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Verify,
    Dump,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha_inter: f64,
    pub beta_inter: f64,
    pub alpha_intra: f64,
    pub beta_intra: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            alpha_inter: CostParams::DEFAULT_ALPHA_INTER,
            beta_inter: CostParams::DEFAULT_BETA_INTER,
            alpha_intra: CostParams::DEFAULT_ALPHA_INTRA,
            beta_intra: CostParams::DEFAULT_BETA_INTRA,
        }
    }
}

/// Parsed command line. `None` lists take mode-dependent defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub ops: Option<Vec<OpKind>>,
    pub algos: Option<Vec<Algorithm>>,
    pub nodes: Option<Vec<usize>>,
    pub per_node: Option<Vec<usize>>,
    pub ks: Option<Vec<usize>>,
    pub placement: Placement,
    pub root: Option<usize>,
    pub counts: Option<Vec<usize>>,
    pub coefficients: Coefficients,
    pub format: Format,
    pub mutate: Mutation,
}

impl RunSpec {
    pub fn new(mode: Mode) -> Self {
        RunSpec {
            mode,
            ops: None,
            algos: None,
            nodes: None,
            per_node: None,
            ks: None,
            placement: Placement::Block,
            root: None,
            counts: None,
            coefficients: Coefficients::default(),
            format: Format::Csv,
            mutate: Mutation::None,
        }
    }
}

/// Default verification grid extents.
pub const VERIFY_SIZES: [usize; 5] = [1, 2, 3, 4, 8];
pub const VERIFY_COUNTS: [usize; 3] = [1, 5, 7];
/// Canonical 36 x 32 cluster.
pub const DEFAULT_NODES: usize = 36;
pub const DEFAULT_PER_NODE: usize = 32;

/// One fully specified generator invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Case {
    pub algo: Algorithm,
    pub machine: MachineShape,
    pub params: CollectiveParams,
}

impl Case {
    pub fn schedule(&self) -> Result<Schedule, CliError> {
        Ok(generate(self.algo, &self.machine, &self.params)?)
    }

    fn label(&self) -> String {
        let root = match self.params.root() {
            Some(r) => r.to_string(),
            None => "-".into(),
        };
        format!(
            "{} {} {} {} {} {} {}",
            self.params.op,
            self.algo,
            self.params.k,
            self.machine.nodes(),
            self.machine.per_node(),
            self.params.c,
            root
        )
    }
}

fn check_positive(name: &str, values: &[usize]) -> Result<(), CliError> {
    if values.is_empty() || values.contains(&0) {
        return Err(CliError::Usage(format!("{name} needs one or more positive values")));
    }
    Ok(())
}

/// Expands a spec in the order (op, N, n, algo, k, c, root).
///
/// Lane algorithms skip lane counts above `n`; a spec that expands to no
/// case at all is a usage error.
pub fn expand(spec: &RunSpec) -> Result<Vec<Case>, CliError> {
    let verify_mode = spec.mode == Mode::Verify;
    let ops = spec.ops.clone().unwrap_or_else(|| OpKind::ALL.to_vec());
    let algos = spec.algos.clone().unwrap_or_else(|| {
        let mut a = Algorithm::ALL.to_vec();
        if verify_mode {
            a.push(Algorithm::KLane { full_node_bcast: true });
        }
        a
    });
    let default_sizes = |d: usize| if verify_mode { VERIFY_SIZES.to_vec() } else { vec![d] };
    let nodes = spec.nodes.clone().unwrap_or_else(|| default_sizes(DEFAULT_NODES));
    let per_node = spec.per_node.clone().unwrap_or_else(|| default_sizes(DEFAULT_PER_NODE));
    let counts = spec
        .counts
        .clone()
        .unwrap_or_else(|| if verify_mode { VERIFY_COUNTS.to_vec() } else { vec![1] });
    check_positive("-N", &nodes)?;
    check_positive("-n", &per_node)?;
    check_positive("-c", &counts)?;
    if let Some(ks) = &spec.ks {
        check_positive("--k", ks)?;
    }

    let mut cases = Vec::new();
    for &op in &ops {
        for &n_nodes in &nodes {
            for &n in &per_node {
                let p = n_nodes * n;
                let roots: Vec<usize> = match (op.needs_root(), spec.root) {
                    (false, _) => vec![0],
                    (true, Some(r)) if r >= p => {
                        return Err(CliError::Usage(format!("--root {r} out of range for p={p}")))
                    }
                    (true, Some(r)) => vec![r],
                    (true, None) if verify_mode => {
                        let mut r = vec![0, p / 2, p - 1];
                        r.dedup();
                        r
                    }
                    (true, None) => vec![0],
                };
                for &algo in &algos {
                    if algo == (Algorithm::KLane { full_node_bcast: true }) && op != OpKind::Bcast {
                        continue;
                    }
                    let ks = match &spec.ks {
                        Some(ks) => ks.clone(),
                        None if verify_mode => (1..=if algo.is_lane() { n.min(6) } else { 6 }).collect(),
                        None => vec![1],
                    };
                    for &k in &ks {
                        if algo.is_lane() && k > n {
                            continue;
                        }
                        let machine = MachineShape::new(n_nodes, n, k.min(n), spec.placement)?;
                        for &c in &counts {
                            for &root in &roots {
                                cases.push(Case { algo, machine, params: CollectiveParams::new(op, root, c, k) });
                            }
                        }
                    }
                }
            }
        }
    }
    if cases.is_empty() {
        return Err(CliError::Usage("no valid case (lane algorithms need k <= n)".into()));
    }
    Ok(cases)
}

/// One output row of `run` / `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub op: String,
    pub algo: String,
    pub k: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub p: usize,
    pub c: usize,
    pub rounds: usize,
    pub comm_rounds: usize,
    pub off_node_elems: usize,
    pub on_node_elems: usize,
    pub root_out_elems: Option<usize>,
    pub root_node_out_elems: Option<usize>,
    pub modeled_time: f64,
}

pub fn evaluate(case: &Case, coefficients: &Coefficients) -> Result<Row, CliError> {
    let s = case.schedule()?;
    let m = &case.machine;
    let root = case.params.root();
    let st = s.stats(m, root);
    let cp = CostParams {
        alpha_inter: coefficients.alpha_inter,
        beta_inter: coefficients.beta_inter,
        alpha_intra: coefficients.alpha_intra,
        beta_intra: coefficients.beta_intra,
        lanes: m.lanes(),
    };
    if !cp.is_valid() {
        return Err(CliError::Usage("cost coefficients must be finite and non-negative".into()));
    }
    Ok(Row {
        op: case.params.op.to_string(),
        algo: case.algo.to_string(),
        k: case.params.k,
        n: m.per_node(),
        nodes: m.nodes(),
        p: m.ranks(),
        c: case.params.c,
        rounds: st.rounds,
        comm_rounds: st.comm_rounds,
        off_node_elems: st.off_node_elements,
        on_node_elems: st.on_node_elements,
        root_out_elems: root.map(|_| st.root_out_elements),
        root_node_out_elems: root.map(|_| st.root_node_out_elements),
        modeled_time: time_schedule(&s, m, &cp).total_time,
    })
}

pub fn render_rows(rows: &[Row], format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows).map_err(|e| CliError::Usage(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Table rows, evaluated in order.
pub fn cmd_run(spec: &RunSpec) -> Result<String, CliError> {
    let rows = expand(spec)?
        .iter()
        .map(|c| evaluate(c, &spec.coefficients))
        .collect::<Result<Vec<_>, _>>()?;
    render_rows(&rows, spec.format)
}

/// Same rows as [`cmd_run`], evaluated in parallel; output order is the
/// expansion order.
pub fn cmd_sweep(spec: &RunSpec) -> Result<String, CliError> {
    let rows = expand(spec)?
        .par_iter()
        .map(|c| evaluate(c, &spec.coefficients))
        .collect::<Result<Vec<_>, _>>()?;
    render_rows(&rows, spec.format)
}

fn mutate(s: Schedule, mutation: Mutation) -> Schedule {
    match mutation {
        Mutation::None => s,
        Mutation::DropLastEvent => match s.rounds().iter().rposition(|r| !r.is_empty()) {
            Some(r) => s.without_event(r, s.rounds()[r].len() - 1),
            None => s,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub text: String,
    pub all_passed: bool,
}

#[derive(Serialize)]
struct VerifyLine<'a> {
    status: &'a str,
    op: String,
    algo: String,
    k: usize,
    #[serde(rename = "N")]
    nodes: usize,
    n: usize,
    c: usize,
    root: Option<usize>,
    failures: Vec<String>,
}

/// Verifies every case; one `PASS|FAIL op algo k N n c root` line each.
pub fn cmd_verify(spec: &RunSpec) -> Result<VerifyOutcome, CliError> {
    let cases = expand(spec)?;
    let results = cases
        .par_iter()
        .map(|case| {
            let s = mutate(case.schedule()?, spec.mutate);
            Ok(verify(&case.params, &case.machine, &s))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let all_passed = results.iter().all(|r| r.passed);
    let text = match spec.format {
        Format::Csv => {
            let mut out = String::new();
            for (case, r) in cases.iter().zip(&results) {
                let status = if r.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{status} {}", case.label()).unwrap();
            }
            out
        }
        Format::Json => {
            let lines: Vec<VerifyLine> = cases
                .iter()
                .zip(&results)
                .map(|(case, r)| VerifyLine {
                    status: if r.passed { "PASS" } else { "FAIL" },
                    op: case.params.op.to_string(),
                    algo: case.algo.to_string(),
                    k: case.params.k,
                    nodes: case.machine.nodes(),
                    n: case.machine.per_node(),
                    c: case.params.c,
                    root: case.params.root(),
                    failures: r.failures.iter().map(ToString::to_string).collect(),
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&lines).map_err(|e| CliError::Usage(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    Ok(VerifyOutcome { text, all_passed })
}

/// Dump of a single case's schedule.
pub fn cmd_dump(spec: &RunSpec) -> Result<String, CliError> {
    let cases = expand(spec)?;
    let [case] = cases.as_slice() else {
        return Err(CliError::Usage(format!("dump needs exactly one case, flags select {}", cases.len())));
    };
    Ok(mutate(case.schedule()?, spec.mutate).dump())
}
