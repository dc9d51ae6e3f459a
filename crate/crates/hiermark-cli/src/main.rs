mod bench;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hiermark::fixtures::{self, Selection};
use hiermark::machine::{run_bfd, run_cdd, run_dad, run_dfd, run_pbfd, run_pdfd, Dag};
use hiermark::tle::Snapshot;
use hiermark::trace::{read_jsonl, write_jsonl};
use hiermark::verify::deadlock::explore_skeleton;
use hiermark::verify::{report, verify_trace, Check, Verdict};
use hiermark::{Hierarchy, Methodology, NodeId, Outcome, Run, Scenario, TleStore, TraceEvent};

#[derive(Parser)]
#[command(
    name = "hiermark",
    version,
    about = "Hierarchy bitmask store and development state machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one methodology over a hierarchy and scenario.
    Run(RunArgs),
    /// Replay a bundled profile and compare against its expected outcome.
    Replay(ReplayArgs),
    /// Check a trace file, or a fresh run, against the trace monitors.
    Verify(VerifyArgs),
    /// Step counts and storage ratios across hierarchy sizes and densities.
    Bench(BenchArgs),
    /// Print the selection paths stored in a snapshot.
    Report(ReportArgs),
    /// Apply a selection through the paged traversal and save a snapshot.
    Tle(TleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    JsonlTrace,
    TextReport,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Machine {
    Dad,
    Dfd,
    Bfd,
    Cdd,
    Pdfd,
    Pbfd,
}

impl From<Machine> for Methodology {
    fn from(m: Machine) -> Self {
        match m {
            Machine::Dad => Methodology::Dad,
            Machine::Dfd => Methodology::Dfd,
            Machine::Bfd => Methodology::Bfd,
            Machine::Cdd => Methodology::Cdd,
            Machine::Pdfd => Methodology::Pdfd,
            Machine::Pbfd => Methodology::Pbfd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Measure,
    Bounds,
    Finalization,
    Deadlock,
    Csp,
    All,
}

impl From<CheckArg> for Check {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Measure => Check::Measure,
            CheckArg::Bounds => Check::Bounds,
            CheckArg::Finalization => Check::Finalization,
            CheckArg::Deadlock => Check::Deadlock,
            CheckArg::Csp => Check::Csp,
            CheckArg::All => Check::All,
        }
    }
}

#[derive(Args)]
struct Input {
    /// Hierarchy document; the bundled geographic tree when omitted.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Scenario document; defaults otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the scenario's refinement cap.
    #[arg(long)]
    rmax: Option<u32>,
    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Output {
    /// Where to write the trace.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl-trace")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    methodology: Machine,
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(fixtures::PROFILES))]
    fixture: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace to check; when omitted the machine is run first.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "fixture")]
    methodology: Option<Machine>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(fixtures::PROFILES))]
    fixture: Option<String>,
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "all")]
    check: CheckArg,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    subject: u64,
}

#[derive(Args)]
struct TleArgs {
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// `{"subject": .., "selected": [..]}`; the bundled selection when omitted.
    #[arg(long)]
    selection: Option<PathBuf>,
    /// Snapshot destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Traversal trace destination.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_hierarchy(path: Option<&Path>) -> Result<Hierarchy> {
    match path {
        Some(p) => Ok(Hierarchy::from_json(&read(p)?)?),
        None => Ok(fixtures::geo_hierarchy()),
    }
}

fn load_input(input: &Input) -> Result<(Hierarchy, Scenario)> {
    let h = load_hierarchy(input.hierarchy.as_deref())?;
    let mut sc = match &input.scenario {
        Some(p) => Scenario::from_json(&read(p)?)?,
        None => Scenario::default(),
    };
    if let Some(r) = input.rmax {
        sc.r_max = r;
    }
    if let Some(s) = input.seed {
        sc.seed = s;
    }
    sc.validate(&h)?;
    Ok((h, sc))
}

fn execute(m: Methodology, h: &Hierarchy, sc: &Scenario) -> Result<Run> {
    let run = match m {
        Methodology::Dad => run_dad(&Dag::from_hierarchy(h), sc)?,
        Methodology::Dfd => run_dfd(h),
        Methodology::Bfd => run_bfd(h),
        Methodology::Cdd => {
            let mut ids: Vec<NodeId> = h.nodes().iter().map(|n| n.id).collect();
            ids.sort_unstable();
            run_cdd(&ids, sc)?
        }
        Methodology::Pdfd => run_pdfd(h, sc)?,
        Methodology::Pbfd => run_pbfd(h, sc)?,
        Methodology::Tle => bail!("use the tle subcommand for traversals"),
    };
    Ok(run)
}

fn write_trace(trace: &[TraceEvent], out: &Output) -> Result<()> {
    let Some(path) = &out.out else {
        return Ok(());
    };
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    match out.format {
        Format::JsonlTrace => write_jsonl(&mut w, trace)?,
        Format::TextReport => {
            for e in trace {
                writeln!(w, "{:>5} {:<6} {} -> {}", e.seq, e.rule, e.from, e.to)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn outcome_text(o: &Outcome) -> String {
    match o {
        Outcome::Success => "success".into(),
        Outcome::Error(reason) => format!("error ({reason})"),
    }
}

fn summary(run: &Run) -> String {
    let mut s = format!(
        "methodology: {}\noutcome: {}\nevents: {}\nfinal: {}\n",
        run.methodology,
        outcome_text(&run.outcome),
        run.trace.len(),
        run.trace.last().map(|e| e.to.as_str()).unwrap_or("-"),
    );
    if matches!(run.methodology, Methodology::Pdfd | Methodology::Pbfd) {
        let spent: Vec<String> = run
            .attempts
            .iter()
            .filter(|(_, &a)| a > 0)
            .map(|(l, a)| format!("{l}:{a}"))
            .collect();
        s += &format!("attempts: {{{}}}\n", spent.join(", "));
    }
    s
}

fn exit_for(o: &Outcome) -> ExitCode {
    if o.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_run(a: &RunArgs) -> Result<ExitCode> {
    let (h, sc) = load_input(&a.input)?;
    let run = execute(a.methodology.into(), &h, &sc)?;
    write_trace(&run.trace, &a.output)?;
    print!("{}", summary(&run));
    Ok(exit_for(&run.outcome))
}

/// Failing level and the levels refined for it, per refinement cycle.
fn cycles(run: &Run) -> Vec<(u32, Vec<u32>)> {
    let (open_rule, close_rule) = match run.methodology {
        Methodology::Pdfd => ("PD2a", "PD3b"),
        _ => ("PB3", "PB6"),
    };
    let mut out = Vec::new();
    let mut open: Option<(u32, Vec<u32>)> = None;
    for e in &run.trace {
        if e.rule == open_rule {
            open = e.payload.level.map(|i| (i, Vec::new()));
        }
        if let (Some((_, js)), Some(args)) = (open.as_mut(), e.to.strip_prefix("S1R(")) {
            if let Some(j) = args.split(',').next().and_then(|j| j.parse().ok()) {
                js.push(j);
            }
        }
        if e.rule == close_rule {
            out.extend(open.take());
        }
    }
    out
}

fn cmd_replay(a: &ReplayArgs) -> Result<ExitCode> {
    let (h, sc) = fixtures::profile(&a.fixture).ok_or_else(|| anyhow!("unknown fixture"))?;
    let m = if a.fixture.starts_with("pdfd") {
        Methodology::Pdfd
    } else {
        Methodology::Pbfd
    };
    let run = execute(m, &h, &sc)?;
    write_trace(&run.trace, &a.output)?;
    print!("{}", summary(&run));
    let got = cycles(&run);
    let shown: Vec<String> = got
        .iter()
        .map(|(i, js)| {
            format!(
                "{i}->[{}]",
                js.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            )
        })
        .collect();
    println!("cycles: {}", shown.join(" "));

    let want = fixtures::expected(&a.fixture).expect("every profile has an expectation");
    let spent: BTreeMap<u32, u32> = run
        .attempts
        .iter()
        .filter(|(_, &v)| v > 0)
        .map(|(&k, &v)| (k, v))
        .collect();
    let mut diffs = Vec::new();
    if (want.outcome == "success") != run.outcome.is_success() {
        diffs.push(format!("outcome {}", outcome_text(&run.outcome)));
    }
    if got != want.cycles {
        diffs.push("refinement cycles".to_string());
    }
    if !want.attempts.is_empty() && spent != want.attempts {
        diffs.push("attempt counters".to_string());
    }
    if want.max_attempts.is_some_and(|m| m != run.max_attempts()) {
        diffs.push("max attempts".to_string());
    }
    if diffs.is_empty() {
        println!("expected: match");
        Ok(exit_for(&run.outcome))
    } else {
        println!("expected: MISMATCH in {}", diffs.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<ExitCode> {
    let (m, h, sc) = match &a.fixture {
        Some(name) => {
            let (h, sc) = fixtures::profile(name).ok_or_else(|| anyhow!("unknown fixture"))?;
            let m = if name.starts_with("pdfd") {
                Methodology::Pdfd
            } else {
                Methodology::Pbfd
            };
            (m, h, sc)
        }
        None => {
            let (h, sc) = load_input(&a.input)?;
            (
                a.methodology.expect("clap enforces one of the two").into(),
                h,
                sc,
            )
        }
    };
    let trace = match &a.trace {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            read_jsonl(BufReader::new(f)).with_context(|| format!("parsing {}", p.display()))?
        }
        None => execute(m, &h, &sc)?.trace,
    };
    let check: Check = a.check.into();
    let mut verdicts = verify_trace(&trace, m, sc.r_max, h.max_level(), check);
    if matches!(check, Check::Deadlock | Check::All)
        && matches!(m, Methodology::Pdfd | Methodology::Pbfd)
    {
        verdicts.push(match explore_skeleton(m, 1) {
            Ok(s) if s.stuck.is_empty() => Verdict::pass(
                "skeleton",
                format!(
                    "{} states, {} transitions, none stuck",
                    s.states, s.transitions
                ),
            ),
            Ok(s) => Verdict::fail("skeleton", None, format!("stuck in {:?}", s.stuck)),
            Err(e) => Verdict::fail("skeleton", None, e.to_string()),
        });
    }
    print!("{}", report(&verdicts));
    Ok(if verdicts.iter().all(|v| v.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_report(a: &ReportArgs) -> Result<ExitCode> {
    let path = a
        .snapshot
        .as_ref()
        .ok_or_else(|| anyhow!("missing snapshot: pass --snapshot"))?;
    let store = TleStore::from_snapshot(&Snapshot::from_json(&read(path)?)?)?;
    let mut out = io::stdout().lock();
    for line in store.report_paths(a.subject) {
        writeln!(out, "{line}")?;
    }
    Ok(ExitCode::SUCCESS)
}

type Pages = (Vec<Vec<NodeId>>, Vec<Vec<(NodeId, bool)>>);

/// One page per level: the parents of that level's selected nodes.
fn pages_for(h: &Hierarchy, selected: &[NodeId]) -> Result<Pages> {
    let mut by_level: BTreeMap<u32, Vec<NodeId>> = BTreeMap::new();
    for &n in selected {
        let node = h
            .node(n)
            .ok_or_else(|| anyhow!("selection names unknown node {n}"))?;
        by_level.entry(node.level).or_default().push(n);
    }
    let mut pages = Vec::new();
    let mut inputs = Vec::new();
    for (_, mut nodes) in by_level {
        nodes.sort_unstable();
        let mut parents: Vec<NodeId> = nodes
            .iter()
            .filter_map(|&n| h.parent_of(n).map(|p| p.id))
            .collect();
        parents.sort_unstable();
        parents.dedup();
        pages.push(parents);
        inputs.push(nodes.into_iter().map(|n| (n, true)).collect());
    }
    Ok((pages, inputs))
}

fn cmd_tle(a: &TleArgs) -> Result<ExitCode> {
    let h = Arc::new(load_hierarchy(a.hierarchy.as_deref())?);
    let sel: Selection = match &a.selection {
        Some(p) => {
            serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => fixtures::geo_selection(),
    };
    let mut store = TleStore::new(h.clone())?;
    let (pages, inputs) = pages_for(&h, &sel.selected)?;
    let trace = store.traverse(sel.subject, &pages, &inputs)?;
    if let Some(p) = &a.trace {
        write_jsonl(BufWriter::new(File::create(p)?), &trace)?;
    }
    println!("pages: {}", pages.len());
    println!("events: {}", trace.len());
    for n in h.nodes() {
        if let Some(cell) = store.cell_of(sel.subject, n.id).filter(|c| !c.is_zero()) {
            println!("cell {} ({}): {}", n.id, n.name, cell);
        }
    }
    if let Some(p) = &a.out {
        fs::write(p, store.snapshot().to_json())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => {
            print!("{}", bench::run(a.seed));
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(a) => cmd_report(a),
        Command::Tle(a) => cmd_tle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
