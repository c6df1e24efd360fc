use crate::config::{Algo, RunConfig};
use crate::manifest::{hash_input, read_bytes, InputFile, RunManifest};
use crate::report::{emit_gdp_report, emit_learning_curve, train_log_csv};
use crate::Invalid;
use anyhow::{Context, Result};
use gdpsim_core::agents::{
    baseline_policy, bc_train, cql_train, evaluate, read_agent, write_agent, Agent, EvalHook, EvalSource,
};
use gdpsim_core::data::{
    build_scenario, parse_airport_quarters, parse_flights, parse_gdp_advisories, write_airport_quarters, write_flights,
    write_gdp_advisories,
};
use gdpsim_core::env::{Policy, LOOKAHEAD};
use gdpsim_core::gen::{build_dataset, derive_seed, gen_scenario, Dataset, ScriptedExpert};
use gdpsim_core::nn::grad_check;
use gdpsim_core::Scenario;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const DATASET_FILE: &str = "dataset.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const GRAD_CHECK_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Gen,
    Train,
    Eval,
    Replay,
    GradCheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Gen => "gen",
            CommandKind::Train => "train",
            CommandKind::Eval => "eval",
            CommandKind::Replay => "replay",
            CommandKind::GradCheck => "grad-check",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::Gen, Self::Train, Self::Eval, Self::Replay, Self::GradCheck]
            .into_iter()
            .find(|c| c.name() == s)
    }
}

/// Files a command reads, keyed by role.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
}

impl Inputs {
    fn listed(&self) -> Vec<(&'static str, &Path)> {
        let mut v = Vec::new();
        if let Some(p) = &self.data {
            v.push(("data", p.as_path()));
        }
        if let Some(p) = &self.checkpoint {
            v.push(("checkpoint", p.as_path()));
        }
        if let Some(p) = &self.scenario {
            v.push(("scenario", p.as_path()));
        }
        v
    }

    pub fn from_manifest(m: &RunManifest) -> Inputs {
        Inputs {
            data: m.input("data").map(Path::to_path_buf),
            checkpoint: m.input("checkpoint").map(Path::to_path_buf),
            scenario: m.input("scenario").map(Path::to_path_buf),
        }
    }
}

fn scenario_dir(i: usize) -> String {
    format!("scenarios/scenario_{i:03}")
}

fn planned_outputs(cmd: CommandKind, config: &RunConfig) -> Vec<String> {
    let files: &[&str] = match cmd {
        CommandKind::Gen => {
            let mut v: Vec<String> = (0..config.n_scenarios)
                .flat_map(|i| {
                    ["flights.csv", "airport_quarters.csv", "gdp_advisories.csv", "meta.json"]
                        .map(|f| format!("{}/{f}", scenario_dir(i)))
                })
                .collect();
            v.push(DATASET_FILE.into());
            return v;
        }
        CommandKind::Train => &[
            CHECKPOINT_FILE,
            "train_log.csv",
            "learning_curve.csv",
            "learning_curve.svg",
        ],
        CommandKind::Eval => &["eval.csv", "summary.json"],
        CommandKind::Replay => &["trace.jsonl", "report_quarters.csv", "report_totals.csv", "report.svg"],
        CommandKind::GradCheck => &["grad_check.json"],
    };
    files.iter().map(|s| s.to_string()).collect()
}

/// Seed for evaluation scenarios, disjoint from the scenarios `gen` writes.
pub fn eval_seed(master: u64) -> u64 {
    derive_seed(master, 1 << 32)
}

/// Writes the manifest, then runs the command.
pub fn execute(cmd: CommandKind, config: &RunConfig, inputs: &Inputs, out: &Path, argv: Vec<String>) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let inputs_resolved = Inputs {
        data: inputs
            .data
            .as_ref()
            .map(|p| if p.is_dir() { p.join(DATASET_FILE) } else { p.clone() }),
        ..inputs.clone()
    };
    let mut files = Vec::new();
    for (role, path) in inputs_resolved.listed() {
        files.push(InputFile {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: hash_input(path)?,
        });
    }
    RunManifest {
        command: cmd.name().into(),
        argv,
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        config_hash: config.hash(),
        config: config.clone(),
        inputs: files,
        outputs: planned_outputs(cmd, config),
    }
    .write(out)?;
    log::info!("{} -> {}", cmd.name(), out.display());
    match cmd {
        CommandKind::Gen => gen(config, out),
        CommandKind::Train => train(config, &inputs_resolved, out),
        CommandKind::Eval => eval(config, &inputs_resolved, out),
        CommandKind::Replay => replay(config, &inputs_resolved, out),
        CommandKind::GradCheck => run_grad_check(config, out),
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioMeta {
    airport: String,
    seed: u64,
}

pub fn write_scenario_dir(dir: &Path, s: &Scenario) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_flights(fs::File::create(dir.join("flights.csv"))?, &s.flights)?;
    write_airport_quarters(fs::File::create(dir.join("airport_quarters.csv"))?, &s.quarters)?;
    write_gdp_advisories(
        fs::File::create(dir.join("gdp_advisories.csv"))?,
        std::slice::from_ref(&s.gdp),
    )?;
    let meta = ScenarioMeta {
        airport: s.airport.clone(),
        seed: s.seed,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn load_scenario_dir(dir: &Path) -> Result<Scenario> {
    let read = |name: &str| read_bytes(&dir.join(name));
    let flights = parse_flights(read("flights.csv")?.as_slice())?;
    let quarters = parse_airport_quarters(read("airport_quarters.csv")?.as_slice())?;
    let mut advisories = parse_gdp_advisories(read("gdp_advisories.csv")?.as_slice())?;
    if advisories.len() != 1 {
        return Err(Invalid(format!("expected one advisory, found {}", advisories.len())).into());
    }
    let gdp = advisories.remove(0);
    let meta = match dir.join("meta.json") {
        p if p.exists() => {
            serde_json::from_slice(&read_bytes(&p)?).map_err(|e| Invalid(format!("bad meta.json: {e}")))?
        }
        _ => ScenarioMeta {
            airport: gdp.airport.clone(),
            seed: 0,
        },
    };
    Ok(build_scenario(&meta.airport, quarters, flights, gdp, meta.seed)?)
}

fn gen(config: &RunConfig, out: &Path) -> Result<()> {
    let scenarios: Vec<Scenario> = (0..config.n_scenarios)
        .map(|i| gen_scenario(&config.gen.with_seed(derive_seed(config.seed, i as u64))))
        .collect::<Result<_, _>>()?;
    for (i, s) in scenarios.iter().enumerate() {
        write_scenario_dir(&out.join(scenario_dir(i)), s)?;
    }
    let expert = ScriptedExpert {
        paar_max: config.env.paar_max,
        ..Default::default()
    };
    let dataset = build_dataset(&scenarios, &expert, config.noise, config.seed, &config.env)?;
    let mut w = BufWriter::new(fs::File::create(out.join(DATASET_FILE))?);
    dataset.write_to(&mut w)?;
    w.flush()?;
    println!(
        "wrote {} scenarios and {} transitions to {}",
        scenarios.len(),
        dataset.transitions.len(),
        out.display()
    );
    Ok(())
}

fn load_dataset(inputs: &Inputs) -> Result<Dataset> {
    let path = inputs
        .data
        .as_ref()
        .ok_or_else(|| Invalid("train needs --data".into()))?;
    let bytes = read_bytes(path)?;
    Ok(Dataset::read_from(&mut bytes.as_slice())?)
}

fn train(config: &RunConfig, inputs: &Inputs, out: &Path) -> Result<()> {
    let dataset = load_dataset(inputs)?;
    let source = EvalSource {
        gen: config.gen.clone(),
        env: config.env.clone(),
    };
    let hook = Some(EvalHook {
        source: &source,
        seed: eval_seed(config.seed),
    });
    let paar_max = config.env.paar_max;
    let (agent, log) = match config.algo {
        Algo::Bc => {
            let spec = config.network.spec(LOOKAHEAD)?;
            let (p, log) = bc_train(&dataset, &spec, &config.train, paar_max, hook)?;
            (Agent::Bc(p), log)
        }
        Algo::Cql => {
            let spec = config.network.spec(LOOKAHEAD * (paar_max as usize + 1))?;
            let (a, log) = cql_train(&dataset, &spec, &config.cql, &config.train, paar_max, hook)?;
            (Agent::Cql(a), log)
        }
    };
    let mut w = BufWriter::new(fs::File::create(out.join(CHECKPOINT_FILE))?);
    write_agent(&mut w, &agent)?;
    w.flush()?;
    fs::write(out.join("train_log.csv"), train_log_csv(&log))?;
    let curve = emit_learning_curve(&log)?;
    fs::write(out.join("learning_curve.csv"), &curve.csv)?;
    fs::write(out.join("learning_curve.svg"), &curve.svg)?;
    let last = log.last().expect("at least one iteration");
    println!(
        "trained {} for {} iterations; final loss {:.6}, eval mean {:.1}",
        agent.kind(),
        last.iter,
        last.train_loss,
        curve.points.last().unwrap().mean
    );
    Ok(())
}

fn load_policy(config: &RunConfig, inputs: &Inputs) -> Result<Box<dyn Policy>> {
    if let Some(path) = &inputs.checkpoint {
        let bytes = read_bytes(path)?;
        let agent = read_agent(&mut BufReader::new(bytes.as_slice()))?;
        if agent.paar_max() > config.env.paar_max {
            return Err(Invalid(format!(
                "checkpoint rates go up to {}, environment allows {}",
                agent.paar_max(),
                config.env.paar_max
            ))
            .into());
        }
        return Ok(Box::new(agent));
    }
    match config.baseline {
        Some(b) => Ok(baseline_policy(b.kind, b.rate, config.env.paar_max)?),
        None => Err(Invalid("need --checkpoint or --baseline".into()).into()),
    }
}

#[derive(Serialize)]
struct EvalSummary {
    episodes: usize,
    mean: f64,
    std: f64,
    episode_std: f64,
}

fn eval(config: &RunConfig, inputs: &Inputs, out: &Path) -> Result<()> {
    let policy = load_policy(config, inputs)?;
    let source = EvalSource {
        gen: config.gen.clone(),
        env: config.env.clone(),
    };
    let r = evaluate(
        policy.as_ref(),
        &source,
        config.train.eval_batch_size,
        eval_seed(config.seed),
    )?;
    let mut csv = String::from("episode,return\n");
    for (i, ret) in r.returns.iter().enumerate() {
        csv.push_str(&format!("{i},{ret}\n"));
    }
    fs::write(out.join("eval.csv"), csv)?;
    let summary = EvalSummary {
        episodes: r.returns.len(),
        mean: r.mean,
        std: r.std,
        episode_std: r.episode_std,
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "mean return {:.1} ± {:.1} over {} episodes",
        r.mean,
        r.std,
        r.returns.len()
    );
    Ok(())
}

fn replay(config: &RunConfig, inputs: &Inputs, out: &Path) -> Result<()> {
    let scenario = match &inputs.scenario {
        Some(dir) => load_scenario_dir(dir)?,
        None => gen_scenario(&config.gen)?,
    };
    let policy = load_policy(config, inputs)?;
    let report = emit_gdp_report(&scenario, policy.as_ref(), &config.env)?;
    fs::write(out.join("trace.jsonl"), report.trace_jsonl()?)?;
    fs::write(out.join("report_quarters.csv"), report.quarters_csv())?;
    fs::write(out.join("report_totals.csv"), report.totals_csv())?;
    fs::write(out.join("report.svg"), report.svg())?;
    let t = report.totals;
    println!(
        "planned ground delay {} h, realized ground delay {} h, airborne delay {} h, return {:.1}",
        t.planned_gd_hours(),
        t.realized_gd_hours(),
        t.realized_ad_hours(),
        report.trace.total_return
    );
    Ok(())
}

#[derive(Serialize)]
struct GradCheckResult {
    layer_sizes: Vec<usize>,
    max_relative_error: f64,
}

fn run_grad_check(config: &RunConfig, out: &Path) -> Result<()> {
    // Policy network only: with 136 outputs the loss is large enough that
    // central-difference roundoff alone approaches the threshold.
    let spec = config.network.spec(LOOKAHEAD)?;
    let e = grad_check(&spec, config.seed)?;
    let result = GradCheckResult {
        layer_sizes: spec.layer_sizes.clone(),
        max_relative_error: e,
    };
    fs::write(
        out.join("grad_check.json"),
        serde_json::to_string_pretty(&result)? + "\n",
    )?;
    println!("{:?}: max relative error {e:.3e}", spec.layer_sizes);
    if !(e < GRAD_CHECK_LIMIT) {
        return Err(Invalid(format!("gradient check failed: {e:.3e} >= {GRAD_CHECK_LIMIT:e}")).into());
    }
    Ok(())
}
