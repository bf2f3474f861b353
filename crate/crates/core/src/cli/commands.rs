use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::output::{write_atomic, write_metrics_csv, MetricsRow};
use super::scenario::{env_seed, LatencySpec, ScenarioFile, RANDOM_LINK_MS};
use super::{BenchArgs, Cli, CliError, CollusionArgs, Command, EdgeTrainArgs, InitTrainArgs, SweepArgs};
use crate::analysis::{
    attack_graph, masked_k, run_collusion, verify_table4, CollusionRun, CollusionScenario, Table4Case,
};
use crate::data::{generate, metrics, GeneratorConfig};
use crate::exec::Execution;
use crate::federation::{
    base_digest, personalize, run_edge_phase, run_init_phase, sweep_local_updates, synthetic_parties, FedConfig,
    FedError, LocalityScanner, Party, PhaseOutcome,
};
use crate::model::{distill_base, loss_mse, predict, Batch, Checkpoint, DistillConfig, NetworkSpec, OptimizerKind, ParamVector};
use crate::protocols::ProtocolKind;
use crate::simnet::{LatencyMatrix, SimNet};

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::InitTrain(a) => init_train(&a),
        Command::EdgeTrain(a) => edge_train(&a),
        Command::ProtocolBench(a) => protocol_bench(&a),
        Command::Collusion(a) => collusion(&a),
        Command::SweepLocalUpdates(a) => sweep(&a),
    }
}

fn flag_or_env(flag: Option<u64>) -> Result<u64, CliError> {
    flag.map_or_else(env_seed, Ok)
}

fn parties_for(s: &ScenarioFile, seed: u64, exec: Execution) -> Result<Vec<Party>, CliError> {
    Ok(synthetic_parties(s.parties, &s.generator(seed), s.data.first_party, exec)?)
}

fn load_checkpoint(path: &Path, spec: &NetworkSpec) -> Result<Checkpoint, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Checkpoint(path.to_path_buf(), e.to_string()))?;
    Checkpoint::from_bytes(spec, &bytes).map_err(|e| CliError::Checkpoint(path.to_path_buf(), e.to_string()))
}

fn write_run(out: &Path, outcome: &PhaseOutcome, rows: &[MetricsRow]) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let ckpt = Checkpoint {
        round: outcome.history.len() as u64,
        params: outcome.params.clone(),
    };
    write_atomic(&out.join("model.ckpt"), |w| w.write_all(&ckpt.to_bytes()))?;
    write_metrics_csv(&out.join("metrics.csv"), rows)?;
    write_atomic(&out.join("transcript.jsonl"), |w| outcome.transcript.write_jsonl(w))?;
    Ok(())
}

fn report_run(s: &ScenarioFile, parties: &[Party], outcome: &PhaseOutcome) -> Result<(), CliError> {
    let hits = LocalityScanner::from_parties(&s.fed.codec()?, parties).scan(&outcome.transcript);
    if let Some(last) = outcome.history.last() {
        println!(
            "rounds {}  val accuracy {:.4}  f1 {:.4}  messages {}  bytes {}",
            last.round,
            last.val_accuracy,
            last.f1,
            outcome.transcript.total_sent(),
            outcome.transcript.total_bytes()
        );
    }
    println!("data locality scan: {} hits", hits.len());
    Ok(())
}

fn init_train(a: &InitTrainArgs) -> Result<i32, CliError> {
    let s = ScenarioFile::load(&a.scenario)?;
    let seed = s.resolve_seed(a.seed.seed)?;
    let parties = parties_for(&s, seed, s.fed.execution)?;
    let init = ParamVector::glorot(&s.model, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut net = SimNet::new(s.latency.resolve(s.parties, seed)?);
    let outcome = run_init_phase(&parties, &s.model, &init, &s.fed, seed, &mut net)?;
    let rows: Vec<MetricsRow> = outcome.history.iter().map(MetricsRow::from).collect();
    write_run(&a.out, &outcome, &rows)?;
    report_run(&s, &parties, &outcome)?;
    Ok(0)
}

/// Test-split metrics of `params` on one party, labelled `label`.
fn party_row(label: String, spec: &NetworkSpec, params: &ParamVector, test: &Batch) -> Result<MetricsRow, CliError> {
    let pred = predict(spec, params, test.inputs.view())?;
    let m = metrics(&pred, &test.labels()).map_err(FedError::from)?;
    Ok(MetricsRow {
        round: label,
        global_loss: loss_mse(spec, params, test)?,
        val_accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        messages: 0,
        bytes: 0,
        latency_ms: 0.0,
    })
}

fn edge_train(a: &EdgeTrainArgs) -> Result<i32, CliError> {
    let s = ScenarioFile::load(&a.scenario)?;
    let seed = s.resolve_seed(a.seed.seed)?;
    let ckpt = load_checkpoint(&a.base, &s.model)?;
    let parties = parties_for(&s, seed, s.fed.execution)?;
    let (spec, base) = if a.distill {
        let student = s
            .student
            .clone()
            .ok_or_else(|| CliError::Schema("--distill needs a `student` network in the scenario".into()))?;
        let transfer = generate(&GeneratorConfig {
            n_samples: s.distill.transfer_samples,
            party: s.distill.transfer_party,
            ..s.generator(seed)
        })
        .map_err(FedError::from)?;
        let cfg = DistillConfig {
            epochs: s.distill.epochs,
            alpha: s.distill.alpha,
            optimizer: OptimizerKind::Adam,
            seed,
        };
        let d = distill_base(&s.model, &ckpt.params, &student, &transfer.features, &cfg, None)?;
        println!(
            "distilled base: loss {:.6} -> {:.6}",
            d.loss_curve.first().copied().unwrap_or(0.0),
            d.loss_curve.last().copied().unwrap_or(0.0)
        );
        (student, d.student)
    } else {
        (s.model.clone(), ckpt.params)
    };
    println!(
        "head parameters: {} of {} ({:.4}%)",
        spec.head_param_count(),
        spec.param_count(),
        100.0 * spec.head_fraction()
    );
    let digest = base_digest(&base);
    let mut net = SimNet::new(s.latency.resolve(s.parties, seed)?);
    let outcome = run_edge_phase(&parties, &spec, &base, &s.fed, seed, &mut net)?;
    if base_digest(&outcome.params) != digest {
        return Err(CliError::Io("base parameters changed during edge training".into()));
    }
    println!("base frozen: ok");
    let mut rows: Vec<MetricsRow> = outcome.history.iter().map(MetricsRow::from).collect();
    if a.personalize {
        let pcfg = s.personalize_config(seed);
        let (mut global_acc, mut personal_acc) = (0.0, 0.0);
        for p in &parties {
            let tuned = personalize(&spec, &outcome.params, p, &pcfg)?;
            let row = party_row(format!("p{}", p.id), &spec, &tuned, &p.test)?;
            global_acc += party_row(String::new(), &spec, &outcome.params, &p.test)?.val_accuracy;
            personal_acc += row.val_accuracy;
            rows.push(row);
        }
        let n = parties.len() as f64;
        println!(
            "mean party test accuracy: global head {:.4}, personalized {:.4}",
            global_acc / n,
            personal_acc / n
        );
    }
    write_run(&a.out, &outcome, &rows)?;
    report_run(&s, &parties, &outcome)?;
    Ok(0)
}

fn protocol_bench(a: &BenchArgs) -> Result<i32, CliError> {
    let seed = flag_or_env(a.seed.seed)?;
    if a.n.iter().any(|&n| n < 2) || a.matrices == 0 || a.dim == 0 {
        return Err(CliError::Schema("need n >= 2, at least one matrix and dim >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let named = LatencySpec::Named(a.latency.clone());
    let cases = a
        .n
        .iter()
        .map(|&n| {
            let mut latencies = vec![named.resolve(n, seed)?];
            latencies.extend((1..a.matrices).map(|_| LatencyMatrix::random(n, RANDOM_LINK_MS.0, RANDOM_LINK_MS.1, &mut rng)));
            Ok(Table4Case { n, latencies })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = verify_table4(&cases, a.k, a.dim, seed, Execution::default())?;
    print!("{}", report.to_text());
    if let Some(path) = &a.json {
        write_atomic(path, |w| serde_json::to_writer_pretty(&mut *w, &report).map_err(Into::into))?;
    }
    Ok(if report.pass { 0 } else { 1 })
}

/// Resolves a colluder list such as `1,2,m`, `neighbors,m` or `neighbors-1,m`
/// into data-holder ids and whether the mediator joins.
pub fn parse_colluders(
    spec: &str,
    protocol: ProtocolKind,
    n: usize,
    k: usize,
    victim: usize,
) -> Result<(BTreeSet<usize>, bool), CliError> {
    let neighborhood = || -> Result<Vec<usize>, CliError> {
        Ok(match protocol {
            ProtocolKind::Masked => attack_graph(n, k, 0)?.neighbors(victim),
            ProtocolKind::Stsmc => {
                let mut v = vec![(victim + n - 1) % n, (victim + 1) % n];
                v.dedup();
                v
            }
            ProtocolKind::Shamir => (0..n).filter(|&i| i != victim).take(k).collect(),
            ProtocolKind::Nosmc => Vec::new(),
        })
    };
    let mut set = BTreeSet::new();
    let mut mediator = false;
    for tok in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok {
            "m" | "mediator" => mediator = true,
            "neighbors" => set.extend(neighborhood()?),
            "neighbors-1" => {
                let mut v = neighborhood()?;
                v.pop();
                set.extend(v);
            }
            id => {
                let id: usize = id
                    .parse()
                    .map_err(|_| CliError::Schema(format!("unknown colluder {id:?}")))?;
                set.insert(id);
            }
        }
    }
    Ok((set, mediator))
}

fn collusion(a: &CollusionArgs) -> Result<i32, CliError> {
    let seed = flag_or_env(a.seed.seed)?;
    let protocol: ProtocolKind = a.protocol.into();
    if a.n < 2 {
        return Err(CliError::Schema("need at least 2 parties".into()));
    }
    if protocol == ProtocolKind::Masked && masked_k(a.n, a.k) != a.k {
        return Err(CliError::Schema(format!("no {}-regular neighbor graph on {} parties", a.k, a.n)));
    }
    let (colluders, mediator) = parse_colluders(&a.colluders, protocol, a.n, a.k, a.victim)?;
    let scenario = CollusionScenario {
        protocol,
        n: a.n,
        k: a.k,
        victim: a.victim,
        colluders,
        mediator,
        trials: a.trials,
    };
    scenario.validate().map_err(|e| CliError::Schema(e.to_string()))?;
    let run = CollusionRun {
        dim: a.dim,
        seed,
        execution: Execution::default(),
    };
    let report = run_collusion(&scenario, &run)?;
    println!(
        "{} n={} k={} victim={} colluders={:?}{}: {}",
        protocol,
        a.n,
        a.k,
        a.victim,
        report.colluders,
        if mediator { " + mediator" } else { "" },
        report.verdict()
    );
    println!(
        "recovered {}/{} trials, residual entropy {:.3} bits per element",
        report.recovered_trials, report.trials, report.residual_entropy
    );
    if let Some(path) = &a.json {
        write_atomic(path, |w| serde_json::to_writer_pretty(&mut *w, &report).map_err(Into::into))?;
    }
    Ok(0)
}

fn sweep(a: &SweepArgs) -> Result<i32, CliError> {
    let s = ScenarioFile::load(&a.scenario)?;
    let seed0 = s.resolve_seed(a.seed.seed)?;
    if a.e.is_empty() || a.e.contains(&0) || a.seeds == 0 {
        return Err(CliError::Schema("need at least one seed and local-update counts >= 1".into()));
    }
    let base = a.base.as_deref().map(|p| load_checkpoint(p, &s.model)).transpose()?;
    let latency = s.latency.resolve(s.parties, seed0)?;
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| seed0.wrapping_add(i)).collect();
    let rows = sweep_local_updates(&a.e, &seeds, a.threshold, s.fed.execution, |e, seed| {
        let parties = synthetic_parties(s.parties, &s.generator(seed), s.data.first_party, Execution::Sequential)?;
        // Every run starts from a freshly initialized head over the frozen base.
        let fresh = ParamVector::glorot(&s.model, &mut ChaCha8Rng::seed_from_u64(seed));
        let init = match &base {
            Some(c) => {
                let mut p = c.params.clone();
                p.set_head(fresh.head())?;
                p
            }
            None => fresh,
        };
        let cfg = FedConfig {
            local_updates: e,
            keep_transcript: false,
            execution: Execution::Sequential,
            ..s.fed.clone()
        };
        let mut net = SimNet::new(latency.clone());
        Ok(run_edge_phase(&parties, &s.model, &init, &cfg, seed, &mut net)?.history)
    })?;
    let fmt = |m: Option<f64>| m.map_or_else(|| "NR".to_string(), |v| v.to_string());
    write_atomic(&a.out, |w| {
        writeln!(w, "E,median_rounds,seeds")?;
        for r in &rows {
            writeln!(w, "{},{},{}", r.e, fmt(r.median_rounds), r.seeds)?;
        }
        Ok(())
    })?;
    println!("{:>4} {:>14} {:>6}", "E", "median_rounds", "seeds");
    for r in &rows {
        println!("{:>4} {:>14} {:>6}", r.e, fmt(r.median_rounds), r.seeds);
    }
    Ok(0)
}
