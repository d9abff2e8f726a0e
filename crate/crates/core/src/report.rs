//! Run reports and plot-ready CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barrier;
use crate::config::RunConfig;
use crate::linalg::distance;
use crate::oracle::{ProblemSpec, Violation};
use crate::solver::{KktReport, SolveReport, SolverError, SubproblemStatus};

/// Outcome of one seeded replicate.
#[derive(Debug)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub report: Option<SolveReport>,
    /// Round in which the slack ran out, if it did.
    pub exhausted_round: Option<usize>,
    pub error: Option<String>,
}

impl ReplicateOutcome {
    pub fn from_result(
        replicate: usize,
        seed: u64,
        result: Result<SolveReport, SolverError>,
    ) -> Self {
        match result {
            Ok(report) => Self {
                replicate,
                seed,
                report: Some(report),
                exhausted_round: None,
                error: None,
            },
            Err(SolverError::SlackExhausted { round, report }) => Self {
                replicate,
                seed,
                error: Some(format!("slack exhausted in round {round}")),
                report: Some(*report),
                exhausted_round: Some(round),
            },
            Err(e) => Self {
                replicate,
                seed,
                report: None,
                exhausted_round: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub eta: f64,
    pub iterations: usize,
    pub iteration_cap: usize,
    pub status: SubproblemStatus,
    pub measurements: u64,
    pub selected_t: Option<usize>,
    pub selected_x: Option<Vec<f64>>,
    pub selected_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub rounds: Vec<RoundSummary>,
    pub selected_x: Option<Vec<f64>>,
    /// Ground-truth objective at the selected iterate.
    pub selected_objective: Option<f64>,
    pub kkt: Option<KktReport>,
    pub measurements: u64,
    /// `sum_t (d + 1) n_t` over the trajectory.
    pub expected_measurements: u64,
    pub min_slack: f64,
    pub min_true_slack: f64,
    pub max_dual: f64,
    pub violations: usize,
    pub trajectory_file: Option<String>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replicates: usize,
    pub completed: usize,
    pub safe_runs: usize,
    pub total_violations: usize,
    pub start_objective: f64,
    pub mean_selected_objective: Option<f64>,
    pub runs_improving_objective: usize,
    /// Largest distance of a selected iterate from their mean.
    pub cluster_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub problem: String,
    pub dimension: usize,
    pub constraints: usize,
    pub warnings: Vec<String>,
    pub aggregate: Aggregate,
    pub replicates: Vec<ReplicateSummary>,
}

impl RunReport {
    pub fn new(
        config: &RunConfig,
        problem: &ProblemSpec,
        outcomes: &[ReplicateOutcome],
        warnings: Vec<String>,
    ) -> Self {
        let d = problem.dimension;
        let replicates: Vec<ReplicateSummary> =
            outcomes.iter().map(|o| summarize(problem, o)).collect();
        let selected: Vec<&Vec<f64>> = replicates
            .iter()
            .filter_map(|r| r.selected_x.as_ref())
            .collect();
        let objectives: Vec<f64> = replicates
            .iter()
            .filter_map(|r| r.selected_objective)
            .collect();
        let start_objective = problem.objective.value(&problem.start);
        let cluster_radius = (!selected.is_empty()).then(|| {
            let mut mean = vec![0.0; d];
            for x in &selected {
                for j in 0..d {
                    mean[j] += x[j] / selected.len() as f64;
                }
            }
            selected
                .iter()
                .map(|x| distance(x, &mean))
                .fold(0.0, f64::max)
        });
        let aggregate = Aggregate {
            replicates: replicates.len(),
            completed: replicates.iter().filter(|r| r.error.is_none()).count(),
            safe_runs: outcomes
                .iter()
                .filter(|o| o.report.as_ref().is_some_and(|r| r.is_safe()))
                .count(),
            total_violations: replicates.iter().map(|r| r.violations).sum(),
            start_objective,
            mean_selected_objective: (!objectives.is_empty())
                .then(|| objectives.iter().sum::<f64>() / objectives.len() as f64),
            runs_improving_objective: objectives.iter().filter(|c| **c < start_objective).count(),
            cluster_radius,
        };
        Self {
            config: config.clone(),
            problem: problem.name.clone(),
            dimension: d,
            constraints: problem.constraint_count(),
            warnings,
            aggregate,
            replicates,
        }
    }

    pub fn write_json(&self, path: &Path) -> crate::Result<()> {
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}

fn summarize(problem: &ProblemSpec, outcome: &ReplicateOutcome) -> ReplicateSummary {
    let d = problem.dimension;
    let Some(report) = &outcome.report else {
        return ReplicateSummary {
            replicate: outcome.replicate,
            seed: outcome.seed,
            error: outcome.error.clone(),
            rounds: Vec::new(),
            selected_x: None,
            selected_objective: None,
            kkt: None,
            measurements: 0,
            expected_measurements: 0,
            min_slack: f64::NAN,
            min_true_slack: f64::NAN,
            max_dual: f64::NAN,
            violations: 0,
            trajectory_file: None,
            wall_clock_seconds: 0.0,
        };
    };
    let selected = report.selected();
    ReplicateSummary {
        replicate: outcome.replicate,
        seed: outcome.seed,
        error: outcome.error.clone(),
        rounds: report
            .rounds
            .iter()
            .map(|r| RoundSummary {
                round: r.round,
                eta: r.eta,
                iterations: r.trajectory.len(),
                iteration_cap: r.iteration_cap,
                status: r.status,
                measurements: r.measurements,
                selected_t: r.selected.map(|k| r.trajectory[k].t),
                selected_x: r.selected.map(|k| r.trajectory[k].x.clone()),
                selected_score: r.selected.map(|k| r.trajectory[k].score),
            })
            .collect(),
        selected_x: selected.map(|s| s.x.clone()),
        selected_objective: selected.map(|s| problem.objective.value(&s.x)),
        kkt: report.kkt.clone(),
        measurements: report.measurements,
        expected_measurements: report.expected_measurements(d),
        min_slack: report.min_slack,
        min_true_slack: report.min_true_slack,
        max_dual: report.max_dual,
        violations: report.violations.len(),
        trajectory_file: Some(trajectory_file_name(outcome.replicate)),
        wall_clock_seconds: report.wall_clock_seconds,
    }
}

pub fn trajectory_file_name(replicate: usize) -> String {
    format!("trajectory_{replicate:03}.csv")
}

fn csv_writer(path: &Path) -> crate::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// `t, x_1..x_d, nu, n, gamma, gnorm, slack, barrier, score, cum_measurements, round, eta`.
pub fn write_trajectory<W: Write>(writer: W, report: &SolveReport, d: usize) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|j| format!("x_{j}")));
    for h in [
        "nu",
        "n",
        "gamma",
        "gnorm",
        "slack",
        "barrier",
        "score",
        "cum_measurements",
        "round",
        "eta",
    ] {
        header.push(h.into());
    }
    w.write_record(&header)?;
    for round in &report.rounds {
        for r in &round.trajectory {
            let mut row = vec![r.t.to_string()];
            row.extend(r.x.iter().map(|v| fmt(*v)));
            row.extend([
                fmt(r.nu),
                r.n.to_string(),
                fmt(r.gamma),
                fmt(r.gnorm),
                fmt(r.slack),
                fmt(r.barrier),
                fmt(r.score),
                r.cum_measurements.to_string(),
                round.round.to_string(),
                fmt(round.eta),
            ]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes every file of a run into `dir`:
///
/// - `trajectory_RRR.csv` per replicate,
/// - `ledger_RRR.csv` per replicate when requested,
/// - `objective.csv`: true and estimated objective per iteration,
/// - `boundary.csv`: measured and true distance to the boundary per iteration,
/// - `path.csv`: iterates for two-dimensional problems,
/// - `audit.csv`: every ground-truth violation,
/// - `report.json`.
pub fn write_run(
    dir: &Path,
    problem: &ProblemSpec,
    outcomes: &[ReplicateOutcome],
    report: &RunReport,
    ledgers: bool,
) -> crate::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let d = problem.dimension;
    let mut written = Vec::new();

    let mut objective = csv_writer(&dir.join("objective.csv"))?;
    objective.write_record(["replicate", "t", "round", "objective_estimate", "objective"])?;
    let mut boundary = csv_writer(&dir.join("boundary.csv"))?;
    boundary.write_record(["replicate", "t", "round", "slack", "true_slack"])?;
    let mut path = if d == 2 {
        let mut w = csv_writer(&dir.join("path.csv"))?;
        w.write_record(["replicate", "t", "round", "x_1", "x_2", "selected"])?;
        Some(w)
    } else {
        None
    };
    let mut audit = csv_writer(&dir.join("audit.csv"))?;
    audit.write_record(["replicate", "entry", "t", "l", "constraint", "magnitude"])?;

    for o in outcomes {
        let Some(run) = &o.report else { continue };
        let file = dir.join(trajectory_file_name(o.replicate));
        write_trajectory(BufWriter::new(File::create(&file)?), run, d)?;
        written.push(file);
        if ledgers {
            if let Some(ledger) = &run.ledger {
                let file = dir.join(format!("ledger_{:03}.csv", o.replicate));
                ledger.write_csv(BufWriter::new(File::create(&file)?), Some(problem))?;
                written.push(file);
            }
        }
        for round in &run.rounds {
            for (k, r) in round.trajectory.iter().enumerate() {
                let rep = o.replicate.to_string();
                let t = r.t.to_string();
                let rd = round.round.to_string();
                objective.write_record([
                    &rep,
                    &t,
                    &rd,
                    &fmt(r.objective),
                    &fmt(problem.objective.value(&r.x)),
                ])?;
                let true_slack = barrier::min_slack(&problem.constraint_values(&r.x));
                boundary.write_record([&rep, &t, &rd, &fmt(r.slack), &fmt(true_slack)])?;
                if let Some(w) = path.as_mut() {
                    let selected = if round.selected == Some(k) { "1" } else { "0" };
                    w.write_record([&rep, &t, &rd, &fmt(r.x[0]), &fmt(r.x[1]), selected])?;
                }
            }
        }
        for v in &run.violations {
            write_violation(&mut audit, o.replicate, v)?;
        }
    }
    objective.flush()?;
    boundary.flush()?;
    audit.flush()?;
    written.push(dir.join("objective.csv"));
    written.push(dir.join("boundary.csv"));
    if let Some(mut w) = path {
        w.flush()?;
        written.push(dir.join("path.csv"));
    }
    written.push(dir.join("audit.csv"));
    let json = dir.join("report.json");
    report.write_json(&json)?;
    written.push(json);
    Ok(written)
}

fn write_violation<W: Write>(
    w: &mut csv::Writer<W>,
    replicate: usize,
    v: &Violation,
) -> crate::Result<()> {
    w.write_record([
        replicate.to_string(),
        v.entry.to_string(),
        v.t.to_string(),
        v.l.to_string(),
        v.constraint.to_string(),
        fmt(v.magnitude),
    ])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use crate::solver::{solve, SolverConfig};

    #[test]
    fn trajectory_header_and_rows() {
        let p = problems::linear_1d();
        let r = solve(&p, &SolverConfig::exact(0.1).with_iterations(3)).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &r, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("t,x_1,nu,n,gamma,gnorm,slack,barrier,score,cum_measurements,round,eta")
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn aggregate_counts() {
        let p = problems::linear_1d();
        let config = RunConfig::default();
        let outcomes: Vec<_> = (0..2)
            .map(|k| {
                let c = SolverConfig::exact(0.1).with_iterations(50).with_seed(k);
                ReplicateOutcome::from_result(k as usize, k, solve(&p, &c))
            })
            .collect();
        let report = RunReport::new(&config, &p, &outcomes, Vec::new());
        assert_eq!(report.aggregate.completed, 2);
        assert_eq!(report.aggregate.safe_runs, 2);
        assert_eq!(report.aggregate.runs_improving_objective, 2);
        assert!(report.aggregate.cluster_radius.unwrap() < 1e-12);
    }
}
