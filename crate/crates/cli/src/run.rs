//! Mode dispatch and report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gw2i_core::asymptotics::{predict_tail, Base, ImmigrationVariant, Prediction, PredictError, TailPrediction};
use gw2i_core::process::{exact_distribution, simulate_ensemble, EnsembleSummary, SimError};
use gw2i_core::tailstats::{
    check_random_sum, empirical_survival, ratio_diagnostic, RandomSumRun, StatsError, Verdict,
};

use crate::config::{ExperimentConfig, Mode};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// What a run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// Lines for standard output, verdict lines included.
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
    /// `None` for modes without a verdict.
    pub verdict: Option<Verdict>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Some(Verdict::Fail) => 2,
            _ => 0,
        }
    }

    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn record_verdict(&mut self, v: Verdict) {
        if self.verdict != Some(Verdict::Fail) {
            self.verdict = Some(v);
        }
    }
}

/// Runs `config`; `workers` only affects speed.
pub fn run(config: &ExperimentConfig, workers: Option<usize>) -> Result<Outcome, RunError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut out = Outcome::default();
    match config.mode {
        Mode::Simulate => {
            let summary = simulate_ensemble(&config.scenario, workers)?;
            out.write(dir, "ensemble.csv", &ensemble_csv(&summary))?;
            out.lines.push(format!(
                "simulated {} replicates of X_{} (seed {}, digest {})",
                summary.replicates, config.scenario.horizon, summary.master_seed, summary.digest
            ));
            write_exact(config, &mut out)?;
        }
        Mode::Predict => {
            let prediction = predict(config, config.rveps_variant)?;
            out.warnings.extend(prediction.warnings.iter().cloned());
            out.write(dir, "prediction.csv", &prediction_csv(&prediction.tail))?;
            out.write(dir, "prediction_eval.csv", &prediction_eval_csv(config, &prediction.tail))?;
            out.lines.push(format!("prediction {}", prediction.tail.provenance));
            write_exact(config, &mut out)?;
        }
        Mode::Verify => verify(config, workers, &mut out)?,
        Mode::CheckAppendix => check_appendix(config, workers, &mut out)?,
    }
    Ok(out)
}

fn predict(config: &ExperimentConfig, variant: ImmigrationVariant) -> Result<Prediction, PredictError> {
    let profile = config.profile.as_ref().expect("validated config has a profile");
    predict_tail(&config.scenario, profile, config.scenario.horizon, variant)
}

fn verify(config: &ExperimentConfig, workers: Option<usize>, out: &mut Outcome) -> Result<(), RunError> {
    let dir = &config.output_dir;
    let prediction = predict(config, config.rveps_variant)?;
    out.warnings.extend(prediction.warnings.iter().cloned());
    let summary = simulate_ensemble(&config.scenario, workers)?;
    out.write(dir, "ensemble.csv", &ensemble_csv(&summary))?;
    out.write(dir, "prediction.csv", &prediction_csv(&prediction.tail))?;
    let estimates = empirical_survival(&summary);
    let diag = ratio_diagnostic(&estimates, &prediction.tail, &config.scenario, config.window)?;
    out.write(dir, "report.csv", &diag.to_csv())?;
    let line = diag.verdict_line();
    out.write(dir, "verdict.txt", &format!("{line}\n"))?;
    out.lines.push(line);
    out.record_verdict(diag.verdict());

    let profile = config.profile.as_ref().expect("validated config has a profile");
    if profile.is_heavy(Base::Xi) || profile.is_heavy(Base::Eta) {
        let other = match config.rveps_variant {
            ImmigrationVariant::Consistent => ImmigrationVariant::Verbatim,
            ImmigrationVariant::Verbatim => ImmigrationVariant::Consistent,
        };
        let alt = predict(config, other)?;
        let alt_diag = ratio_diagnostic(&estimates, &alt.tail, &config.scenario, config.window)?;
        out.write(dir, &format!("prediction_{other}.csv"), &prediction_csv(&alt.tail))?;
        out.write(dir, &format!("report_{other}.csv"), &alt_diag.to_csv())?;
        out.lines.push(format!("{other}: {}", alt_diag.verdict_line()));
    }
    Ok(())
}

fn check_appendix(config: &ExperimentConfig, workers: Option<usize>, out: &mut Outcome) -> Result<(), RunError> {
    let run = RandomSumRun {
        master_seed: config.scenario.master_seed,
        replicates: config.scenario.replicates,
        thresholds: config.scenario.thresholds.clone(),
        workers,
    };
    for rs in &config.random_sums {
        let window = rs.window.unwrap_or(config.window);
        let diag = check_random_sum(&rs.tau, &rs.zeta, rs.case, &run, window)?;
        out.write(&config.output_dir, &format!("report_{}.csv", rs.case.name()), &diag.to_csv())?;
        out.lines.push(format!("{}: {}", rs.case.name(), diag.verdict_line()));
        out.record_verdict(diag.verdict());
    }
    Ok(())
}

fn write_exact(config: &ExperimentConfig, out: &mut Outcome) -> Result<(), RunError> {
    let Some(t) = config.truncation else {
        return Ok(());
    };
    let exact = exact_distribution(&config.scenario, t)?;
    let mut csv = String::from("value,probability\n");
    for (k, p) in exact.marginal().iter().enumerate() {
        writeln!(csv, "{k},{p}").expect("write to string");
    }
    out.write(&config.output_dir, "exact.csv", &csv)?;
    out.lines.push(format!("exact law of X_{} on [0,{t}], mass deficit {}", exact.time, exact.mass_deficit));
    Ok(())
}

/// `threshold,count,replicates`.
pub fn ensemble_csv(summary: &EnsembleSummary) -> String {
    let mut csv = String::from("threshold,count,replicates\n");
    for (x, c) in summary.thresholds.iter().zip(&summary.counts) {
        writeln!(csv, "{x},{c},{}", summary.replicates).expect("write to string");
    }
    csv
}

/// `provenance,base,coefficient`, one row per base.
pub fn prediction_csv(prediction: &TailPrediction) -> String {
    let mut csv = String::from("provenance,base,coefficient\n");
    for t in prediction.collapsed().terms {
        writeln!(csv, "{},{},{}", prediction.provenance, t.base, t.coefficient).expect("write to string");
    }
    csv
}

/// `x,predicted` at the scenario thresholds.
pub fn prediction_eval_csv(config: &ExperimentConfig, prediction: &TailPrediction) -> String {
    let mut csv = String::from("x,predicted\n");
    for &x in &config.scenario.thresholds {
        let p = prediction.evaluate(&config.scenario, x).expect("process bases resolve");
        writeln!(csv, "{x},{p}").expect("write to string");
    }
    csv
}
