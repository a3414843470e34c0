//! Benchmark matrix over environments, horizons and candidate counts.

use std::fmt::Write as _;

use footstep_core::{generate, plan, PlannerConfig, ScenarioKind, ScenarioSpec};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub environment: String,
    pub horizon: f64,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// Trials that returned a plan.
    pub completed: usize,
    pub converged: usize,
    pub mean_time: f64,
    pub std_time: f64,
    pub iterations_avg: f64,
    pub iterations_min: usize,
    pub iterations_max: usize,
    pub convergence_rate: f64,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub environment: String,
    pub k: usize,
    pub n: Vec<usize>,
    pub mean_time: Vec<f64>,
    /// Least-squares slope of log time against log N.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub trials: usize,
    pub machine: Machine,
    pub cells: Vec<Cell>,
    pub sweep: Option<Sweep>,
}

pub struct Matrix {
    pub environments: Vec<ScenarioKind>,
    pub horizons: Vec<f64>,
    pub ks: Vec<usize>,
    pub sweep_ns: Vec<usize>,
    pub trials: usize,
    pub dt: f64,
    pub base: PlannerConfig,
}

struct Trial {
    time: f64,
    iterations: usize,
    converged: bool,
}

fn run_trial(kind: ScenarioKind, horizon: f64, k: usize, seed: u64, m: &Matrix) -> Result<Trial, String> {
    let mut spec = ScenarioSpec::new(kind);
    spec.horizon = Some(horizon);
    spec.dt = m.dt;
    spec.seed = seed;
    let sc = generate(&spec).map_err(|e| e.to_string())?;
    let config = PlannerConfig {
        n: sc.config.n,
        dt: sc.config.dt,
        k,
        ..m.base.clone()
    };
    let p = plan(&sc.env, &sc.path, &config).map_err(|e| e.to_string())?;
    Ok(Trial {
        time: p.total_time,
        iterations: p.iterations_used,
        converged: p.converged,
    })
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn summarize(kind: ScenarioKind, horizon: f64, k: usize, m: &Matrix, results: Vec<Result<Trial, String>>) -> Cell {
    let trials = results.len();
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => errors.push(e),
        }
    }
    errors.sort();
    errors.dedup();
    let times: Vec<f64> = ok.iter().map(|t| t.time).collect();
    let (mean_time, std_time) = mean_std(&times);
    let iters: Vec<usize> = ok.iter().map(|t| t.iterations).collect();
    let converged = ok.iter().filter(|t| t.converged).count();
    Cell {
        environment: kind.name().into(),
        horizon,
        n: (horizon / m.dt).round() as usize,
        k,
        trials,
        completed: ok.len(),
        converged,
        mean_time,
        std_time,
        iterations_avg: if iters.is_empty() {
            f64::NAN
        } else {
            iters.iter().sum::<usize>() as f64 / iters.len() as f64
        },
        iterations_min: iters.iter().copied().min().unwrap_or(0),
        iterations_max: iters.iter().copied().max().unwrap_or(0),
        convergence_rate: converged as f64 / trials as f64,
        errors,
    }
}

pub fn run(m: &Matrix, threads: usize) -> Result<BenchmarkReport, String> {
    if m.trials == 0 {
        return Err("trials must be at least 1".into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;

    let mut jobs: Vec<(ScenarioKind, f64, usize)> = Vec::new();
    for &kind in &m.environments {
        for &h in &m.horizons {
            for &k in &m.ks {
                jobs.push((kind, h, k));
            }
        }
    }
    let sweep_k = m.ks.iter().copied().max().unwrap_or(m.base.k);
    let sweep_jobs: Vec<(ScenarioKind, f64, usize)> = m
        .sweep_ns
        .iter()
        .map(|&n| (ScenarioKind::FlatGround, n as f64 * m.dt, sweep_k))
        .collect();
    let all: Vec<(ScenarioKind, f64, usize)> = jobs.iter().chain(&sweep_jobs).copied().collect();

    let cells: Vec<Cell> = pool.install(|| {
        all.par_iter()
            .map(|&(kind, h, k)| {
                let results = (0..m.trials as u64).map(|seed| run_trial(kind, h, k, seed, m)).collect();
                summarize(kind, h, k, m, results)
            })
            .collect()
    });
    let (matrix, sweep_cells) = cells.split_at(jobs.len());
    let sweep = (!sweep_cells.is_empty()).then(|| Sweep {
        environment: ScenarioKind::FlatGround.name().into(),
        k: sweep_k,
        n: sweep_cells.iter().map(|c| c.n).collect(),
        mean_time: sweep_cells.iter().map(|c| c.mean_time).collect(),
        slope: log_log_slope(&sweep_cells.iter().map(|c| (c.n as f64, c.mean_time)).collect::<Vec<_>>()),
    });
    Ok(BenchmarkReport {
        trials: m.trials,
        machine: Machine {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            threads,
        },
        cells: matrix.to_vec(),
        sweep,
    })
}

impl BenchmarkReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "| environment | T (s) | N | K | time (s) | iterations avg [min, max] | converged |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|");
        for c in &self.cells {
            let time = if c.completed == 0 {
                "failed".to_string()
            } else {
                format!("{:.4} ± {:.4}", c.mean_time, c.std_time)
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {:.2} [{}, {}] | {}/{}{} |",
                c.environment,
                c.horizon,
                c.n,
                c.k,
                time,
                c.iterations_avg,
                c.iterations_min,
                c.iterations_max,
                c.converged,
                c.trials,
                if c.errors.is_empty() { "" } else { " (errors)" }
            );
        }
        if let Some(s) = &self.sweep {
            let _ = writeln!(out);
            let times: Vec<String> = s.mean_time.iter().map(|t| format!("{t:.4}")).collect();
            let _ = writeln!(
                out,
                "{} K={} sweep: N {:?}, mean time [{}] s, log-log slope {}",
                s.environment,
                s.k,
                s.n,
                times.join(", "),
                s.slope.map_or("n/a".to_string(), |v| format!("{v:.2}"))
            );
        }
        let _ = writeln!(
            out,
            "trials per cell: {}; machine: {} {}, {} cpus, {} threads",
            self.trials, self.machine.os, self.machine.arch, self.machine.cpus, self.machine.threads
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_deviation() {
        assert_eq!(mean_std(&[2.5]), (2.5, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 15.0, 20.0, 30.0].iter().map(|&n: &f64| (n, 0.01 * n.powf(1.7))).collect();
        assert!((log_log_slope(&pts).unwrap() - 1.7).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(10.0, 1.0)]), None);
    }
}
