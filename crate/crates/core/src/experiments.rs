//! Drivers shared by the command line and the acceptance tests: running a
//! named algorithm on an instance, step-size sweeps, timing benchmarks and
//! the small statistics used to summarise them.

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::mse;
use crate::loss::Problem;
use crate::penalty::PenaltySpec;
use crate::probgen::{gen_instance, InstanceSpec};
use crate::solver::{self, Init, SolveResult, SolverConfig, Status, StepSize, Thresholding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Ijt,
    Irls,
    Irl1,
    Soft,
    Hard,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Ijt => "ijt",
            Algo::Irls => "irls",
            Algo::Irl1 => "irl1",
            Algo::Soft => "soft",
            Algo::Hard => "hard",
        }
    }
}

/// Runs `algo` on `prob`. IJT and the soft/hard rules use `cfg`; the
/// reweighted baselines take `lambda` from `cfg` and `q` from `penalty`.
pub fn run_algo(
    prob: &Problem,
    algo: Algo,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
    baseline: &BaselineConfig,
) -> Result<SolveResult> {
    let noop = &mut |_: usize, _: &[f64]| {};
    match algo {
        Algo::Ijt => solver::threshold_solve(prob, Thresholding::Jump(*penalty), cfg, noop),
        Algo::Soft => solver::threshold_solve(prob, Thresholding::Soft, cfg, noop),
        Algo::Hard => solver::threshold_solve(prob, Thresholding::Hard, cfg, noop),
        Algo::Irls | Algo::Irl1 => {
            let bc = BaselineConfig {
                lambda: cfg.lambda,
                q: penalty.q(),
                ..*baseline
            };
            if algo == Algo::Irls {
                baselines::irls_solve(prob, &bc)
            } else {
                baselines::irl1_solve(prob, &bc)
            }
        }
    }
}

/// `Init::L1Solution` resolved once to a concrete vector, so repeated
/// solves on the same problem share it.
pub fn l1_start(prob: &Problem) -> Result<Vec<f64>> {
    let aty = prob.matrix().mul_t_vec(prob.y());
    let lam = 0.01 * crate::linalg::norm_inf(&aty);
    if lam == 0.0 {
        return Ok(vec![0.0; prob.cols()]);
    }
    Ok(baselines::fista_l1(prob, lam, 1e-8, 50_000)?.x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub q: f64,
    pub mu: f64,
    pub iterations: usize,
    pub mse: f64,
    pub converged: bool,
}

/// `grid` step sizes `mu_j = (j + 1/2) / grid / L`, one IJT solve each
/// from `init`. Rows come back in grid order whatever the executor.
#[allow(clippy::too_many_arguments)]
pub fn sweep_mu(
    prob: &Problem,
    penalty: &PenaltySpec,
    lambda: f64,
    init: &Init,
    x_true: Option<&[f64]>,
    grid: usize,
    tol: f64,
    max_iters: usize,
    exec: Exec,
) -> Result<Vec<Result<SweepRow>>> {
    if grid == 0 {
        return Err(Error::invalid("sweep grid must have at least one point"));
    }
    let lip = crate::loss::SmoothLoss::lipschitz(prob)?;
    let init = match init {
        Init::L1Solution => Init::Vector(l1_start(prob)?),
        other => other.clone(),
    };
    let mus: Vec<f64> = (0..grid)
        .map(|j| (j as f64 + 0.5) / grid as f64 / lip)
        .collect();
    Ok(exec.map(&mus, |mu| {
        let cfg = SolverConfig::new(lambda, StepSize::Absolute(*mu))
            .with_init(init.clone())
            .with_tol(tol)
            .with_max_iters(max_iters);
        let res = solver::ijt_solve(prob, penalty, &cfg)?;
        Ok(SweepRow {
            q: penalty.q(),
            mu: *mu,
            iterations: res.iterations,
            mse: x_true.map_or(f64::NAN, |xt| mse(&res.x_final, xt)),
            converged: res.status == Status::Converged,
        })
    }))
}

/// One benchmarked method: an algorithm plus the penalty it runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchMethod {
    pub algo: Algo,
    pub penalty: PenaltySpec,
}

impl BenchMethod {
    pub fn label(&self) -> String {
        match self.algo {
            Algo::Ijt => format!("ijt-q{}", format_q(self.penalty.q())),
            other => other.name().to_string(),
        }
    }

    /// IJT with `q = 1/2` and `q = 2/3`, IRLS and IRL1 (both `q = 1/2`).
    pub fn standard_set() -> Vec<BenchMethod> {
        let half = PenaltySpec::power(0.5).expect("valid q");
        let two_thirds = PenaltySpec::power(2.0 / 3.0).expect("valid q");
        vec![
            BenchMethod {
                algo: Algo::Ijt,
                penalty: half,
            },
            BenchMethod {
                algo: Algo::Ijt,
                penalty: two_thirds,
            },
            BenchMethod {
                algo: Algo::Irls,
                penalty: half,
            },
            BenchMethod {
                algo: Algo::Irl1,
                penalty: half,
            },
        ]
    }
}

fn format_q(q: f64) -> String {
    if (q - 0.5).abs() < 1e-12 {
        "1/2".into()
    } else if (q - 2.0 / 3.0).abs() < 1e-12 {
        "2/3".into()
    } else {
        format!("{q}")
    }
}

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub sizes: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    /// Timed repetitions per cell; the median is reported.
    pub reps: usize,
    pub lambda: f64,
    pub mu_frac: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub baseline: BaselineConfig,
    pub methods: Vec<BenchMethod>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            sizes: vec![250, 500, 750, 1000, 1250, 1500],
            k: 5,
            seed: 1,
            reps: 3,
            lambda: 0.001,
            mu_frac: 0.99,
            tol: 1e-8,
            max_iters: 100_000,
            baseline: BaselineConfig::default(),
            methods: BenchMethod::standard_set(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub algo: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub wall_time: f64,
    pub mse: f64,
    pub iterations: usize,
    /// Wall time over that of the first method at the same size.
    pub time_ratio: f64,
    pub converged: bool,
    pub error: Option<String>,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Times every method on one seeded instance per size (`M = N/5`,
/// entries `N(0, 1/M)`), all from zero. Cells run on `exec`; timings are
/// only comparable when it is sequential.
pub fn bench(settings: &BenchSettings, exec: Exec) -> Result<Vec<BenchRow>> {
    if settings.methods.is_empty() || settings.sizes.is_empty() {
        return Err(Error::invalid(
            "bench needs at least one size and one method",
        ));
    }
    let cells: Vec<(usize, BenchMethod)> = settings
        .sizes
        .iter()
        .flat_map(|n| settings.methods.iter().map(move |m| (*n, *m)))
        .collect();
    let mut rows = exec.map(&cells, |(n, method)| bench_cell(settings, *n, method));
    for chunk in rows.chunks_mut(settings.methods.len()) {
        let base = chunk[0].wall_time;
        for row in chunk.iter_mut() {
            row.time_ratio = row.wall_time / base;
        }
    }
    Ok(rows)
}

fn bench_cell(s: &BenchSettings, n: usize, method: &BenchMethod) -> BenchRow {
    let mut row = BenchRow {
        algo: method.label(),
        n,
        wall_time: f64::NAN,
        mse: f64::NAN,
        iterations: 0,
        time_ratio: f64::NAN,
        converged: false,
        error: None,
    };
    let outcome = (|| -> Result<(Vec<f64>, SolveResult)> {
        let inst = gen_instance(&InstanceSpec::gaussian(
            n,
            (n / 5).max(1),
            s.k,
            s.seed.wrapping_add(n as u64),
        ))?;
        let prob = Problem::least_squares(inst.a, inst.y)?;
        prob.spectral_norm_sq()?;
        let cfg = SolverConfig::new(s.lambda, StepSize::FractionOfInverseLipschitz(s.mu_frac))
            .with_tol(s.tol)
            .with_max_iters(s.max_iters);
        let mut times = Vec::with_capacity(s.reps.max(1));
        let mut last = None;
        for _ in 0..s.reps.max(1) {
            let res = run_algo(&prob, method.algo, &method.penalty, &cfg, &s.baseline)?;
            times.push(res.wall_time);
            last = Some(res);
        }
        let mut res = last.expect("at least one repetition");
        res.wall_time = median(&mut times);
        Ok((inst.x_true, res))
    })();
    match outcome {
        Ok((x_true, res)) => {
            row.wall_time = res.wall_time;
            row.mse = mse(&res.x_final, &x_true);
            row.iterations = res.iterations;
            row.converged = res.status == Status::Converged;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Ranks with ties averaged, 1-based.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation; `NaN` if either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least-squares line through `(x_i, y_i)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("linear fit needs two or more paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("linear fit needs distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("log-log fit needs positive data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.slope)
}
