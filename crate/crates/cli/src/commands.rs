use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ijt_core::diagnostics::{diagnose, DiagnosticsReport};
use ijt_core::experiments::{self, Algo, BenchSettings};
use ijt_core::io::{self, Cell, Csv, LineChart};
use ijt_core::linalg::{dist2, mse};
use ijt_core::probgen::{gen_instance, write_instance, AmplitudeModel, InstanceSpec};
use ijt_core::prox::{prox_hard, prox_soft};
use ijt_core::solver::threshold_solve;
use ijt_core::testkit::{prox_oracle, ORACLE_COARSE_POINTS, ORACLE_HALFWIDTH};
use ijt_core::{
    prox_scalar, thresholds, Exec, LossKind, PenaltySpec, SmoothLoss, SolverConfig, Status,
    StepSize, Thresholding,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{Emit, InstanceFiles, InstanceSource, RunConfig, SolverSection};
use crate::{
    Amplitude, BenchArgs, CheckArgs, Cli, Command, GenArgs, Outcome, Overrides, ProxTableArgs,
    RuleArg, SolveArgs, SweepArgs,
};

struct Ctx {
    cfg: RunConfig,
    seed: Option<u64>,
    out: PathBuf,
    emit: BTreeSet<Emit>,
    exec: Exec,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn wants(&self, e: Emit) -> bool {
        self.emit.contains(&e)
    }

    fn write_csv(&self, name: &str, csv: &Csv) -> Result<()> {
        if self.wants(Emit::Csv) {
            csv.write(&self.path(name))?;
        }
        Ok(())
    }

    fn write_svg(&self, name: &str, chart: &LineChart) -> Result<()> {
        if self.wants(Emit::Svg) {
            chart.write(&self.path(name))?;
        }
        Ok(())
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        io::write_text(&self.path(name), &text)?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli
        .common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let emit = match (&cli.common.emit, &cfg.emit) {
        (Some(e), _) => e.iter().copied().collect(),
        (None, Some(e)) => e.clone(),
        (None, None) => [Emit::Csv, Emit::Svg].into_iter().collect(),
    };
    let ctx = Ctx {
        cfg,
        seed: cli.common.seed,
        out,
        emit,
        exec: Exec::with_jobs(cli.common.jobs),
    };
    match &cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Solve(a) => solve(&ctx, a),
        Command::SweepMu(a) => sweep(&ctx, a),
        Command::Bench(a) => bench(&ctx, a),
        Command::ProxTable(a) => prox_table(&ctx, a),
        Command::Check(a) => check(&ctx, a),
    }
}

struct Resolved {
    instance: InstanceSource,
    penalty: PenaltySpec,
    solver: SolverSection,
}

fn resolve(ctx: &Ctx, o: &Overrides) -> Result<Resolved> {
    let mut instance = match (&o.a, &o.y) {
        (Some(a), Some(y)) => InstanceSource::Files(InstanceFiles {
            a: a.clone(),
            y: y.clone(),
            x_true: None,
            loss: LossKind::LeastSquares,
        }),
        (None, None) => ctx
            .cfg
            .instance
            .clone()
            .context("no instance: give --A and --y, or a config with an instance section")?,
        _ => bail!("--A and --y must be given together"),
    };
    match &mut instance {
        InstanceSource::Generated(spec) => {
            if o.x_true.is_some() || o.loss.is_some() {
                bail!("--x-true and --loss apply only to instances given by files");
            }
            if let Some(seed) = ctx.seed {
                spec.seed = seed;
            }
        }
        InstanceSource::Files(f) => {
            if let Some(x) = &o.x_true {
                f.x_true = Some(x.clone());
            }
            if let Some(l) = o.loss {
                f.loss = l.into();
            }
        }
    }
    let base = ctx.cfg.penalty;
    let penalty = PenaltySpec::new(
        o.family.map_or(base.family(), Into::into),
        o.q.unwrap_or(base.q()),
    )?;
    let mut solver = ctx.cfg.solver.clone();
    if let Some(l) = o.lambda {
        solver.lambda = l;
    }
    if let Some(mu) = o.mu {
        solver.mu = Some(mu);
        solver.mu_frac = None;
    }
    if let Some(f) = o.mu_frac {
        solver.mu_frac = Some(f);
        solver.mu = None;
    }
    if let Some(i) = &o.init {
        solver.init = i.clone();
    }
    if let Some(t) = o.tol {
        solver.tol = t;
    }
    if let Some(n) = o.max_iters {
        solver.max_iters = n;
    }
    Ok(Resolved {
        instance,
        penalty,
        solver,
    })
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Result<Outcome> {
    let base = match &ctx.cfg.instance {
        Some(InstanceSource::Generated(s)) => Some(*s),
        Some(InstanceSource::Files(_)) => {
            bail!("gen needs generator fields, the config names instance files")
        }
        None => None,
    };
    let n = a.n.or(base.map(|s| s.n)).context("missing --N")?;
    let m = a.m.or(base.map(|s| s.m)).context("missing --M")?;
    let k = a.k.or(base.map(|s| s.k)).context("missing --k")?;
    let variance = match (a.variance, a.var_inv_m) {
        (Some(v), _) => v,
        (None, true) => 1.0 / m as f64,
        (None, false) => base.map_or(1.0 / m as f64, |s| s.variance),
    };
    let amplitude_model = match a.amplitude {
        Some(Amplitude::StdNormal) => AmplitudeModel::StdNormal,
        Some(Amplitude::PlusMinusOne) => AmplitudeModel::PlusMinusOne,
        None => base.map_or(AmplitudeModel::StdNormal, |s| s.amplitude_model),
    };
    let spec = InstanceSpec {
        n,
        m,
        k,
        variance,
        amplitude_model,
        seed: ctx.seed.or(base.map(|s| s.seed)).unwrap_or(0),
    };
    let inst = gen_instance(&spec)?;
    let paths = write_instance(&inst, &ctx.out, &a.stem)?;
    let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned());
    ctx.write_json(
        &format!("{}.manifest.json", a.stem),
        &json!({
            "spec": spec,
            "generator": "chacha20, standard normal",
            "files": {"A": name(&paths[0]), "x_true": name(&paths[1]), "y": name(&paths[2])},
        }),
    )?;
    for p in &paths {
        println!("{}", p.display());
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SolveSummary {
    algo: &'static str,
    status: Status,
    iterations: usize,
    mse: Option<f64>,
    support_size: usize,
    support_freeze_iter: Option<usize>,
    sign_freeze_iter: Option<usize>,
    wall_time: f64,
    lambda: f64,
    mu: f64,
    #[serde(rename = "L")]
    lipschitz: f64,
    final_objective: Option<f64>,
    final_step_norm: Option<f64>,
    step_warning: bool,
    diagnostics: Option<DiagnosticsReport>,
    diagnostics_error: Option<String>,
}

fn solve(ctx: &Ctx, a: &SolveArgs) -> Result<Outcome> {
    let r = resolve(ctx, &a.overrides)?;
    let algo: Algo = a.algo.map_or(ctx.cfg.algo, Into::into);
    let loaded = r.instance.load()?;
    let prob = &loaded.problem;
    let cfg = r.solver.solver_config()?;
    let mu = cfg.resolve_mu(prob.lipschitz()?)?;

    let mut errors: Vec<(f64, f64)> = Vec::new();
    let res = match algo {
        Algo::Ijt | Algo::Soft | Algo::Hard => {
            let rule = match algo {
                Algo::Ijt => Thresholding::Jump(r.penalty),
                Algo::Soft => Thresholding::Soft,
                _ => Thresholding::Hard,
            };
            let x_true = loaded.x_true.as_deref();
            threshold_solve(prob, rule, &cfg, &mut |n, x| {
                if let Some(xt) = x_true {
                    errors.push((n as f64, dist2(x, xt)));
                }
            })?
        }
        Algo::Irls | Algo::Irl1 => {
            experiments::run_algo(prob, algo, &r.penalty, &cfg, &ctx.cfg.baseline)?
        }
    };
    log::info!(
        "{} finished: {:?} after {} iterations",
        algo.name(),
        res.status,
        res.iterations
    );

    let (diagnostics, diagnostics_error) = match diagnose(
        &res.x_final,
        prob,
        &r.penalty,
        r.solver.lambda,
        mu,
        res.final_step_norm().filter(|_| algo == Algo::Ijt),
    ) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = SolveSummary {
        algo: algo.name(),
        status: res.status,
        iterations: res.iterations,
        mse: loaded.x_true.as_deref().map(|xt| mse(&res.x_final, xt)),
        support_size: res.x_final.iter().filter(|v| **v != 0.0).count(),
        support_freeze_iter: res.support_freeze_iter,
        sign_freeze_iter: res.sign_freeze_iter,
        wall_time: res.wall_time,
        lambda: res.lambda,
        mu: res.mu,
        lipschitz: res.lipschitz,
        final_objective: res.trace.objective.last().copied(),
        final_step_norm: res.final_step_norm(),
        step_warning: res.step_warning,
        diagnostics,
        diagnostics_error,
    };
    io::write_vector(&ctx.path("solution.txt"), &res.x_final)?;
    ctx.write_json("summary.json", &summary)?;
    if ctx.wants(Emit::Csv) {
        let path = ctx.path("trace.csv");
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        res.trace.write_csv(BufWriter::new(f))?;
    }
    let positive: Vec<(f64, f64)> = errors.into_iter().filter(|(_, e)| *e > 0.0).collect();
    if !positive.is_empty() {
        let mut chart = LineChart::new("Recovery error", "iteration", "||x^n - x_true||", true);
        chart.add(algo.name(), positive);
        ctx.write_svg("error.svg", &chart)?;
    }
    println!(
        "{}",
        serde_json::to_string(&json!({
            "status": summary.status,
            "iterations": summary.iterations,
            "mse": summary.mse,
        }))?
    );
    Ok(if res.status == Status::Converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<Outcome> {
    let r = resolve(ctx, &a.overrides)?;
    let loaded = r.instance.load()?;
    if loaded.problem.kind() != LossKind::LeastSquares {
        bail!("sweep-mu needs a least-squares instance");
    }
    let init = r.solver.init.resolve()?;
    let qs = a.qs.clone().unwrap_or_else(|| vec![r.penalty.q()]);
    let mut csv = Csv::new(&["q", "mu", "iterations", "mse", "converged"]);
    let mut chart = LineChart::new("Iterations vs step size", "mu", "iterations", false);
    let mut all_ok = true;
    for q in qs {
        let p = PenaltySpec::new(r.penalty.family(), q)?;
        let rows = experiments::sweep_mu(
            &loaded.problem,
            &p,
            r.solver.lambda,
            &init,
            loaded.x_true.as_deref(),
            a.grid,
            r.solver.tol,
            r.solver.max_iters,
            ctx.exec,
        )?;
        let lip = loaded.problem.lipschitz()?;
        let mut points = Vec::new();
        let (mut mus, mut iters, mut mses) = (Vec::new(), Vec::new(), Vec::new());
        for (j, row) in rows.into_iter().enumerate() {
            match row {
                Ok(row) => {
                    all_ok &= row.converged;
                    csv.row(&[
                        Cell::F(q),
                        Cell::F(row.mu),
                        Cell::U(row.iterations),
                        Cell::F(row.mse),
                        Cell::U(usize::from(row.converged)),
                    ]);
                    points.push((row.mu, row.iterations as f64));
                    mus.push(row.mu);
                    iters.push(row.iterations as f64);
                    mses.push(row.mse);
                }
                Err(e) => {
                    all_ok = false;
                    let mu = (j as f64 + 0.5) / a.grid as f64 / lip;
                    log::warn!("q = {q}, mu = {mu}: {e}");
                    csv.row(&[
                        Cell::F(q),
                        Cell::F(mu),
                        Cell::U(0),
                        Cell::F(f64::NAN),
                        Cell::U(0),
                    ]);
                }
            }
        }
        let rho = experiments::spearman(&mus, &iters);
        let finite: Vec<f64> = mses
            .iter()
            .copied()
            .filter(|v| v.is_finite() && *v > 0.0)
            .collect();
        let ratio = finite.iter().copied().fold(f64::NAN, f64::max)
            / finite.iter().copied().fold(f64::NAN, f64::min);
        println!("q = {q}: spearman(mu, iterations) = {rho:.4}, max/min mse = {ratio:.4}");
        chart.add(&format!("q = {q}"), points);
    }
    ctx.write_csv("sweep.csv", &csv)?;
    ctx.write_svg("sweep.svg", &chart)?;
    Ok(if all_ok {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn bench(ctx: &Ctx, a: &BenchArgs) -> Result<Outcome> {
    let d = BenchSettings::default();
    let settings = BenchSettings {
        sizes: a.sizes.clone(),
        k: a.k,
        seed: ctx.seed.unwrap_or(d.seed),
        reps: a.reps,
        lambda: a.lambda.unwrap_or(d.lambda),
        mu_frac: a.mu_frac.unwrap_or(d.mu_frac),
        tol: a.tol.unwrap_or(d.tol),
        max_iters: a.max_iters.unwrap_or(d.max_iters),
        baseline: ctx.cfg.baseline,
        methods: d.methods,
    };
    let rows = experiments::bench(&settings, ctx.exec)?;
    let mut csv = Csv::new(&[
        "algo",
        "N",
        "wall_time",
        "mse",
        "iterations",
        "time_ratio",
        "converged",
    ]);
    let mut chart = LineChart::new("Wall time vs problem size", "N", "seconds", true);
    let mut all_ok = true;
    for m in &settings.methods {
        let label = m.label();
        let points = rows
            .iter()
            .filter(|r| r.algo == label && r.wall_time > 0.0)
            .map(|r| (r.n as f64, r.wall_time))
            .collect();
        chart.add(&label, points);
    }
    for r in &rows {
        if let Some(e) = &r.error {
            log::warn!("{} at N = {}: {e}", r.algo, r.n);
        }
        all_ok &= r.converged && r.error.is_none();
        csv.row(&[
            Cell::S(&r.algo),
            Cell::U(r.n),
            Cell::F(r.wall_time),
            Cell::F(r.mse),
            Cell::U(r.iterations),
            Cell::F(r.time_ratio),
            Cell::U(usize::from(r.converged)),
        ]);
        println!(
            "{:>8} N={:<5} {:.4}s  ratio {:.3}  mse {:.2e}",
            r.algo, r.n, r.wall_time, r.time_ratio, r.mse
        );
    }
    ctx.write_csv("bench.csv", &csv)?;
    ctx.write_svg("bench.svg", &chart)?;
    Ok(if all_ok {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn prox_table(ctx: &Ctx, a: &ProxTableArgs) -> Result<Outcome> {
    if a.samples < 2 {
        bail!("--samples must be at least 2");
    }
    if !(a.from < a.to) {
        bail!("--from must be below --to");
    }
    let p = PenaltySpec::new(a.family.into(), a.q)?;
    let lm = a.lambda * a.mu;
    let jump = match a.rule {
        RuleArg::Jump => Some(thresholds(&p, a.lambda, a.mu)?.tau),
        RuleArg::Hard => Some((2.0 * lm).sqrt()),
        RuleArg::Soft => None,
    };
    let step = (a.to - a.from) / (a.samples - 1) as f64;
    let mut zs: Vec<f64> = (0..a.samples).map(|j| a.from + j as f64 * step).collect();
    zs[a.samples - 1] = a.to;
    if let Some(t) = jump {
        for z in [t * (1.0 - 1e-9), t * (1.0 + 1e-9)] {
            for s in [-z, z] {
                if (a.from..=a.to).contains(&s) {
                    zs.push(s);
                }
            }
        }
    }
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    let mut csv = Csv::new(&["z", "prox"]);
    let mut points = Vec::with_capacity(zs.len());
    for z in zs {
        let v = match a.rule {
            RuleArg::Jump => prox_scalar(&p, a.lambda, a.mu, z)?,
            RuleArg::Soft => prox_soft(lm, z),
            RuleArg::Hard => prox_hard(lm, z),
        };
        csv.row(&[Cell::F(z), Cell::F(v)]);
        points.push((z, v));
    }
    let mut chart = LineChart::new("Thresholding function", "z", "prox(z)", false);
    chart.add(&format!("{:?}", a.rule).to_lowercase(), points);
    ctx.write_csv("prox_table.csv", &csv)?;
    ctx.write_svg("prox_table.svg", &chart)?;
    Ok(Outcome::Done)
}

fn check(ctx: &Ctx, a: &CheckArgs) -> Result<Outcome> {
    let r = resolve(ctx, &a.overrides)?;
    let loaded = r.instance.load()?;
    let prob = &loaded.problem;
    let x = io::read_vector(&a.solution)?;
    let cfg = SolverConfig::new(r.solver.lambda, r.solver.step()?);
    let mu = match cfg.step {
        StepSize::Absolute(mu) => mu,
        StepSize::FractionOfInverseLipschitz(_) => cfg.resolve_mu(prob.lipschitz()?)?,
    };
    let report = diagnose(&x, prob, &r.penalty, r.solver.lambda, mu, a.last_step)?;
    let mut value = serde_json::to_value(&report)?;
    if a.oracle {
        let g = prob.grad(&x)?;
        let (mut prox_gap, mut fixed_gap) = (0.0f64, 0.0f64);
        for (xi, gi) in x.iter().zip(&g) {
            let z = xi - mu * gi;
            let o = prox_oracle(
                &r.penalty,
                r.solver.lambda,
                mu,
                z,
                ORACLE_HALFWIDTH,
                ORACLE_COARSE_POINTS,
            );
            prox_gap = prox_gap.max((prox_scalar(&r.penalty, r.solver.lambda, mu, z)? - o).abs());
            fixed_gap = fixed_gap.max((xi - o).abs());
        }
        value["oracle_max_prox_gap"] = json!(prox_gap);
        value["oracle_max_fixed_point_gap"] = json!(fixed_gap);
    }
    ctx.write_json("check.json", &value)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(Outcome::Done)
}
