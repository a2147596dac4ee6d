//! One function per subcommand. Each reads the merged configuration,
//! writes its artifacts into the output directory and returns a summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use roughwalk::homog::{
    conductance_closed_form_covariance, conductance_predict, ou_predict, periodic_predict,
    torus_poisson_solve_adaptive, RoughLimitPrediction,
};
use roughwalk::mc::{
    convergence_sweep, estimate_covariance, lepingle_diagnostic, pvar_tightness_probe, run_replicas, write_reports_csv,
    MacroPath, Simulator, SweepStatistic,
};
use roughwalk::models::{ModelConfig, ModelSpec, PeriodicCoefficients};
use roughwalk::rde::{compare_laws, driven_endpoints, limit_endpoints, LimitCorrection};
use roughwalk::tensor_path::{
    read_path_csv, write_jump_csv, write_lift_csv, write_sampled_csv, AnyPath, Interpretation, LiftKind,
};
use roughwalk::variation::{pvar_area, pvar_bruteforce, pvar_dyadic_lower, pvar_grid_dp, PvarMethod, Vertices};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CommandName, ExperimentConfig, InterpolationArg, LiftArg, MethodArg, ProbeKind};
use crate::error::{CliError, CliResult};

pub const DEFAULT_CUTOFF: usize = 16;
pub const DEFAULT_MAX_CUTOFF: usize = 64;
pub const DEFAULT_LEVEL: u32 = 10;
pub const DEFAULT_LIMIT_STEP: f64 = 1e-3;
pub const DEFAULT_TIGHTNESS_P: f64 = 2.5;

/// Files written by a command plus a JSON summary for standard output.
pub struct Outcome {
    pub outputs: Vec<String>,
    pub summary: Value,
}

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub out: &'a Path,
    pub workers: Option<usize>,
}

impl Context<'_> {
    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn replicas(&self, command: &str) -> CliResult<usize> {
        self.config.replicas.ok_or_else(|| CliError::missing("replicas", command))
    }
}

pub fn dispatch(command: CommandName, ctx: &Context) -> CliResult<Outcome> {
    match command {
        CommandName::Simulate => simulate(ctx),
        CommandName::Lift => lift(ctx),
        CommandName::Pvar => pvar(ctx),
        CommandName::Predict => predict(ctx),
        CommandName::Estimate => estimate(ctx),
        CommandName::Sweep => sweep(ctx),
        CommandName::Probe => probe(ctx),
        CommandName::Rde => rde(ctx),
    }
}

fn simulate(ctx: &Context) -> CliResult<Outcome> {
    let model = ctx.config.require_model("simulate")?;
    let r = ctx.config.replica.unwrap_or(0);
    let path = Simulator::new(model)?.replica(r)?;
    let (points, increment) = match &path {
        MacroPath::Jump(p) => {
            write_jump_csv(p, ctx.create("path.csv")?)?;
            (p.num_jumps(), path.total_increment())
        }
        MacroPath::Sampled(p) => {
            write_sampled_csv(p, ctx.create("path.csv")?)?;
            (p.len(), path.total_increment())
        }
    };
    Ok(Outcome {
        outputs: vec!["path.csv".into()],
        summary: json!({ "replica": r, "points": points, "total_increment": increment }),
    })
}

fn read_input_path(ctx: &Context) -> CliResult<Option<MacroPath>> {
    let Some(file) = &ctx.config.path else { return Ok(None) };
    let interp = match ctx.config.interpolation.unwrap_or(InterpolationArg::Linear) {
        InterpolationArg::Linear => Interpretation::PiecewiseLinear,
        InterpolationArg::Samples => Interpretation::GridSamples,
    };
    let f =
        File::open(file).map_err(|e| CliError::validation("path", format!("cannot read {}: {e}", file.display())))?;
    Ok(Some(match read_path_csv(f, interp)? {
        AnyPath::Jump(p) => MacroPath::Jump(p),
        AnyPath::Sampled(p) => MacroPath::Sampled(p),
    }))
}

fn input_or_simulated(ctx: &Context, command: &str) -> CliResult<MacroPath> {
    if let Some(p) = read_input_path(ctx)? {
        return Ok(p);
    }
    let model = ctx
        .config
        .model
        .as_ref()
        .ok_or_else(|| CliError::validation("path", format!("`{command}` needs `path` or `model`")))?;
    Ok(Simulator::new(model)?.replica(ctx.config.replica.unwrap_or(0))?)
}

fn lift_kind(arg: Option<LiftArg>) -> LiftKind {
    match arg.unwrap_or(LiftArg::Ito) {
        LiftArg::Ito => LiftKind::Ito,
        LiftArg::Strato => LiftKind::StratonovichLinear,
    }
}

fn lift(ctx: &Context) -> CliResult<Outcome> {
    let path = input_or_simulated(ctx, "lift")?;
    let kind = lift_kind(ctx.config.lift);
    let lift = path.lift(kind);
    write_lift_csv(&lift, ctx.create("lift.csv")?)?;
    Ok(Outcome {
        outputs: vec!["lift.csv".into()],
        summary: json!({ "kind": kind, "points": lift.len(), "total_increment": lift.total_increment(), "total": lift.total() }),
    })
}

fn pvar(ctx: &Context) -> CliResult<Outcome> {
    let path = read_input_path(ctx)?.ok_or_else(|| CliError::missing("path", "pvar"))?;
    let p = ctx.config.p.ok_or_else(|| CliError::missing("p", "pvar"))?;
    let method = ctx.config.method.unwrap_or(MethodArg::Dp);
    let (values, dim) = match &path {
        MacroPath::Jump(j) => (j.vertex_values(), j.dim()),
        MacroPath::Sampled(s) => (s.vertex_values(), s.dim()),
    };
    let result = match PvarMethod::from(method) {
        PvarMethod::DpExact => pvar_grid_dp(&values, dim, p)?,
        PvarMethod::BruteForce => pvar_bruteforce(&values, dim, p)?,
        PvarMethod::DyadicLower => {
            let level = ctx.config.level.unwrap_or(DEFAULT_LEVEL);
            match &path {
                MacroPath::Jump(j) => pvar_dyadic_lower(j, level, p)?,
                MacroPath::Sampled(s) => pvar_dyadic_lower(s, level, p)?,
            }
        }
    };
    let mut doc = serde_json::to_value(&result)?;
    if ctx.config.level2.unwrap_or(false) {
        if p < 2.0 {
            return Err(CliError::validation("p", format!("the level-2 norm needs p >= 2, got {p}")));
        }
        let lift = path.natural_lift();
        let area = pvar_area(&lift, p / 2.0)?;
        doc["level2"] = serde_json::to_value(&area)?;
    }
    ctx.write_json("pvar.json", &doc)?;
    Ok(Outcome { outputs: vec!["pvar.json".into()], summary: doc })
}

/// Prediction for the configured model. Conductance laws without a closed
/// form use `covariance` from the configuration, else a Monte-Carlo
/// estimate with `replicas` replicas.
pub fn prediction_for(model: &ModelConfig, ctx: &Context) -> CliResult<RoughLimitPrediction> {
    match &model.model {
        ModelSpec::Ou { .. } => Ok(ou_predict()),
        ModelSpec::Conductance { dim, law } => {
            let cov = match (&ctx.config.covariance, conductance_closed_form_covariance(law, *dim)) {
                (Some(c), _) => c.clone(),
                (None, Some(c)) => c,
                (None, None) => {
                    let m = ctx.config.replicas.ok_or_else(|| {
                        CliError::validation(
                            "covariance",
                            "no closed form for this law: give `covariance` or `replicas`",
                        )
                    })?;
                    estimate_covariance(model, m, ctx.workers)?.mean
                }
            };
            Ok(conductance_predict(law, &cov)?)
        }
        ModelSpec::Periodic { coefficients } => {
            let coeffs = PeriodicCoefficients::from_spec(coefficients)?;
            let start = ctx.config.cutoff.unwrap_or(DEFAULT_CUTOFF);
            let max = ctx.config.max_cutoff.unwrap_or(DEFAULT_MAX_CUTOFF.max(start));
            let phi = torus_poisson_solve_adaptive(&coeffs, start, max)?;
            Ok(periodic_predict(&coeffs, &phi)?)
        }
    }
}

fn predict(ctx: &Context) -> CliResult<Outcome> {
    let model = ctx.config.require_model("predict")?;
    let prediction = prediction_for(model, ctx)?;
    ctx.write_json("prediction.json", &prediction)?;
    Ok(Outcome { outputs: vec!["prediction.json".into()], summary: serde_json::to_value(&prediction)? })
}

fn statistics_for(ctx: &Context, model: &ModelConfig, default: &[SweepStatistic]) -> CliResult<Vec<SweepStatistic>> {
    let jump = matches!(model.model, ModelSpec::Conductance { .. });
    match &ctx.config.statistics {
        Some(s) => {
            if let Some(bad) = s.iter().find(|s| s.jump_only() && !jump) {
                return Err(CliError::validation("statistics", format!("{bad:?} is defined only for jump models")));
            }
            Ok(s.clone())
        }
        None => Ok(default.iter().copied().filter(|s| jump || !s.jump_only()).collect()),
    }
}

fn estimate(ctx: &Context) -> CliResult<Outcome> {
    let model = ctx.config.require_model("estimate")?;
    let replicas = ctx.replicas("estimate")?;
    let stats = statistics_for(ctx, model, &SweepStatistic::ALL)?;
    let run = run_replicas(model, replicas, ctx.workers)?;
    let reports = stats.iter().map(|s| s.evaluate(&run)).collect::<roughwalk::Result<Vec<_>>>()?;
    ctx.write_json("reports.json", &reports)?;
    write_reports_csv(&reports, ctx.create("reports.csv")?)?;
    let summary = json!({
        "replicas": replicas,
        "scale_n": model.scale_n,
        "wall_time": run.wall_time,
        "max_identity_error": run.max_identity_error(),
        "statistics": reports.iter().map(|r| json!({ "statistic": r.statistic, "mean": r.mean, "stderr": r.stderr })).collect::<Vec<_>>(),
    });
    Ok(Outcome { outputs: vec!["reports.json".into(), "reports.csv".into()], summary })
}

fn sweep(ctx: &Context) -> CliResult<Outcome> {
    let model = ctx.config.require_model("sweep")?;
    let replicas = ctx.replicas("sweep")?;
    let scales = ctx.config.scales.as_ref().ok_or_else(|| CliError::missing("scales", "sweep"))?;
    let stats = statistics_for(ctx, model, &[SweepStatistic::Covariance])?;
    let prediction = prediction_for(model, ctx)?;
    let mut sweeps = Vec::new();
    for s in &stats {
        let target = s
            .target(&prediction, model.horizon)
            .ok_or_else(|| CliError::validation("statistics", format!("no predicted value for {s:?}")))?;
        sweeps.push(convergence_sweep(model, *s, &target, scales, replicas, ctx.workers)?);
    }
    ctx.write_json("sweep.json", &sweeps)?;
    let mut w = csv::Writer::from_writer(ctx.create("sweep.csv")?);
    w.write_record(["n", "statistic", "i", "j", "mean", "stderr", "target"])?;
    for s in &sweeps {
        for pt in &s.points {
            let r = &pt.report;
            for i in 0..r.mean.rows() {
                for j in 0..r.mean.cols() {
                    w.write_record([
                        format!("{:?}", pt.scale_n),
                        r.statistic.clone(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        format!("{:?}", r.mean[(i, j)]),
                        format!("{:?}", r.stderr[(i, j)]),
                        format!("{:?}", s.target[(i, j)]),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    let summary = json!(sweeps
        .iter()
        .map(|s| json!({ "statistic": s.statistic, "max_deviation_slope": s.max_deviation_slope, "slopes": s.slopes }))
        .collect::<Vec<_>>());
    Ok(Outcome { outputs: vec!["sweep.json".into(), "sweep.csv".into()], summary })
}

fn probe(ctx: &Context) -> CliResult<Outcome> {
    let model = ctx.config.require_model("probe")?;
    let replicas = ctx.replicas("probe")?;
    match ctx.config.probe.unwrap_or(ProbeKind::Tightness) {
        ProbeKind::Tightness => {
            let scales = ctx.config.scales.as_ref().ok_or_else(|| CliError::missing("scales", "probe"))?;
            let p = ctx.config.p.unwrap_or(DEFAULT_TIGHTNESS_P);
            let probe = pvar_tightness_probe(model, p, scales, replicas, ctx.workers, ctx.config.mesh)?;
            ctx.write_json("tightness.json", &probe)?;
            let mut w = csv::Writer::from_writer(ctx.create("tightness.csv")?);
            w.write_record(["n", "p", "q50", "q90", "q99", "M"])?;
            for r in &probe.rows {
                w.write_record(
                    [r.scale_n, probe.p, r.q50, r.q90, r.q99]
                        .map(|x| format!("{x:?}"))
                        .iter()
                        .chain(&[r.replicas.to_string()]),
                )?;
            }
            w.flush()?;
            Ok(Outcome {
                outputs: vec!["tightness.json".into(), "tightness.csv".into()],
                summary: json!({ "p": probe.p, "slope_q90": probe.slope_q90 }),
            })
        }
        ProbeKind::Lepingle => {
            let ModelSpec::Conductance { dim, law } = &model.model else {
                return Err(CliError::validation("model", "the Lépingle probe needs a conductance model"));
            };
            let ps = ctx.config.ps.clone().unwrap_or_else(|| vec![DEFAULT_TIGHTNESS_P]);
            let report = lepingle_diagnostic(law, *dim, model.horizon, &ps, replicas, model.seed, ctx.workers)?;
            ctx.write_json("lepingle.json", &report)?;
            Ok(Outcome { outputs: vec!["lepingle.json".into()], summary: serde_json::to_value(&report)? })
        }
    }
}

fn write_samples(ctx: &Context, name: &str, samples: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(ctx.create(name)?);
    let e = samples.first().map_or(0, Vec::len);
    w.write_record((1..=e).map(|i| format!("y{i}")))?;
    for s in samples {
        w.write_record(s.iter().map(|x| format!("{x:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Significance level, in standard errors, of the law comparisons.
pub const RDE_Z: f64 = 3.0;

fn rde(ctx: &Context) -> CliResult<Outcome> {
    let model = ctx.config.require_model("rde")?;
    let sigma = ctx.config.sigma.as_ref().ok_or_else(|| CliError::missing("sigma", "rde"))?;
    let y0 = ctx.config.y0.as_ref().ok_or_else(|| CliError::missing("y0", "rde"))?;
    let replicas = ctx.replicas("rde")?;
    let h = ctx.config.limit_step.unwrap_or(DEFAULT_LIMIT_STEP);
    let prediction = prediction_for(model, ctx)?;
    let driven = driven_endpoints(model, sigma, y0, replicas, ctx.workers)?;
    let limit = |c| limit_endpoints(sigma, &prediction, c, y0, model.horizon, h, replicas, model.seed, ctx.workers);
    let corrected = limit(LimitCorrection::Ito)?;
    let uncorrected = limit(LimitCorrection::None)?;
    let vs_corrected = compare_laws(&driven, &corrected)?;
    let vs_uncorrected = compare_laws(&driven, &uncorrected)?;
    let g = LimitCorrection::Ito.area(&prediction)?;
    let report = json!({
        "drift_at_y0": sigma.correction_drift(y0, &g),
        "corrected": vs_corrected,
        "uncorrected": vs_uncorrected,
        "corrected_within": vs_corrected.within(RDE_Z),
        "uncorrected_beyond": vs_uncorrected.beyond(RDE_Z),
    });
    ctx.write_json("comparison.json", &report)?;
    write_samples(ctx, "samples_driven.csv", &driven)?;
    write_samples(ctx, "samples_corrected.csv", &corrected)?;
    write_samples(ctx, "samples_uncorrected.csv", &uncorrected)?;
    let summary = json!({
        "drift_at_y0": report["drift_at_y0"],
        "corrected_max_z": vs_corrected.max_z(),
        "uncorrected_max_z": vs_uncorrected.max_z(),
        "corrected_within": report["corrected_within"],
        "uncorrected_beyond": report["uncorrected_beyond"],
    });
    Ok(Outcome {
        outputs: ["comparison.json", "samples_driven.csv", "samples_corrected.csv", "samples_uncorrected.csv"]
            .map(String::from)
            .to_vec(),
        summary,
    })
}
