//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Run a subset by passing criterion numbers:
//! `cargo test -p roughwalk-validation --test acceptance -- 3 4 11`.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughwalk::homog::{
    conductance_closed_form_covariance, conductance_predict, ou_predict, periodic_predict, torus_poisson_solve,
};
use roughwalk::mc::{lepingle_diagnostic, pvar_tightness_probe, run_replicas, EstimatorReport, Run};
use roughwalk::models::{ConductanceLaw, ModelConfig, ModelSpec, OuParams, PeriodicCoefficients, PeriodicSpec};
use roughwalk::rde::{compare_laws, driven_endpoints, limit_endpoints, LimitCorrection, VectorField};
use roughwalk::tensor_path::{
    chen_defect, ito_lift_jump, ito_lift_sampled, strato_lift_linear, Interpretation, JumpPath, Level2Lift, SampledPath,
};
use roughwalk::variation::{partition_sum, pvar_area, pvar_area_bruteforce, pvar_bruteforce, pvar_grid_dp};
use roughwalk::Matrix;

/// Standard errors allowed between a Monte-Carlo estimate and its target.
const Z: f64 = 3.0;
/// Largest standard error accepted per entry of the OU area estimate.
const OU_MAX_STDERR: f64 = 0.05;
/// Allowance for the weak Euler bias of the periodic diffusion at `h = 2e-3`.
const PERIODIC_BIAS: f64 = 0.05;
/// Absolute floor below which a gap is floating-point round-off. Entries
/// that are exact per replica have standard errors of that size too.
const ROUNDOFF: f64 = 1e-12;
/// Spectral predictions at `K = 32` and `K = 64` agree to this.
const SPECTRAL_STABILITY: f64 = 1e-6;
/// Tolerance of the one-dimensional corrector oracle.
const CORRECTOR_TOL: f64 = 1e-8;
/// Relative tolerance of the Chen relation and the interpolation identity.
const ALGEBRAIC_TOL: f64 = 1e-12;
/// Band for the Lépingle ratio.
const LEPINGLE_BAND: (f64, f64) = (0.01, 100.0);
/// Largest fitted slope of `log q90` against `log n`.
const TIGHTNESS_SLOPE: f64 = 0.05;

type Check = Result<(bool, String), String>;

struct Suite {
    selected: Vec<u32>,
    failures: Vec<u32>,
}

impl Suite {
    fn wants(&self, ids: &[u32]) -> bool {
        self.selected.is_empty() || ids.iter().any(|i| self.selected.contains(i))
    }

    fn record(&mut self, id: u32, name: &str, start: Instant, check: Check) {
        if !self.wants(&[id]) {
            return;
        }
        let (pass, detail) = check.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            self.failures.push(id);
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {name} [{:.1} s]: {detail}", start.elapsed().as_secs_f64());
    }
}

fn err(e: roughwalk::Error) -> String {
    e.to_string()
}

/// Largest `(|mean − target| − ROUNDOFF)₊ / stderr` over entries.
fn max_z(report: &EstimatorReport, target: &Matrix) -> f64 {
    let gaps = (&report.mean - target).as_slice().to_vec();
    gaps.iter()
        .zip(report.stderr.as_slice())
        .map(|(g, s)| {
            let excess = (g.abs() - ROUNDOFF).max(0.0);
            if excess == 0.0 {
                0.0
            } else {
                excess / s
            }
        })
        .fold(0.0, f64::max)
}

/// `|mean − target| ≤ Z·stderr + allowance` entrywise, up to round-off,
/// with the summary.
fn matches(report: &EstimatorReport, target: &Matrix, allowance: f64) -> (bool, String) {
    let gap = (&report.mean - target).max_abs();
    let detail = format!(
        "{} max z {:.2}, max stderr {:.4}, max gap {gap:.4}",
        report.statistic,
        max_z(report, target),
        report.stderr.max_abs()
    );
    (report.within(target, Z, allowance + ROUNDOFF), detail)
}

fn both(a: (bool, String), b: (bool, String)) -> (bool, String) {
    (a.0 && b.0, format!("{}; {}", a.1, b.1))
}

fn conductance(law: ConductanceLaw, dim: usize, scale_n: f64, seed: u64) -> ModelConfig {
    ModelConfig { model: ModelSpec::Conductance { dim, law }, seed, horizon: 1.0, scale_n, step: None }
}

fn ou(scale_n: f64, seed: u64) -> ModelConfig {
    ModelConfig { model: ModelSpec::Ou { params: OuParams::default() }, seed, horizon: 1.0, scale_n, step: Some(0.01) }
}

fn periodic(coefficients: PeriodicSpec, seed: u64) -> ModelConfig {
    ModelConfig { model: ModelSpec::Periodic { coefficients }, seed, horizon: 1.0, scale_n: 50.0, step: Some(2e-3) }
}

fn ou_criteria(suite: &mut Suite) {
    if !suite.wants(&[1, 2]) {
        return;
    }
    let start = Instant::now();
    let run = match run_replicas(&ou(200.0, 101), 20_000, None) {
        Ok(r) => r,
        Err(e) => {
            suite.record(1, "OU area anomaly", start, Err(e.to_string()));
            suite.record(2, "OU covariance", start, Err(e.to_string()));
            return;
        }
    };
    let area = (|| -> Check {
        let r = run.gamma_hat_antisymmetric().map_err(err)?;
        let target = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).map_err(err)?;
        let (ok, detail) = matches(&r, &target, 0.0);
        let small = r.stderr.max_abs() <= OU_MAX_STDERR;
        let formula = ou_predict().gamma_strato.antisymmetric_part();
        let vs_formula = max_z(&r, &formula);
        Ok((
            ok && small,
            format!(
                "{detail}; estimate Γ₁₂ {:.4} ± {:.4} vs target -1; against the corrector value ½A (Γ₁₂ = {}) max z {vs_formula:.2}",
                r.mean[(0, 1)],
                r.stderr[(0, 1)],
                formula[(0, 1)]
            ),
        ))
    })();
    suite.record(1, "OU area anomaly", start, area);
    let cov = run.covariance().map_err(err).map(|r| matches(&r, &Matrix::identity(2), 0.0));
    suite.record(2, "OU covariance", start, cov);
}

fn conductance_criteria(suite: &mut Suite) {
    if !suite.wants(&[3, 4, 11]) {
        return;
    }
    let start = Instant::now();
    let law = ConductanceLaw::Uniform { a: 1.0, b: 2.0 };
    let run = match run_replicas(&conductance(law, 2, 400.0, 303), 10_000, None) {
        Ok(r) => r,
        Err(e) => {
            for (id, name) in [
                (3, "conductance interpolation gap"),
                (4, "conductance Itô correction"),
                (11, "interpolation identity"),
            ] {
                suite.record(id, name, start, Err(e.to_string()));
            }
            return;
        }
    };
    let gap = (|| -> Check {
        let g = run.interpolation_gap().map_err(err)?;
        let a = run.ito_antisymmetric().map_err(err)?;
        Ok(both(matches(&g, &Matrix::identity(2).scale(law.mean()), 0.0), matches(&a, &Matrix::zeros(2, 2), 0.0)))
    })();
    suite.record(3, "conductance interpolation gap", start, gap);
    let ito = (|| -> Check {
        let strato = run.gamma_hat().map_err(err)?;
        let ito = run.ito_centered().map_err(err)?;
        Ok(both(
            matches(&strato, &Matrix::zeros(2, 2), 0.0),
            matches(&ito, &Matrix::identity(2).scale(-law.mean()), 0.0),
        ))
    })();
    suite.record(4, "conductance Itô correction", start, ito);
    suite.record(11, "interpolation identity", start, Ok(identity_check(&run)));
}

fn identity_check(run: &Run) -> (bool, String) {
    let covered = run.records.iter().all(|r| r.identity_error.is_some());
    let worst = run.max_identity_error().unwrap_or(f64::INFINITY);
    (covered && worst <= ALGEBRAIC_TOL, format!("{} replicas, worst relative error {worst:.2e}", run.records.len()))
}

fn constant_conductance() -> Check {
    let run = run_replicas(&conductance(ConductanceLaw::Constant { kappa: 1.0 }, 2, 400.0, 505), 10_000, None)
        .map_err(err)?;
    let cov = run.covariance().map_err(err)?;
    let ito = run.ito_correction().map_err(err)?;
    Ok(both(matches(&cov, &Matrix::identity(2).scale(2.0), 0.0), matches(&ito, &Matrix::zeros(2, 2), 0.0)))
}

fn periodic_identity() -> Check {
    let coeffs = PeriodicCoefficients::identity(2).map_err(err)?;
    let phi = torus_poisson_solve(&coeffs, 16).map_err(err)?;
    let pred = periodic_predict(&coeffs, &phi).map_err(err)?;
    let exact = phi.max_residual() == 0.0
        && pred.covariance == Matrix::identity(2).scale(2.0)
        && pred.gamma_strato == Matrix::zeros(2, 2)
        && pred.ito_correction == Matrix::zeros(2, 2);
    let run = run_replicas(&periodic(PeriodicSpec::Identity { dim: 2 }, 606), 4000, None).map_err(err)?;
    let mc = both(
        both(
            matches(&run.covariance().map_err(err)?, &pred.covariance, PERIODIC_BIAS),
            matches(&run.gamma_hat().map_err(err)?, &pred.gamma_strato, PERIODIC_BIAS),
        ),
        matches(&run.ito_correction().map_err(err)?, &pred.ito_correction, PERIODIC_BIAS),
    );
    Ok((exact && mc.0, format!("residual {:e}, prediction exact: {exact}; {}", phi.max_residual(), mc.1)))
}

fn periodic_antisym() -> Check {
    let coeffs = PeriodicCoefficients::antisym_perturbation(0.5).map_err(err)?;
    let pred = periodic_predict(&coeffs, &torus_poisson_solve(&coeffs, 32).map_err(err)?).map_err(err)?;
    let fine = periodic_predict(&coeffs, &torus_poisson_solve(&coeffs, 64).map_err(err)?).map_err(err)?;
    let drift = [
        (&pred.covariance - &fine.covariance).max_abs(),
        (&pred.gamma_strato - &fine.gamma_strato).max_abs(),
        (&pred.ito_correction - &fine.ito_correction).max_abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let stable = drift <= SPECTRAL_STABILITY;
    let run =
        run_replicas(&periodic(PeriodicSpec::AntisymPerturbation { kappa: 0.5 }, 707), 4000, None).map_err(err)?;
    let mc = both(
        matches(&run.covariance().map_err(err)?, &pred.covariance, PERIODIC_BIAS),
        matches(&run.gamma_hat().map_err(err)?, &pred.gamma_strato, PERIODIC_BIAS),
    );
    Ok((
        stable && mc.0,
        format!(
            "predicted cov {:.6}·I, Γ₁₂ {:.1e}; K=32 vs K=64 drift {drift:.1e}; {}",
            pred.covariance[(0, 0)],
            pred.gamma_strato[(0, 1)],
            mc.1
        ),
    ))
}

fn corrector_oracle() -> Check {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let fields: [(&str, Vec<(i32, Complex64)>); 2] = [
        ("1 + ½cos", vec![(0, c(1.0, 0.0)), (1, c(0.25, 0.0)), (-1, c(0.25, 0.0))]),
        (
            "two-harmonic",
            vec![(0, c(1.5, 0.0)), (1, c(0.25, 0.2)), (-1, c(0.25, -0.2)), (2, c(0.0, 0.15)), (-2, c(0.0, -0.15))],
        ),
    ];
    let mut worst_phi = 0.0_f64;
    let mut worst_cov = 0.0_f64;
    for (_, modes) in &fields {
        let coeffs = PeriodicCoefficients::scalar_1d(modes).map_err(err)?;
        let phi = torus_poisson_solve(&coeffs, 48).map_err(err)?;
        let pred = periodic_predict(&coeffs, &phi).map_err(err)?;
        let a = |x: f64| coeffs.a(&[x])[(0, 0)];
        let n = 8192;
        let harmonic = n as f64 / (0..n).map(|k| 1.0 / a(k as f64 / n as f64)).sum::<f64>();
        for k in 0..101 {
            let x = (k as f64 + 0.37) / 101.0;
            worst_phi = worst_phi.max((phi.derivative(0, 0, &[x]) - (-1.0 + harmonic / a(x))).abs());
        }
        worst_cov = worst_cov.max((pred.covariance[(0, 0)] - 2.0 * harmonic).abs());
    }
    let closed = {
        let coeffs = PeriodicCoefficients::scalar_1d(&fields[0].1).map_err(err)?;
        let pred = periodic_predict(&coeffs, &torus_poisson_solve(&coeffs, 48).map_err(err)?).map_err(err)?;
        (pred.covariance[(0, 0)] - 2.0 * 0.75f64.sqrt()).abs()
    };
    Ok((
        worst_phi <= CORRECTOR_TOL && worst_cov <= CORRECTOR_TOL && closed <= CORRECTOR_TOL,
        format!("max |Φ′ error| {worst_phi:.1e}, max |cov − 2c*| {worst_cov:.1e}, |cov − 2√¾| {closed:.1e}"),
    ))
}

fn random_values(rng: &mut ChaCha8Rng, points: usize, dim: usize) -> Vec<f64> {
    let lattice = rng.random_bool(0.3);
    let mut v = vec![0.0; points * dim];
    for k in 1..points {
        for i in 0..dim {
            let step = if lattice { rng.random_range(-2..=2) as f64 } else { rng.random_range(-1.0..1.0) };
            v[k * dim + i] = v[(k - 1) * dim + i] + step;
        }
    }
    v
}

fn sampled(values: Vec<f64>, dim: usize, interpretation: Interpretation) -> Result<SampledPath, String> {
    let n = values.len() / dim;
    let times = (0..n).map(|k| k as f64 / (n - 1).max(1) as f64).collect();
    SampledPath::from_flat(dim, times, values, interpretation).map_err(err)
}

fn dist(values: &[f64], dim: usize, i: usize, j: usize) -> f64 {
    (0..dim).map(|c| (values[i * dim + c] - values[j * dim + c]).powi(2)).sum::<f64>().sqrt()
}

fn pvar_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ps = [1.0, 1.5, 2.0, 2.5, 3.0];
    let mut mismatches = 0;
    let mut comparisons = 0;
    for _ in 0..200 {
        let points = rng.random_range(1..=12);
        let dim = rng.random_range(1..=3);
        let values = random_values(&mut rng, points, dim);
        for &p in &ps {
            let dp = pvar_grid_dp(&values, dim, p).map_err(err)?;
            let bf = pvar_bruteforce(&values, dim, p).map_err(err)?;
            let incr = |i, j| dist(&values, dim, i, j);
            let same_sum =
                partition_sum(&dp.optimal_partition, p, incr) == partition_sum(&bf.optimal_partition, p, incr);
            comparisons += 1;
            if dp.value != bf.value || !same_sum {
                mismatches += 1;
            }
        }
    }
    let mut area_mismatches = 0;
    let mut area_comparisons = 0;
    for k in 0..100 {
        let dim = rng.random_range(1..=3);
        let path = sampled(random_values(&mut rng, 10, dim), dim, Interpretation::PiecewiseLinear)?;
        let lift = if k % 2 == 0 { strato_lift_linear(&path) } else { ito_lift_sampled(&path) };
        for q in [1.0, 1.25, 1.5] {
            let dp = pvar_area(&lift, q).map_err(err)?;
            let bf = pvar_area_bruteforce(&lift, q).map_err(err)?;
            let incr = |i, j| lift.area_norm(i, j);
            let same_sum =
                partition_sum(&dp.optimal_partition, q, incr) == partition_sum(&bf.optimal_partition, q, incr);
            area_comparisons += 1;
            if dp.value != bf.value || !same_sum {
                area_mismatches += 1;
            }
        }
    }
    Ok((
        mismatches == 0 && area_mismatches == 0,
        format!("{mismatches}/{comparisons} path and {area_mismatches}/{area_comparisons} area comparisons differ"),
    ))
}

fn relative_chen(lift: &Level2Lift, i: usize, j: usize, k: usize) -> Result<f64, String> {
    let t = lift.times();
    let defect = chen_defect(lift, t[i], t[j], t[k]).map_err(err)?.frobenius_norm();
    let scale = lift.area_norm(i, k)
        + lift.area_norm(i, j)
        + lift.area_norm(j, k)
        + Matrix::outer(&lift.increment(i, j), &lift.increment(j, k)).frobenius_norm();
    Ok(if defect == 0.0 { 0.0 } else { defect / scale })
}

fn random_jump_path(rng: &mut ChaCha8Rng, jumps: usize, dim: usize) -> Result<JumpPath, String> {
    let mut times: Vec<f64> = (0..jumps).map(|_| rng.random_range(0.0..1.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let increments = times.iter().map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let start = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    JumpPath::new(start, times, increments, 1.0).map_err(err)
}

fn chen_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0_f64;
    let mut triples = 0usize;
    let mut kinds = [0usize; 2];
    for k in 0..100 {
        let dim = rng.random_range(1..=3);
        let points = rng.random_range(3..=60);
        let lift = match k % 3 {
            0 => {
                kinds[0] += 1;
                ito_lift_jump(&random_jump_path(&mut rng, points, dim)?)
            }
            1 => {
                kinds[0] += 1;
                ito_lift_sampled(&sampled(random_values(&mut rng, points, dim), dim, Interpretation::GridSamples)?)
            }
            _ => {
                kinds[1] += 1;
                strato_lift_linear(&sampled(
                    random_values(&mut rng, points, dim),
                    dim,
                    Interpretation::PiecewiseLinear,
                )?)
            }
        };
        let n = lift.len();
        if n <= 20 {
            for i in 0..n {
                for j in i..n {
                    for l in j..n {
                        worst = worst.max(relative_chen(&lift, i, j, l)?);
                        triples += 1;
                    }
                }
            }
        } else {
            for _ in 0..2000 {
                let mut t = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
                t.sort_unstable();
                worst = worst.max(relative_chen(&lift, t[0], t[1], t[2])?);
                triples += 1;
            }
        }
    }
    Ok((
        worst <= ALGEBRAIC_TOL,
        format!(
            "{} Itô and {} Stratonovich lifts, {triples} triples, worst relative defect {worst:.2e}",
            kinds[0], kinds[1]
        ),
    ))
}

fn lepingle() -> Check {
    let suites = [
        ("symmetric walk", ConductanceLaw::Constant { kappa: 0.5 }, 1, 1212),
        ("conductance martingale", ConductanceLaw::TwoPoint { a: 1.0, b: 4.0, q: 0.5 }, 2, 1213),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, law, dim, seed) in suites {
        let r = lepingle_diagnostic(&law, dim, 100.0, &[2.5], 500, seed, None).map_err(err)?;
        ok &= r.in_band(LEPINGLE_BAND.0, LEPINGLE_BAND.1);
        details.push(format!("{name} ratio {:.3}", r.ratio[0]));
    }
    Ok((ok, details.join(", ")))
}

fn tightness() -> Check {
    let scales = [50.0, 100.0, 200.0, 400.0];
    let ou_probe = pvar_tightness_probe(&ou(50.0, 1313), 2.5, &scales, 400, None, Some(0.002)).map_err(err)?;
    let law = ConductanceLaw::Uniform { a: 1.0, b: 2.0 };
    let cond_probe =
        pvar_tightness_probe(&conductance(law, 2, 50.0, 1314), 2.5, &scales, 400, None, None).map_err(err)?;
    Ok((
        ou_probe.is_flat(TIGHTNESS_SLOPE) && cond_probe.is_flat(TIGHTNESS_SLOPE),
        format!("q90 slopes: OU {:.4}, conductance {:.4}", ou_probe.slope_q90, cond_probe.slope_q90),
    ))
}

fn rde_discrimination() -> Check {
    let law = ConductanceLaw::TwoPoint { a: 1.0, b: 4.0, q: 0.5 };
    let config = conductance(law, 2, 400.0, 2024);
    let sigma = VectorField::Linear {
        columns: vec![Matrix::identity(2).scale(0.5), Matrix::from_rows(&[&[0.5, 0.0], &[0.0, -0.5]]).map_err(err)?],
    };
    let y0 = [1.0, 1.0];
    let cov = conductance_closed_form_covariance(&law, 2).ok_or("no closed-form covariance")?;
    let prediction = conductance_predict(&law, &cov).map_err(err)?;
    let replicas = 10_000;
    let driven = driven_endpoints(&config, &sigma, &y0, replicas, None).map_err(err)?;
    let limit = |c| limit_endpoints(&sigma, &prediction, c, &y0, 1.0, 1e-3, replicas, config.seed, None).map_err(err);
    let corrected = compare_laws(&driven, &limit(LimitCorrection::Ito)?).map_err(err)?;
    let uncorrected = compare_laws(&driven, &limit(LimitCorrection::None)?).map_err(err)?;
    Ok((
        corrected.within(Z) && uncorrected.beyond(Z),
        format!("corrected max z {:.2}, uncorrected max z {:.2}", corrected.max_z(), uncorrected.max_z()),
    ))
}

fn main() {
    let selected = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut suite = Suite { selected, failures: Vec::new() };
    let timed = |suite: &mut Suite, id: u32, name: &str, f: &dyn Fn() -> Check| {
        if suite.wants(&[id]) {
            let start = Instant::now();
            let check = f();
            suite.record(id, name, start, check);
        }
    };

    ou_criteria(&mut suite);
    conductance_criteria(&mut suite);
    timed(&mut suite, 5, "constant-conductance null", &constant_conductance);
    timed(&mut suite, 6, "periodic diffusion, identity", &periodic_identity);
    timed(&mut suite, 7, "periodic diffusion, non-reversible", &periodic_antisym);
    timed(&mut suite, 8, "one-dimensional corrector oracle", &corrector_oracle);
    timed(&mut suite, 9, "p-variation exactness", &pvar_exactness);
    timed(&mut suite, 10, "Chen relation", &chen_suite);
    timed(&mut suite, 12, "Lépingle diagnostic", &lepingle);
    timed(&mut suite, 13, "tightness probe", &tightness);
    timed(&mut suite, 14, "RDE discrimination", &rde_discrimination);

    if suite.failures.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        suite.failures.sort_unstable();
        println!("acceptance: failed criteria {:?}", suite.failures);
        std::process::exit(1);
    }
}
