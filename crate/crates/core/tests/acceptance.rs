//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use subgauss::bounds::{
    bernstein_tail, binomial_threshold, cgf_bound, chen_yang_tail, chernoff_invert,
    hsu_threshold, squared_norm_threshold,
};
use subgauss::inverse::{schedule_demo, AlphaRule, InverseProblemModel, RegularizerKind, ScheduleConfig, ScheduleTable};
use subgauss::law::{iid_mean_law, make_law, Family};
use subgauss::montecarlo::{
    chi_square_sf, clopper_pearson_upper, exact_gaussian_sqnorm_cgf, truncation_convergence,
};
use subgauss::operator::{conjugate, loewner_leq, rank_one_projector, trace_product};
use subgauss::{
    norms, verify_bound, NormTriple, Spectrum, SpectrumFamily, SpectrumSpec, SymmetricOperator,
    TailFunction, TailReport,
};

const SEED: u64 = 7;
const CONFIDENCE: f64 = 0.99;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn tail_matrix() -> Vec<TailReport> {
    let spectra = [("poly:2", 100), ("exp:0.5", 30), ("identity", 5)];
    let mut reports = Vec::new();
    for family in Family::ALL {
        for (spec, dim) in spectra {
            let spectrum = spec.parse::<SpectrumSpec>().unwrap().build(Some(dim)).unwrap();
            let r = SymmetricOperator::from_spectrum(&spectrum);
            let law = make_law(family, &r).unwrap();
            let bound = TailFunction::squared_norm(spectrum.norms()).unwrap();
            reports.push(
                verify_bound(&law, &bound, &[0.5, 1.0, 2.0, 3.0], 1_000_000, SEED, CONFIDENCE)
                    .unwrap(),
            );
        }
    }
    reports
}

fn hoeffding_reports() -> Vec<TailReport> {
    let spectrum = Spectrum::polynomial(2.0, 50).unwrap();
    let base = make_law(Family::Gaussian, &SymmetricOperator::from_spectrum(&spectrum)).unwrap();
    let mean = iid_mean_law(&base, 16).unwrap();
    let hoeffding = TailFunction::hoeffding_mean(spectrum.norms(), 16).unwrap();
    let squared = TailFunction::squared_norm(norms(mean.proxy()).unwrap()).unwrap();
    vec![
        verify_bound(&mean, &hoeffding, &[1.0, 2.0, 3.0], 100_000, SEED, CONFIDENCE).unwrap(),
        verify_bound(&mean, &squared, &[0.5, 1.0, 2.0, 3.0], 100_000, SEED, CONFIDENCE).unwrap(),
    ]
}

fn summarize(reports: &[TailReport]) -> Outcome {
    let rows: Vec<_> = reports.iter().flat_map(|r| &r.rows).collect();
    let failed = rows.iter().filter(|r| !r.pass).count();
    let worst = rows
        .iter()
        .map(|r| r.cp_upper / r.bound)
        .fold(0.0_f64, f64::max);
    outcome(
        failed == 0,
        format!(
            "{} cells, {failed} failing, max cp_upper/e^-t = {worst:.4}",
            rows.len()
        ),
    )
}

fn criterion_1() -> Outcome {
    summarize(&tail_matrix())
}

fn criterion_2() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for d in 1..=50 {
        let nt = Spectrum::identity(d).unwrap().norms();
        for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let sf = chi_square_sf(d, squared_norm_threshold(&nt, t).unwrap()).unwrap();
            worst = worst.max(sf - (-t).exp());
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{checked} cases, max(sf - e^-t) = {worst:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = common::rng(3);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let d = rng.random_range(1..=100);
        let gammas = common::spectrum(&mut rng, d);
        let nt = NormTriple::from_eigenvalues(&gammas);
        for k in 0..20 {
            let lambda = 0.95 / (2.0 * nt.op) * k as f64 / 20.0;
            let exact = exact_gaussian_sqnorm_cgf(&gammas, lambda).unwrap();
            worst = worst.max(exact - cgf_bound(&nt, lambda).unwrap());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("1000 cases, max(exact - bound) = {worst:.3e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = common::rng(4);
    let mut worst = 0.0_f64;
    let ts = log_grid(0.01, 10.0, 13);
    for _ in 0..20 {
        let d = rng.random_range(1..=100);
        let nt = NormTriple::from_eigenvalues(&common::spectrum(&mut rng, d));
        for &t in &ts {
            let closed = squared_norm_threshold(&nt, t).unwrap();
            let numeric = chernoff_invert(&nt, t).unwrap();
            worst = worst.max(((numeric - closed) / closed).abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{} cases, max relative gap = {worst:.3e}", 20 * ts.len()),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = common::rng(5);
    let eps_grid = log_grid(1e-2, 1e2, 20);
    let t_grid = log_grid(1e-2, 10.0, 13);
    let (mut bern, mut hsu, mut binom) = (0, 0, 0);
    for _ in 0..200 {
        let (m, d) = (common::dim(&mut rng), common::dim(&mut rng));
        let a = common::gaussian_matrix(&mut rng, m, d);
        let r = common::positive(&mut rng, d);
        let nr = norms(&r).unwrap();
        let nb = norms(&conjugate(&a, &r).unwrap()).unwrap();
        for nt in [&nr, &nb] {
            for &eps in &eps_grid {
                if bernstein_tail(nt, eps).unwrap() > chen_yang_tail(nt, eps).unwrap() {
                    bern += 1;
                }
            }
        }
        for &t in &t_grid {
            let lhs = squared_norm_threshold(&nb, t).unwrap();
            if lhs > hsu_threshold(&a, r.op_norm(), t).unwrap() * (1.0 + 1e-12) {
                hsu += 1;
            }
            for nt in [&nr, &nb] {
                let th = squared_norm_threshold(nt, t).unwrap();
                if th > binomial_threshold(nt, t).unwrap() * (1.0 + 1e-12) {
                    binom += 1;
                }
            }
        }
    }
    outcome(
        bern + hsu + binom == 0,
        format!("200 pairs, violations: bernstein>chen_yang {bern}, threshold>hsu {hsu}, threshold>binomial {binom}"),
    )
}

fn criterion_6() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = common::rng(6);
    let names = [
        "cyclic trace",
        "trace order",
        "conjugation monotone in R",
        "gram order => conjugation order",
        "projector trace",
    ];
    let mut failures = [0usize; 5];
    for _ in 0..1000 {
        let (m, d) = (common::dim(&mut rng), common::dim(&mut rng));

        let a = common::gaussian_matrix(&mut rng, m, d);
        let b = common::gaussian_matrix(&mut rng, d, m);
        let (ab, ba) = (trace_product(&a, &b).unwrap(), trace_product(&b, &a).unwrap());
        if (ab - ba).abs() > TOL * (1.0 + ab.abs()) {
            failures[0] += 1;
        }

        let p = common::positive(&mut rng, d);
        let c = SymmetricOperator::dense(common::symmetric(&mut rng, d)).unwrap();
        let r = c.add(&common::positive(&mut rng, d)).unwrap();
        let (lo, hi) = (trace_product(&p, &c).unwrap(), trace_product(&p, &r).unwrap());
        if lo > hi + TOL * (1.0 + lo.abs() + hi.abs()) {
            failures[1] += 1;
        }

        let c = common::positive(&mut rng, d);
        let r = c.add(&common::positive(&mut rng, d)).unwrap();
        if !loewner_leq(&conjugate(&a, &c).unwrap(), &conjugate(&a, &r).unwrap(), TOL).unwrap() {
            failures[2] += 1;
        }

        // every pair with AᵀA ⪯ CᵀC and C invertible has this form
        let cmap = common::gaussian_matrix(&mut rng, m, d);
        let amap = common::contraction(&mut rng, m).matmul(&cmap).unwrap();
        let r = common::positive(&mut rng, d);
        let gram_a = SymmetricOperator::dense(amap.gram()).unwrap();
        let gram_c = SymmetricOperator::dense(cmap.gram()).unwrap();
        assert!(loewner_leq(&gram_a, &gram_c, TOL).unwrap());
        if !loewner_leq(&conjugate(&amap, &r).unwrap(), &conjugate(&cmap, &r).unwrap(), TOL).unwrap() {
            failures[3] += 1;
        }

        let s = common::symmetric(&mut rng, d);
        let u = common::gaussian_matrix(&mut rng, d, 1).entries().to_vec();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit: Vec<f64> = u.iter().map(|x| x / norm).collect();
        let form: f64 = unit.iter().zip(s.apply(&unit).unwrap()).map(|(x, y)| x * y).sum();
        let tr = trace_product(&s, &rank_one_projector(&u).unwrap()).unwrap();
        if (form - tr).abs() > TOL * (1.0 + form.abs()) {
            failures[4] += 1;
        }
    }
    let detail = names
        .iter()
        .zip(failures)
        .map(|(n, f)| format!("{n} {f}/1000"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(failures.iter().all(|&f| f == 0), format!("violations: {detail}"))
}

fn criterion_7() -> Outcome {
    summarize(&hoeffding_reports())
}

fn schedule(rule: AlphaRule) -> ScheduleTable {
    let (forward, truth) = InverseProblemModel::default_forward(100).unwrap();
    let base = SymmetricOperator::from_spectrum(&Spectrum::polynomial(2.0, 100).unwrap());
    schedule_demo(&ScheduleConfig {
        forward,
        truth,
        base_proxy: base,
        family: Family::Gaussian,
        sigma2: 1.0,
        kind: RegularizerKind::Tikhonov,
        alpha_rule: rule,
        s: 0.0,
        n_grid: vec![100, 1000, 10_000],
        delta: 0.01,
        trials: 10_000,
        seed: SEED,
    })
    .unwrap()
}

fn criterion_8() -> Outcome {
    let consistent = schedule(AlphaRule::Power { exponent: 0.25 });
    let boundary = schedule(AlphaRule::Power { exponent: 0.5 });
    let cp: Vec<f64> = consistent
        .rows
        .iter()
        .map(|r| clopper_pearson_upper(r.exceed_count, r.trials as u64, CONFIDENCE).unwrap())
        .collect();
    let exceed_ok = cp.iter().all(|&u| u <= 0.01);
    let decreasing = consistent.simplified_decreasing();
    let first = boundary.rows.first().unwrap().simplified_bound;
    let last = boundary.rows.last().unwrap().simplified_bound;
    let flat = last >= first * (1.0 - 1e-9);
    let holds = consistent.all_bounds_hold() && boundary.all_bounds_hold();
    outcome(
        exceed_ok && decreasing && flat && holds && consistent.consistent && !boundary.consistent,
        format!(
            "cp_upper {cp:.5?}, n^-1/4 column decreasing {decreasing}, n^-1/2 column {first:.4}->{last:.4}, bounds above quantiles {holds}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let table = truncation_convergence(
        SpectrumFamily::polynomial(2.0).unwrap(),
        &[1, 2, 5, 10, 50, 100, 500],
        1.0,
    )
    .unwrap();
    let monotone = table.is_monotone();
    let gap = table.limit_gap().unwrap();
    let last = table.rows.last().unwrap();
    let trace_gap = std::f64::consts::PI.powi(2) / 6.0 - last.trace;
    outcome(
        monotone && gap.abs() <= 1e-2 && trace_gap.abs() <= 2e-3,
        format!("monotone {monotone}, threshold gap {gap:.5}, trace gap {trace_gap:.5}"),
    )
}

fn csv_bundle(reports: &[TailReport]) -> String {
    reports.iter().map(|r| r.to_csv_string().unwrap()).collect()
}

fn criterion_10() -> Outcome {
    let run = |workers: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap()
            .install(|| (csv_bundle(&tail_matrix()), csv_bundle(&hoeffding_reports())))
    };
    let one = run(1);
    let four = run(4);
    let same_matrix = one.0 == four.0;
    let same_mean = one.1 == four.1;
    outcome(
        same_matrix && same_mean,
        format!(
            "tail matrix identical {same_matrix} ({} bytes), iid mean identical {same_mean} ({} bytes)",
            one.0.len(),
            one.1.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("tail validity matrix", criterion_1),
        ("chi-square oracle", criterion_2),
        ("CGF domination", criterion_3),
        ("Chernoff inversion", criterion_4),
        ("formula dominance", criterion_5),
        ("operator property suite", criterion_6),
        ("iid mean tails", criterion_7),
        ("inverse problem schedule", criterion_8),
        ("truncation convergence", criterion_9),
        ("worker-count determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all_pass = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        all_pass &= result.pass;
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
