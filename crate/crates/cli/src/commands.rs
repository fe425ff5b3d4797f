//! Execution of resolved experiment configs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use subgauss::bounds::{
    bernstein_tail, binomial_threshold, cgf_bound, chen_yang_tail, chernoff_invert,
    hoeffding_sum_tail, norm_deviation, outer_tail, squared_norm_threshold,
};
use subgauss::inverse::{schedule_demo, InverseProblemModel, RegularizerKind, ScheduleConfig};
use subgauss::law::{iid_mean_law, make_law};
use subgauss::montecarlo::clopper_pearson_upper;
use subgauss::{
    norms, verify_bound, Error, NormTriple, Result, SymmetricOperator, TailFunction,
};

use crate::config::{
    BoundsEvalConfig, CompareConfig, EvalBound, ExperimentConfig, InverseConfig, RegularizerName,
    SuiteConfig, VerifyBound, VerifyConfig,
};
use crate::suite;

/// What a command produced: whether its declared checks passed, the files it
/// wrote and a JSON report for the summary.
pub struct Outcome {
    pub pass: bool,
    pub outputs: Vec<PathBuf>,
    pub report: Value,
}

pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    fs::create_dir_all(out)?;
    match config {
        ExperimentConfig::Verify(c) => verify(c, out),
        ExperimentConfig::BoundsEval(c) => bounds_eval(c, out),
        ExperimentConfig::Compare(c) => compare(c, out),
        ExperimentConfig::Inverse(c) => inverse(c, out),
        ExperimentConfig::PropertySuite(c) => property_suite(c, out),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn positive_grid(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty("grid"));
    }
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("{what} grid must be finite and nonnegative")));
    }
    Ok(())
}

fn verify(c: &VerifyConfig, out: &Path) -> Result<Outcome> {
    let spectrum = c.spectrum.build(c.dim)?;
    let r = SymmetricOperator::from_spectrum(&spectrum);
    let base = make_law(c.law, &r)?;
    let law = iid_mean_law(&base, c.mean_of)?;
    let nt = norms(law.proxy())?;
    let bound = match c.bound {
        VerifyBound::Sqnorm => TailFunction::squared_norm(nt)?,
        VerifyBound::NormDeviation => TailFunction::norm_deviation(nt)?,
        VerifyBound::OuterTail => TailFunction::outer_tail(nt)?,
        VerifyBound::Hoeffding => TailFunction::hoeffding_mean(spectrum.norms(), c.mean_of)?,
        VerifyBound::Bernstein => TailFunction::bernstein(nt)?,
        VerifyBound::ChenYang => TailFunction::chen_yang(nt)?,
    };
    let ts = c.t_grid.values();
    positive_grid(&ts, "t")?;
    let report = verify_bound(&law, &bound, &ts, c.n, c.seed, c.confidence)?;
    let path = out.join("verify.csv");
    report.write_csv(fs::File::create(&path)?)?;
    Ok(Outcome {
        pass: report.all_pass(),
        outputs: vec![path],
        report: serde_json::to_value(&report)?,
    })
}

fn eval_norms(c: &BoundsEvalConfig) -> Result<NormTriple> {
    let sources = [c.triple.is_some(), c.operator.is_some(), c.spectrum.is_some()];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(Error::Domain(
            "give exactly one of `triple`, `operator` or `spectrum`".into(),
        ));
    }
    if let Some(nt) = c.triple {
        nt.validate()?;
        return Ok(nt);
    }
    if let Some(op) = &c.operator {
        return norms(&SymmetricOperator::try_from(op.clone())?);
    }
    let spectrum = c.spectrum.as_ref().expect("checked above").build(c.dim)?;
    Ok(spectrum.norms())
}

#[derive(Serialize)]
struct EvalRow {
    t_or_eps: f64,
    value: f64,
}

fn bounds_eval(c: &BoundsEvalConfig, out: &Path) -> Result<Outcome> {
    let nt = eval_norms(c)?;
    let grid = c.grid.values();
    positive_grid(&grid, "evaluation")?;
    let rows = grid
        .iter()
        .map(|&x| {
            let value = match c.bound {
                EvalBound::Cgf => cgf_bound(&nt, x)?,
                EvalBound::SqnormThreshold => squared_norm_threshold(&nt, x)?,
                EvalBound::BinomialThreshold => binomial_threshold(&nt, x)?,
                EvalBound::ChernoffThreshold => chernoff_invert(&nt, x)?,
                EvalBound::NormDeviation => norm_deviation(&nt, x)?,
                EvalBound::OuterTail => outer_tail(&nt, x)?,
                EvalBound::Hoeffding => {
                    let n = c.n.ok_or_else(|| Error::Domain("hoeffding needs `n`".into()))?;
                    hoeffding_sum_tail(&nt, n, x)?
                }
                EvalBound::Bernstein => bernstein_tail(&nt, x)?,
                EvalBound::ChenYang => chen_yang_tail(&nt, x)?,
            };
            Ok(EvalRow { t_or_eps: x, value })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("bounds.csv");
    write_csv(&path, &rows)?;
    Ok(Outcome {
        pass: true,
        outputs: vec![path],
        report: json!({ "norms": nt, "rows": rows.len() }),
    })
}

#[derive(Serialize)]
struct CompareRow {
    eps: f64,
    bernstein: f64,
    chen_yang: f64,
}

fn compare(c: &CompareConfig, out: &Path) -> Result<Outcome> {
    let nt = c.spectrum.build(c.dim)?.norms();
    let grid = c.eps_grid.values();
    positive_grid(&grid, "eps")?;
    let rows = grid
        .iter()
        .map(|&eps| {
            Ok(CompareRow {
                eps,
                bernstein: bernstein_tail(&nt, eps)?,
                chen_yang: chen_yang_tail(&nt, eps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = rows.iter().filter(|r| r.bernstein > r.chen_yang).count();
    let path = out.join("compare.csv");
    write_csv(&path, &rows)?;
    Ok(Outcome {
        pass: violations == 0,
        outputs: vec![path],
        report: json!({ "norms": nt, "rows": rows.len(), "violations": violations }),
    })
}

fn inverse(c: &InverseConfig, out: &Path) -> Result<Outcome> {
    let kind = match c.kind {
        RegularizerName::Tikhonov => RegularizerKind::Tikhonov,
        RegularizerName::Tsvd => RegularizerKind::Tsvd,
        RegularizerName::Landweber => RegularizerKind::Landweber {
            eta: c
                .eta
                .ok_or_else(|| Error::Domain("landweber needs a step `eta`".into()))?,
        },
    };
    let (forward, truth) = InverseProblemModel::default_forward(c.dim)?;
    let base = SymmetricOperator::from_spectrum(&c.noise_spectrum.build(Some(c.dim))?);
    let table = schedule_demo(&ScheduleConfig {
        forward,
        truth,
        base_proxy: base,
        family: c.family,
        sigma2: c.sigma2,
        kind,
        alpha_rule: c.alpha_rule,
        s: c.s,
        n_grid: c.n_grid.clone(),
        delta: c.delta,
        trials: c.trials,
        seed: c.seed,
    })?;
    let cp_upper = table
        .rows
        .iter()
        .map(|r| clopper_pearson_upper(r.exceed_count, r.trials as u64, 0.99))
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("inverse.csv");
    table.write_csv(fs::File::create(&path)?)?;
    Ok(Outcome {
        pass: table.all_bounds_hold(),
        outputs: vec![path],
        report: json!({
            "table": table,
            "simplified_decreasing": table.simplified_decreasing(),
            "exceedance_cp_upper_99": cp_upper,
        }),
    })
}

fn property_suite(c: &SuiteConfig, out: &Path) -> Result<Outcome> {
    if c.instances == 0 || c.min_dim == 0 || c.min_dim > c.max_dim || !(c.tolerance > 0.0) {
        return Err(Error::Domain(
            "property suite needs instances >= 1, 1 <= min_dim <= max_dim and tolerance > 0".into(),
        ));
    }
    let rows = suite::run(c)?;
    let path = out.join("property_suite.csv");
    write_csv(&path, &rows)?;
    Ok(Outcome {
        pass: rows.iter().all(|r| r.violations == 0),
        outputs: vec![path],
        report: serde_json::to_value(&rows)?,
    })
}
