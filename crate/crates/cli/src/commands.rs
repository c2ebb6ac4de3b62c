//! The five subcommand bodies. Each CSV job resolves its settings, runs the
//! engine, and assembles an artifact whose header records the full
//! configuration; grid points are emitted in grid order.

use std::path::PathBuf;
use std::process::ExitCode;

use l1pred::oracle;
use l1pred::radial::{parse_model, CenterEstimator, RadialModel};
use l1pred::risk::{constant_risk, optimal_c, restricted_risk, risk_curve, SearchSpec};
use l1pred::uniform::{
    bayes_uniform_predictive, multivariate_uniform_risk_general, univariate_uniform_risk_general,
    UniformBayesInput,
};
use l1pred::validate::{run_suite, Tier};

use crate::config::{self, FileConfig, Job};
use crate::table::{num, num_short, opt_num, Artifact};
use crate::CliError;

/// Risk of the scale-expanded plug-in along a grid of expansion factors,
/// with each point's ratio to the unexpanded risk.
pub fn risk_curve_cmd(job: &Job) -> Result<(), CliError> {
    let p_spec = job.require_p()?;
    let q_spec = job.q_spec(p_spec);
    let p = parse_model(p_spec)?;
    let q = parse_model(q_spec)?;
    let gamma = job.gamma()?;
    let grid_spec = job
        .c_grid
        .as_deref()
        .ok_or_else(|| CliError::Config("missing --c-grid (start:end:step)".into()))?;
    let grid = config::parse_grid("scale grid", grid_spec)?;

    let curve = risk_curve(&p, &q, &grid.values, &gamma, &job.quad)?;
    let base = constant_risk(&p, &q, 1.0, &gamma, &job.quad)?;

    let mut art = Artifact::new("risk-curve", &["c", "risk", "std_err", "ratio_to_R1"]);
    art.meta("p", p_spec);
    art.meta("q", q_spec);
    art.meta("p_resolved", p.describe());
    art.meta("q_resolved", q.describe());
    art.meta("gamma", &job.gamma);
    art.meta("c_grid", &grid.spec);
    art.meta("quad_nodes", job.quad.nodes);
    art.meta("tail_mass", format!("{:e}", job.quad.tail_mass));
    art.meta("seed", job.seed);
    art.meta("risk_at_c1", num(base));
    for pt in &curve.points {
        art.row(vec![
            num(pt.c),
            num(pt.risk),
            opt_num(pt.std_err),
            num(pt.risk / base),
        ]);
    }
    art.write(job.out.as_deref())
}

/// Restricted-parameter risks across center norms: the chosen estimator at
/// the comparison expansion and at c = 1, next to the constant risks of the
/// unrestricted plug-in at its optimum and at c = 1.
pub fn restricted_curve_cmd(job: &Job) -> Result<(), CliError> {
    let p_spec = job.require_p()?;
    let q_spec = job.q_spec(p_spec);
    let p = parse_model(p_spec)?;
    let q = parse_model(q_spec)?;
    let gamma = job.gamma()?;
    let lam_spec = job
        .lambda_grid
        .as_deref()
        .ok_or_else(|| CliError::Config("missing --lambda-grid (start:end:step)".into()))?;
    let lams = config::parse_grid("lambda grid", lam_spec)?;
    if lams.values[0] < 0.0 {
        return Err(CliError::Config(format!(
            "lambda grid must start at a nonnegative center norm, got {}",
            lams.values[0]
        )));
    }
    let estimator = job.estimator()?;
    let search = SearchSpec::default();
    let best = optimal_c(&p, &q, &gamma, &job.quad, &search)?;
    let raw_c1 = constant_risk(&p, &q, 1.0, &gamma, &job.quad)?;

    let mut art = Artifact::new(
        "restricted-curve",
        &[
            "lambda",
            "risk_c1",
            "risk_plugin",
            "risk_rawx_cstar",
            "risk_rawx_c1",
            "se_c1",
            "se_plugin",
        ],
    );
    art.meta("p", p_spec);
    art.meta("q", q_spec);
    art.meta("p_resolved", p.describe());
    art.meta("q_resolved", q.describe());
    art.meta("gamma", &job.gamma);
    art.meta("lambda_grid", &lams.spec);
    art.meta("m", job.m);
    art.meta("estimator", estimator.describe());
    art.meta("c_expansion", job.c);
    art.meta("c_star", num(best.c_star));
    art.meta("c_star_at_boundary", best.at_boundary);
    art.meta("quad_nodes", job.quad.nodes);
    art.meta("tail_mass", format!("{:e}", job.quad.tail_mass));
    art.meta("mc_n", job.mc_n);
    art.meta("mc_batch", job.mc_batch);
    art.meta("seed", job.seed);

    let d = p.dim() as usize;
    for (i, &lam) in lams.values.iter().enumerate() {
        let mut theta = vec![0.0; d];
        theta[0] = lam;
        // Both scales reuse one seed: common draws make the gap between the
        // two columns a paired comparison.
        let mc = job.mc_spec(job.seed.wrapping_add(i as u64));
        let wide = restricted_risk(&p, &q, &estimator, job.c, &theta, &gamma, &job.quad, &mc)?;
        let plug = restricted_risk(&p, &q, &estimator, 1.0, &theta, &gamma, &job.quad, &mc)?;
        art.row(vec![
            num(lam),
            num(wide.value),
            num(plug.value),
            num(best.risk),
            num(raw_c1),
            num(wide.std_err),
            num(plug.std_err),
        ]);
    }
    art.write(job.out.as_deref())
}

/// Closed-form risk table for a uniform-ball target: R(c) and R(1)/R(c) per
/// dimension and center-deviation law. d = 1 uses the interval route, d >= 2
/// the ball route; a law the closed form cannot handle falls back to the
/// sampling oracle with a warning.
pub fn uniform_cmd(job: &Job) -> Result<(), CliError> {
    let m = job.m;
    let grid_spec = job.c_grid.as_deref().unwrap_or("0.2:4:0.01");
    let grid = config::parse_grid("scale grid", grid_spec)?;

    let laws: Vec<(u32, String, RadialModel)> = match &job.p {
        Some(spec) => {
            let law = parse_model(spec)?;
            vec![(law.dim(), spec.clone(), law)]
        }
        None => {
            let mut laws = Vec::new();
            for d in config::parse_dims(&job.dims)? {
                laws.push((
                    d,
                    format!("uniball:d={d},m={m}"),
                    RadialModel::uniform_ball(d, m)?,
                ));
                laws.push((d, format!("normal:d={d},var=1"), RadialModel::normal(d, 1.0)?));
            }
            laws
        }
    };

    let mut art = Artifact::new(
        "uniform",
        &["d", "x_law", "c", "risk", "std_err", "ratio_r1_to_rc", "route"],
    );
    art.meta("target", format!("uniball radius {m}"));
    art.meta("m", m);
    match &job.p {
        Some(spec) => art.meta("p", spec),
        None => art.meta("dims", &job.dims),
    }
    art.meta("c_grid", &grid.spec);
    art.meta("mc_n", job.mc_n);
    art.meta("seed", job.seed);

    let mut fallback_calls = 0u64;
    for (d, label, law) in &laws {
        let mut eval = |c: f64| -> Result<(f64, Option<f64>, &'static str), CliError> {
            let closed = if law.dim() == 1 {
                univariate_uniform_risk_general(law, m, c)
            } else {
                multivariate_uniform_risk_general(law, m, c)
            };
            match closed {
                Ok(r) => Ok((r, None, "closed")),
                Err(l1pred::Error::Unsupported(why)) => {
                    if fallback_calls == 0 {
                        eprintln!(
                            "warning: closed-form route unavailable for {label}: {why}; \
                             using the sampling route"
                        );
                    }
                    fallback_calls += 1;
                    let target = RadialModel::uniform_ball(*d, m)?;
                    let est = oracle::mc_risk(
                        law,
                        &target,
                        &CenterEstimator::RawX,
                        c,
                        &vec![0.0; *d as usize],
                        &l1pred::risk::LossTransform::identity(),
                        (job.mc_n / 50).max(1_000),
                        (job.mc_n / 100).max(1_000),
                        job.seed.wrapping_add(fallback_calls),
                    )?;
                    Ok((est.value, Some(est.std_err), "sampled"))
                }
                Err(e) => Err(e.into()),
            }
        };
        let (base, _, _) = eval(1.0)?;
        for &c in &grid.values {
            let (risk, se, route) = eval(c)?;
            art.row(vec![
                d.to_string(),
                label.clone(),
                num(c),
                num(risk),
                opt_num(se),
                num(base / risk),
                route.into(),
            ]);
        }
    }
    art.write(job.out.as_deref())
}

/// Posterior-median predictive density for the uniform location model under
/// the flat prior: a uniform interval of half-width b around the midrange,
/// or the documented failure when the sample range is below 2a - 4b.
pub fn bayes_uniform_cmd(args: crate::BayesArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    // Either observation source on the command line overrides both file keys.
    let (inline, path) = if args.data.is_some() || args.data_file.is_some() {
        (args.data, args.data_file)
    } else {
        (file.data, file.data_file.map(PathBuf::from))
    };
    let data = match (inline, path) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give observations either inline (--data) or in a file (--data-file), not both"
                    .into(),
            ))
        }
        (Some(list), None) => config::parse_data_list(&list)?,
        (None, Some(p)) => config::read_data_file(&p)?,
        (None, None) => {
            return Err(CliError::Config(
                "missing observations: pass --data v1,v2,... or --data-file path".into(),
            ))
        }
    };
    let a = args
        .a
        .or(file.a)
        .ok_or_else(|| CliError::Config("missing --a (sampling half-width)".into()))?;
    let b = args
        .b
        .or(file.b)
        .ok_or_else(|| CliError::Config("missing --b (target half-width)".into()))?;

    let input = UniformBayesInput::new(data, a, b)?;
    let density = bayes_uniform_predictive(&input)?;
    let (lo, hi) = density.support();
    let (x_min, x_max) = input
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });

    let report = format!(
        "observations: n = {}, range [{}, {}]\n\
         sampling half-width a: {}\n\
         target half-width b: {}\n\
         midrange: {}\n\
         predictive: U({}, {})\n\
         density height on the support: {}\n",
        input.data().len(),
        num_short(x_min),
        num_short(x_max),
        num_short(a),
        num_short(b),
        num_short(density.center),
        num_short(lo),
        num_short(hi),
        num_short(density.pdf(density.center)),
    );
    match args.out.or(file.out.map(PathBuf::from)) {
        Some(path) => std::fs::write(&path, report)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

/// Runs the named cross-checks and reports one PASS/FAIL line each.
pub fn validate_cmd(tier: &str) -> Result<ExitCode, CliError> {
    let tier = match tier {
        "quick" => Tier::Quick,
        "full" => Tier::Full,
        other => {
            return Err(CliError::Config(format!(
                "unknown tier '{other}' (expected quick or full)"
            )))
        }
    };
    let results = run_suite(tier);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("ok: all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAILED: {failed} of {} checks did not pass", results.len());
        Ok(ExitCode::from(4))
    }
}
