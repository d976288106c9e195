use gffperc::coarse::{coarse_contract, connected_columns_check};
use gffperc::gff::Sampler;
use gffperc::lattice::{Region, VertexSet};
use gffperc::observables::{decay_curves, origin, CapacityCache};
use gffperc::potential::{box_capacity_fit, capacity, capacity_mc, killed_green_column};
use gffperc::solver::CgOptions;
use gffperc::stats::Accumulator;
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{contract_params, Ctx};
use crate::CliError;

/// The small config `verify` runs when none is given.
pub const BUNDLED: &str = include_str!("../configs/verify.toml");

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, value: f64, limit: f64, detail: String) -> Check {
    if passed {
        log::info!("verify {name}: ok ({detail})");
    } else {
        log::error!("verify {name}: FAILED ({detail})");
    }
    Check { name, passed, value, limit, detail }
}

/// Runs the invariant suite; any failed check is an invariant error.
pub fn verify(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let d = cfg.d;
    let green = ctx.green()?;
    let caps = CapacityCache::new(&green);
    let mut checks = Vec::new();

    let g0 = green.value(&vec![0; d])?;
    let cap0 = capacity(&origin(d), &green)?;
    let rel = (cap0 * g0 - 1.0).abs();
    checks.push(check("singleton_capacity", rel < 1e-10, rel, 1e-10, format!("cap({{0}}) = {cap0}, 1/g(0) = {}", 1.0 / g0)));

    let fit = box_capacity_fit(&green, &cfg.capacity.scales)?;
    let s = fit.fit.slope;
    checks.push(check(
        "box_capacity_slope",
        (0.85..=1.15).contains(&s),
        s,
        1.15,
        format!("slope {s} over L in {:?}", cfg.capacity.scales),
    ));

    let set = VertexSet::from_points(d, (0..3).map(|k| {
        let mut p = vec![0; d];
        p[k % d] = k as i64;
        p
    }))?;
    let exact = capacity(&set, &green)?;
    let mc = capacity_mc(&set, 4000, 12.0, cfg.seed, ctx.exec)?;
    let z = (mc.estimate - exact).abs() / mc.stderr;
    checks.push(check("capacity_monte_carlo", z < 3.0, z, 3.0, format!("{} ± {} vs exact {exact}", mc.estimate, mc.stderr)));

    // second moments at the centre against the killed Green function
    let domain = Region::centered(d, cfg.side)?;
    let sampler = Sampler::new(&domain);
    let o = vec![0i64; d];
    let mut e1 = o.clone();
    e1[0] = 1;
    let col = killed_green_column(&domain, &o, CgOptions::default())?;
    let (io, ie) = (domain.index(&o).unwrap(), domain.index(&e1).unwrap());
    let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
    for i in 0..cfg.samples {
        let phi = sampler.sample(cfg.seed, i);
        a.push(phi.values[io] * phi.values[io]);
        b.push(phi.values[io] * phi.values[ie]);
    }
    for (name, acc, target) in [("sampler_variance", &a, col[io]), ("sampler_covariance", &b, col[ie])] {
        let z = (acc.mean() - target).abs() / acc.stderr();
        checks.push(check(name, z < 3.0, z, 3.0, format!("{} ± {} vs {target}", acc.mean(), acc.stderr())));
    }

    let negative: Vec<f64> = cfg.h.iter().copied().filter(|&h| h < 0.0).collect();
    if !negative.is_empty() {
        let e = cfg.ensemble();
        let curves = decay_curves(&negative, cfg.n_max, &origin(d), &e, &caps, ctx.exec, None)?;
        let bad: Vec<(f64, Vec<u64>)> =
            curves.iter().map(|c| (c.h, c.negative_level_violations())).filter(|(_, v)| !v.is_empty()).collect();
        checks.push(check("negative_level_decay", bad.is_empty(), bad.len() as f64, 0.0, format!("violations {bad:?}")));
    }

    let report = coarse_contract(&contract_params(cfg)?, &caps, ctx.exec)?;
    let failures = report.failures();
    checks.push(check(
        "coarse_contract",
        report.ok(),
        failures.len() as f64,
        0.0,
        format!("{} configs, {} interfaces, {} draws; {failures:?}", report.rows.len(), report.built(), report.draws),
    ));

    for (dd, l, x, trials) in [(2, 16, 0.1, 100), (3, 12, 0.008, 20)] {
        let r = connected_columns_check(dd, l, x, trials, cfg.seed, ctx.exec)?;
        checks.push(check(
            if dd == 2 { "connected_columns_d2" } else { "connected_columns_d3" },
            r.passed(),
            r.min_fraction,
            r.bound,
            format!("{} trials, min component fraction {} vs bound {}", r.trials, r.min_fraction, r.bound),
        ));
    }

    let mut csv = String::from("check,passed,value,limit\n");
    for c in &checks {
        csv.push_str(&format!("{},{},{},{}\n", c.name, u8::from(c.passed), c.value, c.limit));
    }
    ctx.out.write("verify.csv", csv.as_bytes())?;
    ctx.record_green(&green)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if !failed.is_empty() {
        return Err(CliError::invariant(format!("failed checks: {}", failed.join(", "))));
    }
    Ok(json!({ "checks": checks }))
}
