use gffperc::analytic::{series_eval, ObservableSpec};
use gffperc::coarse::{coarse_contract, ContractParams};
use gffperc::export;
use gffperc::gff::Sampler;
use gffperc::lattice::{Region, VertexSet};
use gffperc::observables::{decay_curves, estimate_h_star, origin, theta_hat, CapacityCache};
use gffperc::par::Execution;
use gffperc::potential::{box_capacity_fit, capacity_mc, equilibrium_exact, write_cache, FreeGreen};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::manifest::{sha256_hex, GreenChecksum, Outputs};
use crate::CliError;

/// Shared state of one command run.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub exec: Execution,
    pub out: Outputs,
    pub greens: Vec<GreenChecksum>,
    pub h_star: Option<Value>,
}

impl Ctx<'_> {
    pub fn green(&self) -> Result<FreeGreen, CliError> {
        Ok(FreeGreen::from_env_cache(self.cfg.d, self.cfg.green_tol)?)
    }

    /// Records the checksum of the table as it stands after the run and
    /// refreshes the on-disk cache.
    pub fn record_green(&mut self, green: &FreeGreen) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_cache(green, &mut buf)?;
        self.greens.push(GreenChecksum {
            d: green.dim(),
            tol: green.tolerance(),
            entries: green.entries().len(),
            sha256: sha256_hex(&buf),
        });
        if let Err(e) = green.persist_env_cache() {
            log::warn!("could not refresh the Green cache: {e}");
        }
        Ok(())
    }

    /// `h_*` from the config, or from a crossing scan when one is requested.
    pub fn resolve_h_star(&mut self) -> Result<Option<f64>, CliError> {
        if let Some(h) = self.cfg.h_star {
            self.h_star = Some(json!({ "estimate": h, "source": "config" }));
            return Ok(Some(h));
        }
        if self.cfg.h_star_samples == 0 {
            return Ok(None);
        }
        let e = gffperc::observables::Ensemble { samples: self.cfg.h_star_samples, ..self.cfg.ensemble() };
        let est = estimate_h_star(&e, self.exec)?;
        log::info!("h_* ≈ {} [{}, {}] from {} crossings", est.estimate, est.ci_lo, est.ci_hi, est.samples);
        let h = est.estimate;
        self.h_star = Some(json!({ "source": "crossing_scan", "estimate": est }));
        Ok(Some(h))
    }
}

/// Canonical displacements `r ≥ x1 ≥ … ≥ xd ≥ 0`.
fn canonical_keys(d: usize, r: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|k: Vec<u32>| {
                let top = k.last().copied().unwrap_or(r);
                (0..=top).map(move |v| {
                    let mut k = k.clone();
                    k.push(v);
                    k
                })
            })
            .collect();
    }
    out
}

pub fn green(ctx: &mut Ctx) -> Result<Value, CliError> {
    let g = ctx.green()?;
    let keys = canonical_keys(ctx.cfg.d, ctx.cfg.green.radius);
    g.ensure(keys.iter().cloned())?;
    let mut entries: Vec<(Vec<u32>, f64)> = keys.iter().map(|k| {
        let x: Vec<i64> = k.iter().map(|&c| c as i64).collect();
        g.value(&x).map(|v| (k.clone(), v))
    }).collect::<gffperc::Result<_>>()?;
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let d = ctx.cfg.d;
    ctx.out.write_with("green.csv", |w| export::write_green(w, &entries, d))?;
    ctx.out.write_with("green.gffg", |w| write_cache(&g, w))?;
    let g0 = g.value(&vec![0; d])?;
    ctx.record_green(&g)?;
    Ok(json!({ "g00": g0, "cap_singleton": 1.0 / g0, "tabulated": entries.len() }))
}

pub fn capacity(ctx: &mut Ctx) -> Result<Value, CliError> {
    let g = ctx.green()?;
    let d = ctx.cfg.d;
    let fit = box_capacity_fit(&g, &ctx.cfg.capacity.scales)?;
    ctx.out.write_with("capacity.csv", |w| export::write_capacity(w, &fit, d))?;
    let cube = VertexSet::from_region(&Region::cube(d, 0, ctx.cfg.capacity.measure_side)?);
    let m = equilibrium_exact(&cube, &g)?;
    ctx.out.write_with("measure.csv", |w| export::write_measure(w, &m, d))?;
    let mut results = json!({
        "slope": fit.fit.slope,
        "slope_stderr": fit.fit.slope_stderr,
        "constant": fit.constant,
        "measure_side": ctx.cfg.capacity.measure_side,
        "measure_capacity": m.capacity,
    });
    if ctx.cfg.capacity.mc_walks > 0 {
        let side = ctx.cfg.capacity.measure_side as f64;
        let mc = capacity_mc(&cube, ctx.cfg.capacity.mc_walks, 4.0 * side + 4.0, ctx.cfg.seed, ctx.exec)?;
        results["monte_carlo"] = json!({
            "estimate": mc.estimate,
            "stderr": mc.stderr,
            "z_score": (mc.estimate - m.capacity) / mc.stderr,
        });
    }
    ctx.record_green(&g)?;
    Ok(results)
}

pub fn sample(ctx: &mut Ctx) -> Result<Value, CliError> {
    let domain = Region::centered(ctx.cfg.d, ctx.cfg.side)?;
    let sampler = Sampler::new(&domain);
    let mut files = Vec::new();
    for i in 0..ctx.cfg.sample.count {
        let phi = sampler.sample(ctx.cfg.seed, i);
        let name = format!("field_{i}.csv");
        ctx.out.write_with(&name, |w| export::write_field(w, &phi))?;
        ctx.out.write(&format!("field_{i}.json"), phi.sidecar_json()?.as_bytes())?;
        files.push(name);
    }
    Ok(json!({ "fields": files, "sites": domain.len() }))
}

pub fn theta(ctx: &mut Ctx) -> Result<Value, CliError> {
    let h_star = ctx.resolve_h_star()?;
    let curves = theta_hat(&ctx.cfg.h, &ctx.cfg.theta.sides, &ctx.cfg.ensemble(), ctx.exec)?;
    ctx.out.write_with("theta.csv", |w| export::write_theta(w, &curves))?;
    Ok(json!({ "h_star": h_star, "sides": ctx.cfg.theta.sides }))
}

fn level_tag(h: f64) -> String {
    format!("{h}").replace('.', "p")
}

pub fn decay(ctx: &mut Ctx) -> Result<Value, CliError> {
    let h_star = ctx.resolve_h_star()?;
    let g = ctx.green()?;
    let caps = CapacityCache::new(&g);
    let e = ctx.cfg.ensemble();
    let curves = decay_curves(&ctx.cfg.h, ctx.cfg.n_max, &origin(ctx.cfg.d), &e, &caps, ctx.exec, h_star)?;
    let mut levels = Vec::new();
    for c in &curves {
        ctx.out.write_with(&format!("decay_h{}.csv", level_tag(c.h)), |w| export::write_decay(w, c))?;
        levels.push(json!({
            "h": c.h,
            "samples": c.samples,
            "infinite": c.infinite,
            "overflow": c.overflow,
            "mc_fallbacks": c.mc_fallbacks,
            "rate_fit": c.rate_fit,
            "rate": c.rate().map(|r| r.0),
            "negative_level_violations": (c.h < 0.0).then(|| c.negative_level_violations()),
        }));
    }
    ctx.record_green(&g)?;
    Ok(json!({
        "d": e.d,
        "domain": e.domain()?,
        "margin": e.margin,
        "seed": e.seed,
        "h_star_estimate": h_star,
        "levels": levels,
    }))
}

pub fn extend(ctx: &mut Ctx) -> Result<Value, CliError> {
    let g = ctx.green()?;
    let caps = CapacityCache::new(&g);
    let e = ctx.cfg.ensemble();
    let d = ctx.cfg.d;
    let zs: Vec<Complex64> =
        ctx.cfg.h.iter().flat_map(|&h| ctx.cfg.extend.t.iter().map(move |&t| Complex64::new(h, t))).collect();
    if zs.is_empty() {
        return Err(CliError::config("extend.t: need at least one imaginary part"));
    }
    let mut per_obs = Vec::new();
    for name in &ctx.cfg.observables {
        let spec = ObservableSpec::by_name(name, d).expect("validated observable");
        let results = series_eval(&spec, &origin(d), &zs, ctx.cfg.n_max, &e, &caps, ctx.exec)?;
        ctx.out.write_with(&format!("extension_{name}.csv"), |w| export::write_extension(w, &results))?;
        let mut bound_violations = Vec::new();
        for r in &results {
            let t = r.z.im;
            for (i, (f, a)) in r.per_n.iter().zip(&r.abs_version).enumerate() {
                let n = (i + 1) as f64;
                let rhs = (0.5 * t * t * n).exp() * a.mean + 3.0 * (f.stderr + (0.5 * t * t * n).exp() * a.stderr);
                if f.value.norm() > rhs {
                    bound_violations.push(json!({ "z": [r.z.re, t], "N": i + 1 }));
                }
            }
        }
        per_obs.push(json!({
            "observable": name,
            "mass_beyond": results.iter().map(|r| r.mass_beyond).fold(0.0, f64::max),
            "growth_violations": results.iter().map(|r| r.growth_violations).sum::<u64>(),
            "certificates": results.iter().map(|r| &r.certificate).collect::<Vec<_>>(),
            "bound_violations": bound_violations,
        }));
    }
    ctx.record_green(&g)?;
    Ok(json!({ "z": zs.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(), "observables": per_obs }))
}

pub fn contract_params(cfg: &RunConfig) -> Result<ContractParams, CliError> {
    Ok(ContractParams {
        d: cfg.d,
        side: cfg.side,
        margin: cfg.margin,
        h: cfg.coarse.h,
        eps0: cfg.coarse.eps0,
        regime: cfg.coarse.regime,
        seed: cfg.seed,
        configs: cfg.coarse.configs,
        max_draws: cfg.coarse.max_draws,
        scales: cfg.coarse.scales.clone(),
        schedule: cfg.schedule().map_err(CliError::config)?,
        enlargement: cfg.enlargement(),
    })
}

const COARSE_COLUMNS: &str = "index,N,capacity,diameter,stop_reason,steps,boxes,premise_failures,admissibility_ok,separation_ok,audit_ok,chain_ok,deterministic";

pub fn coarse(ctx: &mut Ctx) -> Result<Value, CliError> {
    let g = ctx.green()?;
    let caps = CapacityCache::new(&g);
    let report = coarse_contract(&contract_params(ctx.cfg)?, &caps, ctx.exec)?;
    let mut csv = String::from(COARSE_COLUMNS);
    csv.push('\n');
    for r in &report.rows {
        let stop = r.stop_reason.map_or("none".to_string(), |s| {
            serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        });
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            r.n,
            r.capacity,
            r.diameter,
            stop,
            r.steps,
            r.boxes,
            r.premise_failures,
            u8::from(r.admissibility_ok),
            u8::from(r.separation_ok),
            u8::from(r.audit_ok),
            u8::from(r.chain_ok),
            u8::from(r.deterministic),
        ));
    }
    ctx.out.write("coarse.csv", csv.as_bytes())?;
    let ifaces = serde_json::to_vec_pretty(&report.interfaces).map_err(|e| CliError::io(e.to_string()))?;
    ctx.out.write("interfaces.json", &ifaces)?;
    ctx.record_green(&g)?;
    let failures = report.failures();
    if !failures.is_empty() {
        return Err(CliError::invariant(failures.join("\n")));
    }
    if report.rows.len() < report.params.configs {
        return Err(CliError::numeric(format!(
            "only {} of {} configurations had a finite origin cluster in {} draws",
            report.rows.len(),
            report.params.configs,
            report.draws
        )));
    }
    Ok(json!({
        "draws": report.draws,
        "accepted": report.rows.len(),
        "interfaces_built": report.built(),
        "skipped": report.rows.iter().filter(|r| r.skipped.is_some()).count(),
    }))
}
