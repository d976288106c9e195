use super::events::{audit_admissibility, subcritical_events, supercritical_events, Regime};
use super::interface::{audit_interface, build_interface, Interface, Schedule, StopReason};
use super::separation::{chain_separation, separating_check};
use super::CoarseConfig;
use crate::gff::Sampler;
use crate::lattice::{Enlargement, Region};
use crate::observables::{bin_of, CapacityCache};
use crate::par::{self, Execution};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Batch run of the coarse-graining contract on sampled configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractParams {
    pub d: usize,
    pub side: usize,
    pub margin: usize,
    pub h: f64,
    pub eps0: f64,
    pub regime: Regime,
    pub seed: u64,
    /// Configurations with a finite nonempty origin cluster to collect.
    pub configs: usize,
    /// Give up after this many draws.
    pub max_draws: u64,
    /// Scales for the admissibility and single-scale separation audits.
    pub scales: Vec<i64>,
    pub schedule: Schedule,
    pub enlargement: Enlargement,
}

impl ContractParams {
    /// Small supercritical setup on `15³` with the desk schedule. At `h = 0.3`
    /// a few percent of the draws have a finite nonempty origin cluster; at
    /// `h = 0` it is well under one percent.
    pub fn desk(configs: usize, seed: u64) -> Self {
        ContractParams {
            d: 3,
            side: 15,
            margin: 1,
            h: 0.3,
            eps0: 0.2,
            regime: Regime::Supercritical,
            seed,
            configs,
            max_draws: 200 * configs as u64 + 1000,
            scales: vec![1, 2, 4],
            schedule: Schedule::desk(3),
            enlargement: Enlargement::compact(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractRow {
    /// Sample index within the seed stream.
    pub index: u64,
    pub n: u64,
    pub capacity: f64,
    pub diameter: u64,
    pub admissibility_ok: bool,
    pub separation_ok: bool,
    /// `None` when the construction's precondition fails on this cluster.
    pub stop_reason: Option<StopReason>,
    pub skipped: Option<String>,
    pub steps: usize,
    pub boxes: usize,
    pub premise_failures: usize,
    pub audit_ok: bool,
    pub chain_ok: bool,
    pub deterministic: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub params: ContractParams,
    pub draws: u64,
    pub rows: Vec<ContractRow>,
    /// Interfaces in the same order as the rows that built one.
    #[serde(skip)]
    pub interfaces: Vec<Interface>,
}

impl ContractReport {
    pub fn built(&self) -> usize {
        self.rows.iter().filter(|r| r.stop_reason.is_some()).count()
    }

    pub fn failures(&self) -> Vec<String> {
        self.rows.iter().flat_map(|r| r.failures.iter().map(move |f| format!("sample {}: {f}", r.index))).collect()
    }

    pub fn ok(&self) -> bool {
        self.rows.len() == self.params.configs && self.rows.iter().all(|r| r.failures.is_empty())
    }
}

fn check_one(
    p: &ContractParams,
    sampler: &Sampler,
    index: u64,
    caps: &CapacityCache,
) -> Result<(ContractRow, Option<Interface>)> {
    let phi = sampler.sample(p.seed, index);
    let events = match p.regime {
        Regime::Supercritical => supercritical_events(p.h, p.eps0, None)?,
        Regime::Subcritical => subcritical_events(p.h, p.eps0, None)?,
    };
    let cfg = CoarseConfig::new(&phi, p.h, p.margin, p.enlargement)?;
    let (capacity, _) = caps.with_fallback(&cfg.cluster().closure())?;
    let n = bin_of(capacity);
    let mut row = ContractRow {
        index,
        n,
        capacity,
        diameter: cfg.diameter(),
        admissibility_ok: true,
        separation_ok: true,
        stop_reason: None,
        skipped: None,
        steps: 0,
        boxes: 0,
        premise_failures: 0,
        audit_ok: true,
        chain_ok: true,
        deterministic: true,
        failures: Vec::new(),
    };
    for &l in &p.scales {
        let a = audit_admissibility(&cfg, &events, l)?;
        if !a.ok() {
            row.admissibility_ok = false;
            row.failures.push(format!("admissibility at L = {l}: {a:?}"));
        }
        if row.diameter >= l as u64 {
            let s = separating_check(&cfg, &events, l, caps)?;
            if !s.separated {
                row.separation_ok = false;
                row.failures.push(format!("no separation at L = {l}"));
            }
        }
    }
    let iface = match build_interface(&cfg, &events, &p.schedule, n, caps) {
        Ok(i) => i,
        Err(Error::Precondition(msg)) => {
            row.skipped = Some(msg);
            return Ok((row, None));
        }
        Err(e) => return Err(e),
    };
    row.stop_reason = Some(iface.stop_reason);
    row.steps = iface.steps().count();
    row.boxes = iface.boxes.len();
    row.premise_failures = iface.premise_failures.len();
    let audit = audit_interface(&iface, caps)?;
    if !audit.ok() {
        row.audit_ok = false;
        row.failures.push(format!("interface audit: {:?}", audit.failures));
    }
    for s in chain_separation(&cfg, &iface, caps)? {
        if !s.separated {
            row.chain_ok = false;
            row.failures.push(format!("chain step k = {} in segment {} does not separate", s.segment, s.k));
        }
    }
    // a fresh configuration on the other execution path must agree bit for bit
    let mut again = CoarseConfig::new(&phi, p.h, p.margin, p.enlargement)?;
    again.exec = match cfg.exec {
        Execution::Parallel => Execution::Sequential,
        Execution::Sequential => Execution::Parallel,
    };
    if build_interface(&again, &events, &p.schedule, n, caps)?.to_json()? != iface.to_json()? {
        row.deterministic = false;
        row.failures.push("rebuilding the interface gave a different result".into());
    }
    Ok((row, Some(iface)))
}

/// Collects `configs` samples whose origin cluster is finite and nonempty,
/// then runs the admissibility audits, the interface construction with its
/// audit, both separation certificates and a determinism rebuild on each.
pub fn coarse_contract(p: &ContractParams, caps: &CapacityCache, exec: Execution) -> Result<ContractReport> {
    p.schedule.validate()?;
    if p.schedule.d != p.d {
        return Err(Error::Config(format!("schedule.d = {} but d = {}", p.schedule.d, p.d)));
    }
    let sampler = Sampler::new(&Region::centered(p.d, p.side)?);
    let mut accepted = Vec::with_capacity(p.configs);
    let mut draws = 0;
    // draw in batches so the acceptance test runs in parallel too
    let batch = 64u64;
    while accepted.len() < p.configs && draws < p.max_draws {
        let hi = (draws + batch).min(p.max_draws);
        let keep = par::map(exec, (hi - draws) as usize, |k| -> Result<bool> {
            let phi = sampler.sample(p.seed, draws + k as u64);
            let cfg = CoarseConfig::new(&phi, p.h, p.margin, p.enlargement)?;
            Ok(cfg.is_finite() && !cfg.cluster().is_empty())
        });
        for (k, ok) in keep.into_iter().enumerate() {
            if ok? && accepted.len() < p.configs {
                accepted.push(draws + k as u64);
            }
        }
        draws = hi;
    }
    let draws = accepted.last().map_or(draws, |&i| i + 1);
    let results = par::map(exec, accepted.len(), |k| check_one(p, &sampler, accepted[k], caps));
    let mut rows = Vec::with_capacity(results.len());
    let mut interfaces = Vec::new();
    for r in results {
        let (row, iface) = r?;
        rows.push(row);
        interfaces.extend(iface);
    }
    if rows.len() < p.configs {
        log::warn!("only {} of {} configurations accepted in {} draws", rows.len(), p.configs, draws);
    }
    Ok(ContractReport { params: p.clone(), draws, rows, interfaces })
}
