//! Experiment drivers: contract design, misreport sweeps, the equal-split
//! baseline, the CP-count/popularity scaling study and property verification.

use std::collections::BTreeMap;

use scn_cache_core::allocation::BRUTE_FORCE_LIMIT;
use scn_cache_core::mechanism::{
    misreport_table, verify_ir_ex_post, BudgetReport, IcReport, IrSweep, MisreportRow,
};
use scn_cache_core::{
    design_contracts, equal_split_report, verify_budget_balance, verify_ic,
    verify_price_monotonicity, Design, DesignCache, Error as CoreError, ProfileSet, Scenario,
    Solver,
};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::generate::{build_scenario, LoadedScenario};
use crate::output::{flag, real, CsvRow};

/// Full opponent sweeps are used up to this many type profiles.
pub const FULL_PROFILE_LIMIT: usize = 729;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Exact when the enumeration fits under the size guard.
    #[default]
    Auto,
    Exact,
    Heuristic,
}

pub fn choose_solver(
    scenario: &Scenario,
    choice: SolverChoice,
    max_rounds: Option<usize>,
) -> Solver {
    let heuristic = Solver::Matching { max_rounds };
    match choice {
        SolverChoice::Exact => Solver::Exact,
        SolverChoice::Heuristic => heuristic,
        SolverChoice::Auto => {
            let size = (scenario.grid.len() as f64).powi(scenario.cp_count() as i32);
            if size <= BRUTE_FORCE_LIMIT {
                Solver::Exact
            } else {
                heuristic
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractRow {
    pub cp: usize,
    pub true_type: f64,
    pub declared_type: f64,
    pub storage_bits: f64,
    pub price: f64,
    pub rate: f64,
    pub cost: f64,
    pub utility: f64,
}

impl CsvRow for ContractRow {
    fn header() -> &'static [&'static str] {
        &[
            "cp",
            "true_type",
            "declared_type",
            "storage_bits",
            "price",
            "rate",
            "cost",
            "utility",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.cp.to_string(),
            real(self.true_type),
            real(self.declared_type),
            real(self.storage_bits),
            real(self.price),
            real(self.rate),
            real(self.cost),
            real(self.utility),
        ]
    }
}

/// Truthful contracts for the scenario.
pub fn run_design(loaded: &LoadedScenario, solver: Solver) -> Result<(Design, Vec<ContractRow>)> {
    let types = loaded.true_types();
    let design = design_contracts(&loaded.scenario, types, solver)?;
    let r = &design.report;
    let rows = design
        .bundles
        .iter()
        .map(|b| ContractRow {
            cp: b.cp,
            true_type: types[b.cp],
            declared_type: design.declared_types[b.cp],
            storage_bits: b.storage,
            price: b.price,
            rate: r.rates[b.cp],
            cost: r.costs[b.cp],
            utility: r.utilities[b.cp],
        })
        .collect();
    Ok((design, rows))
}

pub struct SweepRow(pub MisreportRow);

impl CsvRow for SweepRow {
    fn header() -> &'static [&'static str] {
        &[
            "cp",
            "true_type",
            "declared_type",
            "truthful",
            "participates",
            "price",
            "storage_bits",
            "rate",
            "utility",
            "backhaul_bits",
        ]
    }

    fn record(&self) -> Vec<String> {
        let r = &self.0;
        vec![
            r.cp.to_string(),
            real(r.true_type),
            real(r.declared_type),
            flag(r.truthful),
            flag(r.participates),
            real(r.price),
            real(r.storage),
            real(r.rate),
            real(r.utility),
            real(r.backhaul_bits),
        ]
    }
}

/// Price cap of each CP: explicit caps, or a multiple of its truthful price.
pub fn price_caps(config: &ScenarioConfig, truthful: &Design) -> Vec<f64> {
    match &config.price_caps {
        Some(caps) => caps.clone(),
        None => truthful
            .report
            .prices
            .iter()
            .map(|p| config.price_cap_factor * p)
            .collect(),
    }
}

/// Every CP declares every grid type while the others stay truthful. A CP
/// declines contracts priced above its cap.
pub fn run_misreport_sweep(loaded: &LoadedScenario, solver: Solver) -> Result<Vec<SweepRow>> {
    let truthful = design_contracts(&loaded.scenario, loaded.true_types(), solver)?;
    let caps = price_caps(&loaded.config, &truthful);
    let mut cache = DesignCache::new(&loaded.scenario, loaded.type_grid().clone(), solver);
    let mut rows = Vec::new();
    for (cp, &cap) in caps.iter().enumerate() {
        let table = misreport_table(
            &mut cache,
            &loaded.types,
            cp,
            ProfileSet::Observed,
            Some(cap),
        )?;
        rows.extend(table.rows.into_iter().map(SweepRow));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub cp: usize,
    pub true_type: f64,
    pub storage_mechanism: f64,
    pub storage_equal_split: f64,
    pub utility_mechanism: f64,
    pub utility_equal_split: f64,
}

impl CsvRow for BaselineRow {
    fn header() -> &'static [&'static str] {
        &[
            "cp",
            "type",
            "storage_mechanism",
            "storage_equal_split",
            "utility_mechanism",
            "utility_equal_split",
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.cp.to_string(),
            real(self.true_type),
            real(self.storage_mechanism),
            real(self.storage_equal_split),
            real(self.utility_mechanism),
            real(self.utility_equal_split),
        ]
    }
}

/// Mechanism utilities next to those of an equal split priced by the same rule.
pub fn run_baseline_comparison(
    loaded: &LoadedScenario,
    solver: Solver,
) -> Result<Vec<BaselineRow>> {
    let types = loaded.true_types();
    let design = design_contracts(&loaded.scenario, types, solver)?;
    let equal = equal_split_report(&loaded.scenario, types, solver)?;
    let share = loaded.scenario.capacity() / loaded.scenario.cp_count() as f64;
    Ok((0..loaded.scenario.cp_count())
        .map(|cp| BaselineRow {
            cp,
            true_type: types[cp],
            storage_mechanism: design.allocation.rho[cp],
            storage_equal_split: share,
            utility_mechanism: design.report.utilities[cp],
            utility_equal_split: equal.utilities[cp],
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub cp_count: usize,
    pub alpha: f64,
    pub seed: u64,
    pub mean_utility: f64,
    pub exact: bool,
}

impl CsvRow for ScalingRow {
    fn header() -> &'static [&'static str] {
        &["cp_count", "alpha", "seed", "mean_utility", "exact"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.cp_count.to_string(),
            real(self.alpha),
            self.seed.to_string(),
            real(self.mean_utility),
            flag(self.exact),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCell {
    pub cp_count: usize,
    pub alpha: f64,
    pub seeds: usize,
    pub mean_utility: f64,
}

impl CsvRow for ScalingCell {
    fn header() -> &'static [&'static str] {
        &["cp_count", "alpha", "seeds", "mean_utility"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.cp_count.to_string(),
            real(self.alpha),
            self.seeds.to_string(),
            real(self.mean_utility),
        ]
    }
}

/// Scenario of the scaling study: `cp_count` interchangeable CPs that all have
/// the template's highest type.
pub fn scaling_config(
    template: &ScenarioConfig,
    cp_count: usize,
    alpha: f64,
    seed: u64,
) -> ScenarioConfig {
    let users = template
        .user_counts
        .as_ref()
        .and_then(|u| u.first().copied());
    let top = *template.type_grid.last().unwrap_or(&0.0);
    ScenarioConfig {
        seed,
        cp_count,
        zipf_alpha: alpha,
        true_types: Some(vec![top; cp_count]),
        user_counts: users.map(|n| vec![n; cp_count]),
        price_caps: None,
        symmetric: true,
        channel: channel_without_explicit_users(template),
        ..template.clone()
    }
}

fn channel_without_explicit_users(template: &ScenarioConfig) -> crate::config::ChannelConfig {
    let mut ch = template.channel.clone();
    ch.serving_sbs = None;
    ch.sbs_user_gain = None;
    ch
}

/// Mean truthful CP utility per (CP count, Zipf exponent, seed), sorted by cell.
pub fn run_scaling_study(
    template: &ScenarioConfig,
    cp_counts: &[usize],
    alphas: &[f64],
    seeds: &[u64],
    choice: SolverChoice,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for &cp_count in cp_counts {
        for &alpha in alphas {
            for &seed in seeds {
                let loaded = build_scenario(&scaling_config(template, cp_count, alpha, seed))?;
                let solver = choose_solver(&loaded.scenario, choice, loaded.config.max_rounds);
                let design = design_contracts(&loaded.scenario, loaded.true_types(), solver)?;
                let u = &design.report.utilities;
                rows.push(ScalingRow {
                    cp_count,
                    alpha,
                    seed,
                    mean_utility: u.iter().sum::<f64>() / u.len() as f64,
                    exact: solver.is_exact(),
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.cp_count, a.seed)
            .cmp(&(b.cp_count, b.seed))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    Ok(rows)
}

/// Seed-averaged mean utility per (CP count, Zipf exponent).
pub fn scaling_summary(rows: &[ScalingRow]) -> Vec<ScalingCell> {
    let mut cells: BTreeMap<(usize, u64), (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = cells
            .entry((r.cp_count, r.alpha.to_bits()))
            .or_insert((r.alpha, 0.0, 0));
        e.1 += r.mean_utility;
        e.2 += 1;
    }
    let mut out: Vec<ScalingCell> = cells
        .into_iter()
        .map(|((cp_count, _), (alpha, total, n))| ScalingCell {
            cp_count,
            alpha,
            seeds: n,
            mean_utility: total / n as f64,
        })
        .collect();
    out.sort_by(|a, b| {
        a.cp_count
            .cmp(&b.cp_count)
            .then(a.alpha.total_cmp(&b.alpha))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Computed, but the property is only claimed for exact allocations.
    NotAsserted,
    /// The property does not apply to this scenario.
    Skipped,
}

impl Status {
    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotAsserted => "heuristic, IC not asserted",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub check: &'static str,
    /// CP index, or `None` for scenario-wide checks.
    pub cp: Option<usize>,
    pub value: f64,
    pub status: Status,
}

impl CsvRow for VerifyRow {
    fn header() -> &'static [&'static str] {
        &["check", "cp", "value", "status"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.check.into(),
            self.cp.map_or_else(|| "all".into(), |k| k.to_string()),
            real(self.value),
            self.status.label().into(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub exact: bool,
    pub profile_set: ProfileSet,
    pub ic: Vec<IcReport>,
    pub ir: IrSweep,
    pub budget: BudgetReport,
    /// `None` when the scenario is not symmetric.
    pub monotone_prices: Option<bool>,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }
}

/// Opponent profiles swept by `run_verify`: all of them when there are at most
/// [`FULL_PROFILE_LIMIT`] type profiles, otherwise the observed ones.
pub fn profile_set_for(loaded: &LoadedScenario) -> ProfileSet {
    let k = loaded.type_grid().len() as f64;
    if k.powi(loaded.scenario.cp_count() as i32) <= FULL_PROFILE_LIMIT as f64 {
        ProfileSet::Full
    } else {
        ProfileSet::Observed
    }
}

/// Runs the IC, ex-post IR, budget balance and (for symmetric scenarios) price
/// monotonicity checks.
pub fn run_verify(loaded: &LoadedScenario, solver: Solver) -> Result<VerifyReport> {
    let scenario = &loaded.scenario;
    let set = profile_set_for(loaded);
    let mut cache = DesignCache::new(scenario, loaded.type_grid().clone(), solver);
    let mut rows = Vec::new();
    let mut ic = Vec::new();
    for cp in 0..scenario.cp_count() {
        let report = verify_ic(&mut cache, &loaded.types, cp, set)?;
        let status = if report.exact {
            Status::of(report.holds)
        } else {
            Status::NotAsserted
        };
        rows.push(VerifyRow {
            check: "ic_max_misreport_gain",
            cp: Some(cp),
            value: report.max_gain,
            status,
        });
        ic.push(report);
    }
    let ir = verify_ir_ex_post(&mut cache, &loaded.types, set)?;
    rows.push(VerifyRow {
        check: "ir_worst_utility",
        cp: None,
        value: ir.worst_margin,
        status: Status::of(ir.violations == 0),
    });
    let truthful = design_contracts(scenario, loaded.true_types(), solver)?;
    let budget = verify_budget_balance(&truthful);
    rows.push(VerifyRow {
        check: "sum_of_prices",
        cp: None,
        value: budget.sum_of_prices,
        status: Status::of(budget.weakly_balanced),
    });
    rows.push(VerifyRow {
        check: "min_price",
        cp: None,
        value: budget.min_price,
        status: Status::of(budget.prices_nonnegative),
    });
    rows.push(VerifyRow {
        check: "mno_utility",
        cp: None,
        value: budget.mno_utility,
        status: Status::Skipped,
    });
    let monotone_prices = match verify_price_monotonicity(scenario, &truthful) {
        Ok(ok) => Some(ok),
        Err(CoreError::NotSymmetric(_)) => None,
        Err(e) => return Err(e.into()),
    };
    rows.push(VerifyRow {
        check: "price_monotonicity",
        cp: None,
        value: monotone_prices.map_or(f64::NAN, |ok| if ok { 1.0 } else { 0.0 }),
        status: monotone_prices.map_or(Status::Skipped, Status::of),
    });
    Ok(VerifyReport {
        exact: solver.is_exact(),
        profile_set: set,
        ic,
        ir,
        budget,
        monotone_prices,
        rows,
    })
}
