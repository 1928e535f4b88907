//! Contract design with externality (VCG) pricing and property verifiers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::allocation::{
    brute_force_allocation, default_max_rounds, swap_deferred_acceptance, AllocationOutcome, Method,
};
use crate::error::{Error, Result};
use crate::welfare::{CpSet, Scenario, WelfareModel};

/// Absolute tolerance for misreport gains.
pub const IC_TOLERANCE: f64 = 1e-6;

/// Absolute tolerance for utility, price and budget sign checks.
pub const SIGN_TOLERANCE: f64 = 1e-9;

/// Relative tolerance for price comparisons across CPs.
pub const PRICE_TOLERANCE: f64 = 1e-9;

/// Storage cost of a CP with type `theta`: ln(1 + theta).
pub fn storage_cost(theta: f64) -> Result<f64> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Invalid(format!(
            "CP type {theta} must be nonnegative"
        )));
    }
    Ok(libm::log(1.0 + theta))
}

/// Admissible type values, strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeGrid(Vec<f64>);

impl TypeGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("type grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Invalid(format!("type {v} must be nonnegative")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "type grid must be strictly ascending".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, theta: f64) -> Option<usize> {
        self.0.iter().position(|&t| t == theta)
    }

    fn indices(&self, types: &[f64]) -> Result<Vec<usize>> {
        types
            .iter()
            .map(|&t| {
                self.index_of(t)
                    .ok_or_else(|| Error::Invalid(format!("type {t} is not on the type grid")))
            })
            .collect()
    }
}

/// True and declared types of every CP.
#[derive(Debug, Clone, PartialEq)]
pub struct CpTypeVector {
    pub true_types: Vec<f64>,
    pub declared_types: Vec<f64>,
    pub grid: TypeGrid,
}

impl CpTypeVector {
    /// Truthful declarations.
    pub fn truthful(true_types: Vec<f64>, grid: TypeGrid) -> Result<Self> {
        Self::new(true_types.clone(), true_types, grid)
    }

    pub fn new(true_types: Vec<f64>, declared_types: Vec<f64>, grid: TypeGrid) -> Result<Self> {
        if true_types.len() != declared_types.len() {
            return Err(Error::DimensionMismatch {
                expected: true_types.len(),
                found: declared_types.len(),
            });
        }
        if let Some(t) = true_types.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::Invalid(format!("type {t} must be nonnegative")));
        }
        grid.indices(&declared_types)?;
        Ok(Self {
            true_types,
            declared_types,
            grid,
        })
    }

    pub fn len(&self) -> usize {
        self.true_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_types.is_empty()
    }
}

/// Price charged to a CP and the storage it receives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractBundle {
    pub cp: usize,
    pub price: f64,
    pub storage: f64,
}

/// Per-CP rates, costs, prices and utilities with the operator's totals.
#[derive(Debug, Clone, PartialEq)]
pub struct WelfareReport {
    pub rates: Vec<f64>,
    pub costs: Vec<f64>,
    pub prices: Vec<f64>,
    /// r_k - pi_k.
    pub utilities: Vec<f64>,
    /// pi_k - c_k.
    pub operator_terms: Vec<f64>,
    /// Sum of operator terms.
    pub mno_utility: f64,
    /// Sum of r_k - c_k.
    pub social_welfare: f64,
}

impl WelfareReport {
    pub fn new(rates: Vec<f64>, costs: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        let c = rates.len();
        for v in [&costs, &prices] {
            if v.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: v.len(),
                });
            }
        }
        let utilities: Vec<f64> = rates.iter().zip(&prices).map(|(r, p)| r - p).collect();
        let operator_terms: Vec<f64> = prices.iter().zip(&costs).map(|(p, c)| p - c).collect();
        let mno_utility = operator_terms.iter().sum();
        let social_welfare = rates.iter().zip(&costs).map(|(r, c)| r - c).sum();
        Ok(Self {
            rates,
            costs,
            prices,
            utilities,
            operator_terms,
            mno_utility,
            social_welfare,
        })
    }

    /// Recomputes every derived field and compares bit for bit.
    pub fn identities_hold(&self) -> bool {
        match Self::new(self.rates.clone(), self.costs.clone(), self.prices.clone()) {
            Ok(fresh) => fresh == *self,
            Err(_) => false,
        }
    }
}

/// Allocation solver used for both the with-k and without-k optimizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Exact,
    /// Swap-based deferred acceptance; `None` uses the default round budget.
    Matching {
        max_rounds: Option<usize>,
    },
}

impl Solver {
    pub fn solve(
        &self,
        model: &WelfareModel<'_>,
        participants: CpSet,
    ) -> Result<AllocationOutcome> {
        match *self {
            Solver::Exact => brute_force_allocation(model, participants),
            Solver::Matching { max_rounds } => {
                let rounds = max_rounds
                    .unwrap_or_else(|| default_max_rounds(model.grid().len(), model.cp_count()));
                swap_deferred_acceptance(model, participants, rounds)
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Solver::Exact)
    }
}

/// Externality price of `cp`: the others' best welfare without it minus the
/// others' welfare at the allocation chosen with it.
pub fn vcg_price(
    model: &WelfareModel<'_>,
    cp: usize,
    optimal_allocation_with: &[usize],
    optimal_welfare_without: f64,
) -> Result<f64> {
    let c = model.cp_count();
    if optimal_allocation_with.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: optimal_allocation_with.len(),
        });
    }
    if cp >= c {
        return Err(Error::OutOfRange {
            what: "CP",
            index: cp,
            len: c,
        });
    }
    let eval = model.evaluate_levels(optimal_allocation_with, CpSet::all(c));
    Ok(optimal_welfare_without - eval.welfare_of_others(cp))
}

/// Contracts for one declared profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub declared_types: Vec<f64>,
    pub bundles: Vec<ContractBundle>,
    /// Rates and costs under the declared types.
    pub report: WelfareReport,
    pub allocation: AllocationOutcome,
    /// Welfare-maximizing allocation of everyone but CP k, per k.
    pub without: Vec<AllocationOutcome>,
}

impl Design {
    pub fn is_exact(&self) -> bool {
        self.allocation.method == Method::BruteForce
    }
}

/// Solves for the welfare-maximizing allocation under `declared_types` and
/// prices every CP by its externality.
pub fn design_contracts(
    scenario: &Scenario,
    declared_types: &[f64],
    solver: Solver,
) -> Result<Design> {
    let model = WelfareModel::new(scenario, declared_types)?;
    let all = scenario.all_cps();
    let allocation = solver.solve(&model, all)?;
    let eval = model.evaluate_levels(&allocation.levels, all);
    let mut without = Vec::with_capacity(scenario.cp_count());
    let mut prices = Vec::with_capacity(scenario.cp_count());
    for k in 0..scenario.cp_count() {
        let alt = solver.solve(&model, all.without(k))?;
        prices.push(alt.welfare - eval.welfare_of_others(k));
        without.push(alt);
    }
    let bundles = prices
        .iter()
        .zip(&allocation.rho)
        .enumerate()
        .map(|(cp, (&price, &storage))| ContractBundle { cp, price, storage })
        .collect();
    let report = WelfareReport::new(eval.rates, model.costs().to_vec(), prices)?;
    Ok(Design {
        declared_types: declared_types.to_vec(),
        bundles,
        report,
        allocation,
        without,
    })
}

/// Equal-split baseline: every CP gets capacity / C bits and pays its
/// externality at that fixed allocation.
pub fn equal_split_report(
    scenario: &Scenario,
    declared_types: &[f64],
    solver: Solver,
) -> Result<WelfareReport> {
    let model = WelfareModel::new(scenario, declared_types)?;
    let all = scenario.all_cps();
    let c = scenario.cp_count();
    let rho = vec![scenario.capacity() / c as f64; c];
    let eval = model.evaluate_bits(&rho, all)?;
    let mut prices = Vec::with_capacity(c);
    for k in 0..c {
        let alt = solver.solve(&model, all.without(k))?;
        prices.push(alt.welfare - eval.welfare_of_others(k));
    }
    WelfareReport::new(eval.rates, model.costs().to_vec(), prices)
}

/// Which opponent profiles a verifier sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSet {
    /// Every combination of grid types for the other CPs.
    Full,
    /// Only the other CPs' true types.
    Observed,
}

/// Designs keyed by declared profile (type grid indices), shared across sweeps.
#[derive(Debug)]
pub struct DesignCache<'a> {
    scenario: &'a Scenario,
    grid: TypeGrid,
    solver: Solver,
    designs: BTreeMap<Vec<usize>, Design>,
}

impl<'a> DesignCache<'a> {
    pub fn new(scenario: &'a Scenario, grid: TypeGrid, solver: Solver) -> Self {
        Self {
            scenario,
            grid,
            solver,
            designs: BTreeMap::new(),
        }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn design(&mut self, profile: &[usize]) -> Result<&Design> {
        if !self.designs.contains_key(profile) {
            let declared: Vec<f64> = profile.iter().map(|&i| self.grid.values()[i]).collect();
            let design = design_contracts(self.scenario, &declared, self.solver)?;
            self.designs.insert(profile.to_vec(), design);
        }
        Ok(&self.designs[profile])
    }

    /// Opponent profiles for `cp` as grid index vectors; entry `cp` is a placeholder 0.
    fn opponent_profiles(
        &self,
        types: &CpTypeVector,
        cp: usize,
        set: ProfileSet,
    ) -> Result<Vec<Vec<usize>>> {
        let c = types.len();
        match set {
            ProfileSet::Observed => {
                let mut profile = vec![0; c];
                for j in (0..c).filter(|&j| j != cp) {
                    profile[j] = self.index(types.true_types[j])?;
                }
                Ok(vec![profile])
            }
            ProfileSet::Full => {
                let k = self.grid.len();
                let count = k.pow((c - 1) as u32);
                Ok((0..count)
                    .map(|mut code| {
                        let mut profile = vec![0; c];
                        for j in (0..c).rev().filter(|&j| j != cp) {
                            profile[j] = code % k;
                            code /= k;
                        }
                        profile
                    })
                    .collect())
            }
        }
    }

    fn index(&self, theta: f64) -> Result<usize> {
        self.grid
            .index_of(theta)
            .ok_or_else(|| Error::Invalid(format!("type {theta} is not on the type grid")))
    }
}

/// Rate of `cp` with true type `theta` under a declared-profile design.
fn true_rate(
    scenario: &Scenario,
    declared: &[f64],
    cp: usize,
    theta: f64,
    levels: &[usize],
) -> Result<(f64, f64)> {
    let mut profile = declared.to_vec();
    profile[cp] = theta;
    let model = WelfareModel::new(scenario, &profile)?;
    let eval = model.evaluate_levels(levels, scenario.all_cps());
    Ok((
        eval.rates[cp],
        model.backhaul_bits(cp, model.prefix_at_level(cp, levels[cp])),
    ))
}

/// Ex-post utilities of truthful CPs under one design.
#[derive(Debug, Clone, PartialEq)]
pub struct IrCheck {
    /// u_k = r_k - pi_k with the true type.
    pub margins: Vec<f64>,
    pub holds: bool,
}

/// Checks r_k(rho_k) - pi_k >= -tolerance for every CP, with rates under the true types.
pub fn verify_ir(scenario: &Scenario, design: &Design, true_types: &[f64]) -> Result<IrCheck> {
    let c = scenario.cp_count();
    if true_types.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: true_types.len(),
        });
    }
    let model = WelfareModel::new(scenario, true_types)?;
    let eval = model.evaluate_levels(&design.allocation.levels, scenario.all_cps());
    let margins: Vec<f64> = eval
        .rates
        .iter()
        .zip(&design.report.prices)
        .map(|(r, p)| r - p)
        .collect();
    let holds = margins.iter().all(|&m| m >= -SIGN_TOLERANCE);
    Ok(IrCheck { margins, holds })
}

/// Ex-post IR over every truthful profile in the set: the worst margin of any CP.
#[derive(Debug, Clone, PartialEq)]
pub struct IrSweep {
    pub profiles: usize,
    pub worst_margin: f64,
    pub violations: usize,
}

pub fn verify_ir_ex_post(
    cache: &mut DesignCache<'_>,
    types: &CpTypeVector,
    set: ProfileSet,
) -> Result<IrSweep> {
    let mut sweep = IrSweep {
        profiles: 0,
        worst_margin: f64::INFINITY,
        violations: 0,
    };
    let truthful = cache.grid.indices(&types.true_types)?;
    let profiles: Vec<Vec<usize>> = match set {
        ProfileSet::Observed => vec![truthful],
        ProfileSet::Full => {
            let mut all = Vec::new();
            for cp in 0..types.len() {
                for mut p in cache.opponent_profiles(types, cp, ProfileSet::Full)? {
                    p[cp] = truthful[cp];
                    all.push(p);
                }
            }
            all.sort();
            all.dedup();
            all
        }
    };
    for profile in profiles {
        let design = cache.design(&profile)?;
        let margins: Vec<f64> = design
            .report
            .rates
            .iter()
            .zip(&design.report.prices)
            .map(|(r, p)| r - p)
            .collect();
        sweep.profiles += 1;
        for m in margins {
            sweep.worst_margin = sweep.worst_margin.min(m);
            if m < -SIGN_TOLERANCE {
                sweep.violations += 1;
            }
        }
    }
    Ok(sweep)
}

/// Outcome for one CP and one declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct MisreportRow {
    pub cp: usize,
    /// Declared profile, with this CP's entry equal to `declared_type`.
    pub profile: Vec<f64>,
    pub true_type: f64,
    pub declared_type: f64,
    pub truthful: bool,
    /// Whether the CP took the contract; false when it exceeded the price cap.
    pub participates: bool,
    pub price: f64,
    pub storage: f64,
    /// True-type rate in currency units.
    pub rate: f64,
    pub utility: f64,
    /// Bits of the CP's true requests that cross the backhaul.
    pub backhaul_bits: f64,
}

/// Misreport table for one CP and whether truth telling was never beaten.
#[derive(Debug, Clone, PartialEq)]
pub struct IcReport {
    pub cp: usize,
    pub rows: Vec<MisreportRow>,
    /// Largest utility gain of any misreport over the truthful row for the same opponents.
    pub max_gain: f64,
    pub holds: bool,
    pub exact: bool,
}

/// Sweeps every declaration of `cp` against every opponent profile in `set`.
pub fn verify_ic(
    cache: &mut DesignCache<'_>,
    types: &CpTypeVector,
    cp: usize,
    set: ProfileSet,
) -> Result<IcReport> {
    misreport_table(cache, types, cp, set, None)
}

/// Like [`verify_ic`], but a CP whose contract price exceeds `price_cap` declines
/// it: it caches nothing, pays nothing, and the others get their best
/// allocation without it.
pub fn misreport_table(
    cache: &mut DesignCache<'_>,
    types: &CpTypeVector,
    cp: usize,
    set: ProfileSet,
    price_cap: Option<f64>,
) -> Result<IcReport> {
    let c = types.len();
    if cp >= c {
        return Err(Error::OutOfRange {
            what: "CP",
            index: cp,
            len: c,
        });
    }
    let scenario = cache.scenario;
    let theta = types.true_types[cp];
    let truth = cache.index(theta)?;
    let mut rows = Vec::new();
    let mut max_gain = f64::NEG_INFINITY;
    let mut exact = true;
    for base in cache.opponent_profiles(types, cp, set)? {
        let first = rows.len();
        for declared in 0..cache.grid.len() {
            let mut profile = base.clone();
            profile[cp] = declared;
            let design = cache.design(&profile)?.clone();
            exact &= design.is_exact();
            let price = design.report.prices[cp];
            let affordable =
                price_cap.is_none_or(|cap| price <= cap + PRICE_TOLERANCE * cap.abs().max(1.0));
            let (levels, price) = if affordable {
                (design.allocation.levels.clone(), price)
            } else {
                (design.without[cp].levels.clone(), 0.0)
            };
            let (rate, backhaul_bits) =
                true_rate(scenario, &design.declared_types, cp, theta, &levels)?;
            rows.push(MisreportRow {
                cp,
                profile: design.declared_types.clone(),
                true_type: theta,
                declared_type: design.declared_types[cp],
                truthful: declared == truth,
                participates: affordable,
                price,
                storage: scenario.grid.levels()[levels[cp]],
                rate,
                utility: rate - price,
                backhaul_bits,
            });
        }
        let truthful_utility = rows[first + truth].utility;
        for row in &rows[first..] {
            max_gain = max_gain.max(row.utility - truthful_utility);
        }
    }
    Ok(IcReport {
        cp,
        rows,
        max_gain,
        holds: max_gain <= IC_TOLERANCE,
        exact,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub sum_of_prices: f64,
    pub mno_utility: f64,
    pub min_price: f64,
    pub weakly_balanced: bool,
    pub prices_nonnegative: bool,
}

pub fn verify_budget_balance(design: &Design) -> BudgetReport {
    let prices = &design.report.prices;
    let sum_of_prices: f64 = prices.iter().sum();
    let min_price = prices.iter().copied().fold(f64::INFINITY, f64::min);
    BudgetReport {
        sum_of_prices,
        mno_utility: design.report.mno_utility,
        min_price,
        weakly_balanced: sum_of_prices >= -SIGN_TOLERANCE,
        prices_nonnegative: min_price >= -SIGN_TOLERANCE,
    }
}

/// Checks that prices are nondecreasing in declared type across symmetric CPs.
pub fn verify_price_monotonicity(scenario: &Scenario, design: &Design) -> Result<bool> {
    scenario.check_symmetric()?;
    let types = &design.declared_types;
    let prices = &design.report.prices;
    for a in 0..types.len() {
        for b in 0..types.len() {
            if types[a] >= types[b] {
                let tol = PRICE_TOLERANCE * prices[a].abs().max(prices[b].abs()).max(1.0);
                if prices[a] < prices[b] - tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Matrix;
    use crate::welfare::fixtures::grid_scenario;

    fn symmetric(cp_count: usize, per_sbs: usize, levels: usize) -> Scenario {
        let mut sc = grid_scenario(cp_count, 2, per_sbs, 6, 0.8, levels, 0.02);
        let n = sc.topology.users.len();
        let mut gain = Matrix::filled(2, n, 0.02);
        for u in &sc.topology.users {
            gain.set(u.serving_sbs, u.user_id, 1.0);
        }
        sc.topology.channel_gain_sbs = gain;
        sc
    }

    #[test]
    fn storage_cost_examples() {
        assert_eq!(storage_cost(0.0).unwrap(), 0.0);
        assert_eq!(storage_cost(core::f64::consts::E - 1.0).unwrap(), 1.0);
        assert_eq!(storage_cost(1.0).unwrap(), core::f64::consts::LN_2);
        assert!(storage_cost(-0.5).is_err());
    }

    #[test]
    fn type_grid_validation() {
        assert!(TypeGrid::new(vec![0.0, 1.0, 2.0]).is_ok());
        assert!(TypeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TypeGrid::new(vec![2.0, 1.0]).is_err());
        let g = TypeGrid::new(vec![0.0, 5.0]).unwrap();
        assert!(CpTypeVector::new(vec![5.0], vec![3.0], g.clone()).is_err());
        assert!(CpTypeVector::truthful(vec![5.0, 0.0], g).is_ok());
    }

    #[test]
    fn report_identities() {
        let r = WelfareReport::new(vec![3.0, 1.5], vec![0.5, 0.25], vec![1.0, 0.0]).unwrap();
        assert_eq!(r.utilities, vec![2.0, 1.5]);
        assert_eq!(r.mno_utility, 0.5 - 0.25);
        assert_eq!(r.social_welfare, 2.5 + 1.25);
        assert!(r.identities_hold());
        let mut broken = r.clone();
        broken.utilities[0] += 1e-12;
        assert!(!broken.identities_hold());
    }

    #[test]
    fn single_cp_pays_nothing() {
        let sc = grid_scenario(1, 2, 2, 5, 0.8, 4, 0.02);
        let d = design_contracts(&sc, &[6.0], Solver::Exact).unwrap();
        assert_eq!(d.report.prices, vec![0.0]);
        let model = WelfareModel::new(&sc, &[6.0]).unwrap();
        let standalone =
            crate::allocation::standalone_request(&model, 0, &[0], sc.all_cps()).unwrap();
        assert_eq!(d.allocation.levels, vec![standalone]);
        assert_eq!(
            vcg_price(&model, 0, &d.allocation.levels, 0.0).unwrap(),
            0.0
        );
        let ir = verify_ir(&sc, &d, &[6.0]).unwrap();
        assert!(ir.holds);
        assert_eq!(ir.margins[0], d.report.rates[0]);
    }

    #[test]
    fn all_zero_types() {
        let sc = grid_scenario(3, 2, 2, 5, 0.8, 4, 0.02);
        let d = design_contracts(&sc, &[0.0; 3], Solver::Exact).unwrap();
        assert_eq!(d.allocation.levels, vec![0; 3]);
        assert_eq!(d.report.prices, vec![0.0; 3]);
        assert_eq!(d.report.social_welfare, 0.0);
        assert_eq!(verify_budget_balance(&d).sum_of_prices, 0.0);
    }

    #[test]
    fn zero_type_cp_pays_nothing_and_keeps_zero_utility() {
        let sc = grid_scenario(2, 2, 2, 5, 0.8, 4, 0.02);
        let d = design_contracts(&sc, &[0.0, 7.0], Solver::Exact).unwrap();
        assert_eq!(d.allocation.levels[0], 0);
        assert_eq!(d.report.prices[0], 0.0);
        let ir = verify_ir(&sc, &d, &[0.0, 7.0]).unwrap();
        assert_eq!(ir.margins[0], 0.0);
    }

    #[test]
    fn vcg_price_matches_two_enumerations() {
        let sc = grid_scenario(2, 2, 2, 6, 0.9, 5, 0.02);
        let types = [3.0, 8.0];
        let model = WelfareModel::new(&sc, &types).unwrap();
        let with = brute_force_allocation(&model, sc.all_cps()).unwrap();
        let without = brute_force_allocation(&model, sc.all_cps().without(0)).unwrap();
        let price = vcg_price(&model, 0, &with.levels, without.welfare).unwrap();
        let d = design_contracts(&sc, &types, Solver::Exact).unwrap();
        assert_eq!(d.report.prices[0], price);
        assert!(price >= 0.0);
        assert!(vcg_price(&model, 0, &[0], 0.0).is_err());
    }

    #[test]
    fn three_cp_full_ic_sweep() {
        let sc = grid_scenario(3, 2, 2, 6, 0.8, 4, 0.02);
        let grid = TypeGrid::new(vec![0.0, 4.0, 8.0]).unwrap();
        let types = CpTypeVector::truthful(vec![8.0, 0.0, 4.0], grid.clone()).unwrap();
        let mut cache = DesignCache::new(&sc, grid, Solver::Exact);
        for cp in 0..3 {
            let report = verify_ic(&mut cache, &types, cp, ProfileSet::Full).unwrap();
            assert_eq!(report.rows.len(), 27);
            assert!(report.holds, "cp {cp}: gain {}", report.max_gain);
            assert!(report.exact);
        }
        assert_eq!(cache.len(), 27);
        let ir = verify_ir_ex_post(&mut cache, &types, ProfileSet::Full).unwrap();
        assert_eq!(ir.violations, 0);
    }

    #[test]
    fn zero_type_misreporting_upward_gains_nothing() {
        let sc = grid_scenario(2, 2, 2, 6, 0.8, 4, 0.02);
        let grid = TypeGrid::new(vec![0.0, 5.0, 10.0]).unwrap();
        let types = CpTypeVector::truthful(vec![0.0, 10.0], grid.clone()).unwrap();
        let mut cache = DesignCache::new(&sc, grid, Solver::Exact);
        let report = verify_ic(&mut cache, &types, 0, ProfileSet::Observed).unwrap();
        assert!(report.holds);
        for row in &report.rows {
            assert_eq!(row.backhaul_bits, 0.0);
            assert!(row.utility <= 0.0);
        }
    }

    #[test]
    fn price_cap_turns_contract_down() {
        let sc = grid_scenario(2, 2, 2, 6, 0.8, 4, 0.02);
        let grid = TypeGrid::new(vec![0.0, 5.0, 10.0]).unwrap();
        let types = CpTypeVector::truthful(vec![5.0, 10.0], grid.clone()).unwrap();
        let mut cache = DesignCache::new(&sc, grid, Solver::Exact);
        let table =
            misreport_table(&mut cache, &types, 0, ProfileSet::Observed, Some(-1.0)).unwrap();
        for row in &table.rows {
            assert!(!row.participates);
            assert_eq!(row.price, 0.0);
            assert_eq!(row.storage, 0.0);
        }
    }

    #[test]
    fn monotonicity_requires_symmetry() {
        let sc = grid_scenario(2, 2, 2, 6, 0.8, 4, 0.02);
        let d = design_contracts(&sc, &[1.0, 2.0], Solver::Exact).unwrap();
        assert!(matches!(
            verify_price_monotonicity(&sc, &d),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn symmetric_equal_types_equal_prices() {
        let sc = symmetric(2, 2, 5);
        let d = design_contracts(&sc, &[5.0, 5.0], Solver::Exact).unwrap();
        let (a, b) = (d.report.prices[0], d.report.prices[1]);
        assert!(
            (a - b).abs() <= PRICE_TOLERANCE * a.abs().max(1.0),
            "{a} vs {b}"
        );
        assert!(verify_price_monotonicity(&sc, &d).unwrap());
    }

    #[test]
    fn symmetric_zero_type_prices_below_positive_type() {
        let sc = symmetric(2, 2, 5);
        let d = design_contracts(&sc, &[0.0, 6.0], Solver::Exact).unwrap();
        assert_eq!(d.report.prices[0], 0.0);
        assert!(d.report.prices[1] >= 0.0);
        assert!(verify_price_monotonicity(&sc, &d).unwrap());
    }

    #[test]
    fn symmetric_three_types_ascending_prices() {
        let sc = symmetric(3, 3, 6);
        let d = design_contracts(&sc, &[1.0, 2.0, 3.0], Solver::Exact).unwrap();
        assert!(
            verify_price_monotonicity(&sc, &d).unwrap(),
            "{:?}",
            d.report.prices
        );
    }

    #[test]
    fn monotonicity_verifier_flags_inversions() {
        // Hand-built report with a lower-type CP paying more.
        let sc = symmetric(2, 2, 4);
        let mut d = design_contracts(&sc, &[2.0, 4.0], Solver::Exact).unwrap();
        d.report.prices = vec![1.0, 0.5];
        assert!(!verify_price_monotonicity(&sc, &d).unwrap());
    }

    #[test]
    fn budget_balance_on_three_cps() {
        let sc = grid_scenario(3, 2, 2, 6, 0.8, 5, 0.02);
        let d = design_contracts(&sc, &[2.0, 5.0, 9.0], Solver::Exact).unwrap();
        let b = verify_budget_balance(&d);
        assert!(b.weakly_balanced && b.prices_nonnegative, "{b:?}");
        assert!(d.report.identities_hold());
    }

    #[test]
    fn equal_split_never_beats_exact_design() {
        let sc = grid_scenario(3, 2, 2, 6, 0.8, 7, 0.02);
        let types = [2.0, 5.0, 9.0];
        let d = design_contracts(&sc, &types, Solver::Exact).unwrap();
        let eq = equal_split_report(&sc, &types, Solver::Exact).unwrap();
        assert!(eq.identities_hold());
        for k in 0..3 {
            assert!(d.report.utilities[k] >= eq.utilities[k] - 1e-9, "cp {k}");
        }
    }

    #[test]
    fn matching_design_runs() {
        let sc = grid_scenario(3, 2, 2, 6, 0.8, 5, 0.02);
        let d =
            design_contracts(&sc, &[2.0, 5.0, 9.0], Solver::Matching { max_rounds: None }).unwrap();
        assert!(!d.is_exact());
        assert_eq!(d.bundles.len(), 3);
    }
}
