//! Effort inversion and minimum-effort portfolio selection.
//!
//! For every activity a location neither holds nor is predicted to enter, the
//! entry model is solved for the added RCA at the steppingstone year that
//! would push the model's horizon forecast to `RCA = 1`. Selecting a subset
//! of those candidates that lifts the average future PCI over a target while
//! minimizing total added RCA is a 0-1 covering program; the solver here is
//! an exact branch-and-bound with a fractional-cover bound, checked against
//! an exhaustive oracle.
//!
//! Feasibility uses the linearized form of the average constraint,
//! `sum_selected (pci - target) >= sum_baseline (target - pci)`, evaluated in
//! a fixed summation order so the solver and the oracle agree bit for bit.

use std::collections::BTreeMap;

use crate::complexity::SpecializationSnapshot;
use crate::complexity::RelatednessField;
use crate::error::{Error, Result};
use crate::forecast::{FuturePrediction, Regime, SteppingstoneModel};
use crate::panel::OutputPanel;
use crate::scalar::{lit, to_f64, Scalar};

/// A candidate entry activity: its required steppingstone effort and price.
#[derive(Clone, Debug, PartialEq)]
pub struct EffortCandidate<T> {
    pub activity: String,
    /// Added RCA required at the steppingstone year (may be infinite when
    /// the model cannot reach the threshold at any effort).
    pub w: T,
    pub pci_future: T,
}

/// Per-location effort matrix: candidates plus the predicted baseline.
#[derive(Clone, Debug)]
pub struct EffortMatrix<T> {
    pub location: String,
    /// New-specialization candidates (`M(t) = 0` and `M_pred = 0`), sorted by
    /// activity id.
    pub candidates: Vec<EffortCandidate<T>>,
    /// Activities with `M_pred = 1` and their future PCI, sorted by id.
    pub baseline: Vec<(String, T)>,
    /// Average future PCI of the baseline.
    pub eci_baseline: T,
    /// Would-be candidates without a future PCI (they drop out of the
    /// predicted world entirely), excluded from the pool.
    pub unpriced: Vec<String>,
}

/// Relative tolerance for the `w <= 0 implies predicted entrant` consistency
/// check in [`compute_effort`].
const EFFORT_CONSISTENCY_TOL: f64 = 1e-9;

/// Solves the entry model for the added RCA that sets the horizon forecast
/// exactly at `RCA = 1`; negative results mean the model already predicts
/// entry without any boost.
pub fn solve_added_rca<T: Scalar>(b: &[T; 5], rca_t: T, omega: T, omega_rel: T) -> T {
    let ln2: T = lit(std::f64::consts::LN_2);
    let r_t = (rca_t + T::one()).ln();
    let needed = (ln2 - b[0] - b[2] * r_t - b[3] * omega - b[4] * omega_rel) / b[1];
    needed.exp() - rca_t - T::one()
}

/// Builds the effort matrix for one focal location.
///
/// The entry model must have a positive steppingstone coefficient and share
/// its timing with the prediction; the focal location must be scored in the
/// prediction (otherwise its baseline cannot be priced).
pub fn compute_effort<T: Scalar>(
    focal: &str,
    entry_model: &SteppingstoneModel<T>,
    snapshot: &SpecializationSnapshot<T>,
    relatedness: &RelatednessField<T>,
    prediction: &FuturePrediction<T>,
) -> Result<EffortMatrix<T>> {
    if entry_model.regime != Regime::Entry {
        return Err(Error::MixedModels(
            "effort inversion needs the entry model".to_string(),
        ));
    }
    if entry_model.b1() <= T::zero() {
        return Err(Error::NonpositiveSlope(to_f64(entry_model.b1())));
    }
    if prediction.delta_t != entry_model.delta_t || prediction.tau != entry_model.tau {
        return Err(Error::MixedModels(
            "prediction and entry model disagree on delta_t or tau".to_string(),
        ));
    }
    let c = snapshot
        .location_pos(focal)
        .ok_or_else(|| Error::UnknownLocation(focal.to_string()))?;
    let eci_baseline = *prediction
        .eci_pred
        .get(focal)
        .ok_or_else(|| Error::EmptyBaseline(focal.to_string()))?;

    let mut baseline = Vec::new();
    let mut candidates = Vec::new();
    let mut unpriced = Vec::new();
    for (p, activity) in snapshot.activities.iter().enumerate() {
        if prediction.m_pred[(c, p)] {
            let pci = *prediction
                .pci_future
                .get(activity)
                .ok_or_else(|| Error::Degenerate(format!(
                    "baseline activity {activity:?} has no future PCI"
                )))?;
            baseline.push((activity.clone(), pci));
            continue;
        }
        if snapshot.m[(c, p)] {
            // Predicted exit: the model only prices entries, so exits are
            // accepted as given and excluded from the pool.
            continue;
        }
        let Some(&pci) = prediction.pci_future.get(activity) else {
            unpriced.push(activity.clone());
            continue;
        };
        let rca_t = snapshot.rca[(c, p)];
        let raw = solve_added_rca(
            &entry_model.coefficients,
            rca_t,
            relatedness.omega[(c, p)],
            relatedness.omega_rel[(c, p)],
        );
        let tol = lit::<T>(EFFORT_CONSISTENCY_TOL) * (rca_t + T::one());
        if raw < -tol {
            return Err(Error::EffortInconsistency {
                activity: activity.clone(),
                w: to_f64(raw),
            });
        }
        candidates.push(EffortCandidate {
            activity: activity.clone(),
            w: raw.max(T::zero()),
            pci_future: pci,
        });
    }
    if baseline.is_empty() {
        return Err(Error::EmptyBaseline(focal.to_string()));
    }

    Ok(EffortMatrix {
        location: focal.to_string(),
        candidates,
        baseline,
        eci_baseline,
        unpriced,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortfolioMethod {
    Optimal,
    Benchmark,
    BruteForce,
}

impl PortfolioMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PortfolioMethod::Optimal => "optimal",
            PortfolioMethod::Benchmark => "benchmark",
            PortfolioMethod::BruteForce => "brute_force",
        }
    }
}

/// A selected set of new activities for one location and target.
#[derive(Clone, Debug)]
pub struct Portfolio<T> {
    pub location: String,
    pub target_eci: T,
    /// Selected candidates, sorted by activity id.
    pub selected: Vec<EffortCandidate<T>>,
    /// Average future PCI over baseline plus selection.
    pub achieved_eci: T,
    pub total_effort: T,
    pub feasible: bool,
    pub method: PortfolioMethod,
}

/// Deficit the selection must cover: `sum_baseline (target - pci)`, summed in
/// baseline order (ascending activity id).
fn cover_deficit<T: Scalar>(baseline: &[(String, T)], target: T) -> T {
    let mut d = T::zero();
    for (_, pci) in baseline {
        d += target - *pci;
    }
    d
}

/// Average future PCI over baseline and selection, both sorted by id, summed
/// in merged ascending-id order (the same order `eci_of_row` would use).
fn union_average<T: Scalar>(baseline: &[(String, T)], selected: &[EffortCandidate<T>]) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    let mut bi = 0;
    let mut si = 0;
    while bi < baseline.len() || si < selected.len() {
        let take_baseline = match (baseline.get(bi), selected.get(si)) {
            (Some(b), Some(s)) => b.0 <= s.activity,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!(),
        };
        if take_baseline {
            sum += baseline[bi].1;
            bi += 1;
        } else {
            sum += selected[si].pci_future;
            si += 1;
        }
        count += 1;
    }
    sum / lit(count as f64)
}

/// Search pool item: a candidate with its precomputed gain.
#[derive(Clone, Debug)]
struct PoolItem<T> {
    candidate_idx: usize,
    w: T,
    gain: T,
}

/// Positive-gain, finite-effort candidates in branching order: zero-effort
/// items first (by gain descending), then by gain/effort ratio descending,
/// ties by activity id. Both solvers share this order, so subset costs and
/// gains fold identically.
fn covering_pool<T: Scalar>(
    candidates: &[EffortCandidate<T>],
    target: T,
) -> Vec<PoolItem<T>> {
    let mut pool: Vec<PoolItem<T>> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.w.is_finite() && c.pci_future - target > T::zero())
        .map(|(i, c)| PoolItem {
            candidate_idx: i,
            w: c.w,
            gain: c.pci_future - target,
        })
        .collect();
    pool.sort_by(|a, b| {
        let a_zero = a.w == T::zero();
        let b_zero = b.w == T::zero();
        match (a_zero, b_zero) {
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            (true, true) => b
                .gain
                .partial_cmp(&a.gain)
                .expect("finite gains")
                .then_with(|| {
                    candidates[a.candidate_idx]
                        .activity
                        .cmp(&candidates[b.candidate_idx].activity)
                }),
            (false, false) => {
                let ra = a.gain / a.w;
                let rb = b.gain / b.w;
                rb.partial_cmp(&ra).expect("finite ratios").then_with(|| {
                    candidates[a.candidate_idx]
                        .activity
                        .cmp(&candidates[b.candidate_idx].activity)
                })
            }
        }
    });
    pool
}

fn fold_gain<T: Scalar>(pool: &[PoolItem<T>]) -> T {
    let mut g = T::zero();
    for item in pool {
        g += item.gain;
    }
    g
}

struct Incumbent<T> {
    cost: T,
    count: usize,
    ids: Vec<String>,
    positions: Vec<usize>,
}

struct CoverSearch<'a, T> {
    pool: &'a [PoolItem<T>],
    candidates: &'a [EffortCandidate<T>],
    deficit: T,
    best: Option<Incumbent<T>>,
    cost_slack: T,
    gain_slack: T,
    /// gains of pool[i..] folded back-to-front, for infeasibility pruning.
    suffix_gain: Vec<T>,
}

impl<'a, T: Scalar> CoverSearch<'a, T> {
    fn new(pool: &'a [PoolItem<T>], candidates: &'a [EffortCandidate<T>], deficit: T) -> Self {
        let mut suffix_gain = vec![T::zero(); pool.len() + 1];
        for i in (0..pool.len()).rev() {
            suffix_gain[i] = suffix_gain[i + 1] + pool[i].gain;
        }
        Self {
            pool,
            candidates,
            deficit,
            best: None,
            cost_slack: T::zero(),
            gain_slack: lit::<T>(1e-9) * (T::one() + deficit.abs()),
            suffix_gain,
        }
    }

    fn ids_of(&self, positions: &[usize]) -> Vec<String> {
        let mut ids: Vec<String> = positions
            .iter()
            .map(|&p| self.candidates[self.pool[p].candidate_idx].activity.clone())
            .collect();
        ids.sort();
        ids
    }

    fn offer(&mut self, cost: T, chosen: &[usize]) {
        let count = chosen.len();
        let better = match &self.best {
            None => true,
            Some(best) => {
                if cost != best.cost {
                    cost < best.cost
                } else if count != best.count {
                    count < best.count
                } else {
                    self.ids_of(chosen) < best.ids
                }
            }
        };
        if better {
            self.best = Some(Incumbent {
                cost,
                count,
                ids: self.ids_of(chosen),
                positions: chosen.to_vec(),
            });
            self.cost_slack = lit::<T>(1e-9) * (T::one() + cost.abs());
        }
    }

    /// Fractional-cover lower bound on the cost to close `need` using items
    /// from `idx` on (they are sorted by gain/effort ratio).
    fn fractional_bound(&self, idx: usize, mut need: T) -> T {
        let mut bound = T::zero();
        for item in &self.pool[idx..] {
            if need <= T::zero() {
                break;
            }
            if item.gain >= need {
                bound += item.w * (need / item.gain);
                need = T::zero();
            } else {
                bound += item.w;
                need -= item.gain;
            }
        }
        bound
    }

    fn dfs(&mut self, idx: usize, cost: T, gain: T, chosen: &mut Vec<usize>) {
        if gain >= self.deficit {
            self.offer(cost, chosen);
            return;
        }
        if idx == self.pool.len() {
            return;
        }
        // Even taking every remaining item cannot close the deficit.
        if gain + self.suffix_gain[idx] < self.deficit - self.gain_slack {
            return;
        }
        if let Some(best) = &self.best {
            let bound = cost + self.fractional_bound(idx, self.deficit - gain);
            if bound > best.cost + self.cost_slack {
                return;
            }
        }

        let item = &self.pool[idx];
        chosen.push(idx);
        self.dfs(idx + 1, cost + item.w, gain + item.gain, chosen);
        chosen.pop();
        self.dfs(idx + 1, cost, gain, chosen);
    }
}

/// Exact minimum-effort portfolio reaching the target average future PCI.
///
/// Infeasible targets return `feasible = false` with the portfolio that
/// maximizes the achievable average instead of an error, so callers can
/// report shortfalls.
pub fn optimize_portfolio<T: Scalar>(
    effort: &EffortMatrix<T>,
    target_eci: T,
) -> Result<Portfolio<T>> {
    solve_cover(effort, target_eci, PortfolioMethod::Optimal)
}

fn solve_cover<T: Scalar>(
    effort: &EffortMatrix<T>,
    target_eci: T,
    method: PortfolioMethod,
) -> Result<Portfolio<T>> {
    if effort.baseline.is_empty() {
        return Err(Error::EmptyBaseline(effort.location.clone()));
    }
    let deficit = cover_deficit(&effort.baseline, target_eci);
    if deficit <= T::zero() {
        return Ok(finish_portfolio(effort, target_eci, Vec::new(), true, method));
    }

    let pool = covering_pool(&effort.candidates, target_eci);
    if fold_gain(&pool) < deficit {
        let chosen = max_achievable_selection(effort);
        return Ok(finish_portfolio(effort, target_eci, chosen, false, method));
    }

    let mut search = CoverSearch::new(&pool, &effort.candidates, deficit);
    let mut chosen = Vec::new();
    search.dfs(0, T::zero(), T::zero(), &mut chosen);
    let best = search.best.expect("feasible cover search finds an incumbent");
    let selected: Vec<usize> = best
        .positions
        .iter()
        .map(|&p| pool[p].candidate_idx)
        .collect();
    Ok(finish_portfolio(effort, target_eci, selected, true, method))
}

/// Exhaustive oracle over all finite-effort candidates. Capped at 22
/// candidates (the mask tables grow as `2^n`).
pub fn brute_force_portfolio<T: Scalar>(
    effort: &EffortMatrix<T>,
    target_eci: T,
) -> Result<Portfolio<T>> {
    const CAP: usize = 22;
    if effort.baseline.is_empty() {
        return Err(Error::EmptyBaseline(effort.location.clone()));
    }
    let selectable: Vec<usize> = (0..effort.candidates.len())
        .filter(|&i| effort.candidates[i].w.is_finite())
        .collect();
    if selectable.len() > CAP {
        return Err(Error::TooManyCandidates {
            count: selectable.len(),
            cap: CAP,
        });
    }
    let deficit = cover_deficit(&effort.baseline, target_eci);
    if deficit <= T::zero() {
        return Ok(finish_portfolio(
            effort,
            target_eci,
            Vec::new(),
            true,
            PortfolioMethod::BruteForce,
        ));
    }

    // Feasibility pass over the positive-gain pool, in the shared order.
    let pool = covering_pool(&effort.candidates, target_eci);
    let n = pool.len();
    let mut best: Option<(T, usize, Vec<String>, u32)> = None;
    if n > 0 {
        let masks = 1u32 << n;
        let mut cost = vec![T::zero(); masks as usize];
        let mut gain = vec![T::zero(); masks as usize];
        for mask in 1..masks {
            let hi = 31 - mask.leading_zeros();
            let rest = (mask & !(1 << hi)) as usize;
            cost[mask as usize] = cost[rest] + pool[hi as usize].w;
            gain[mask as usize] = gain[rest] + pool[hi as usize].gain;
        }
        for mask in 0..masks {
            if gain[mask as usize] < deficit {
                continue;
            }
            let c = cost[mask as usize];
            let count = mask.count_ones() as usize;
            let better = match &best {
                None => true,
                Some((bc, bn, bids, _)) => {
                    if c != *bc {
                        c < *bc
                    } else if count != *bn {
                        count < *bn
                    } else {
                        mask_ids(&pool, effort, mask) < *bids
                    }
                }
            };
            if better {
                best = Some((c, count, mask_ids(&pool, effort, mask), mask));
            }
        }
    }

    if let Some((_, _, _, mask)) = best {
        let mut selected = Vec::new();
        for (pos, item) in pool.iter().enumerate() {
            if mask & (1 << pos) != 0 {
                selected.push(item.candidate_idx);
            }
        }
        return Ok(finish_portfolio(
            effort,
            target_eci,
            selected,
            true,
            PortfolioMethod::BruteForce,
        ));
    }

    // Infeasible: exhaust every subset of the selectable candidates for the
    // highest achievable average, preferring cheaper, smaller, lexicographic
    // selections on ties.
    let baseline_sum: T = {
        let mut s = T::zero();
        for (_, pci) in &effort.baseline {
            s += *pci;
        }
        s
    };
    let nb: T = lit(effort.baseline.len() as f64);
    // Order matching the greedy construction in `max_achievable_selection`.
    let mut by_pci: Vec<usize> = selectable.clone();
    by_pci.sort_by(|&a, &b| {
        effort.candidates[b]
            .pci_future
            .partial_cmp(&effort.candidates[a].pci_future)
            .expect("finite pci")
            .then_with(|| effort.candidates[a].activity.cmp(&effort.candidates[b].activity))
    });
    let n = by_pci.len();
    let masks = 1u64 << n;
    let mut cost = vec![T::zero(); masks as usize];
    let mut pci_sum = vec![T::zero(); masks as usize];
    for mask in 1..masks {
        let hi = 63 - mask.leading_zeros();
        let rest = (mask & !(1u64 << hi)) as usize;
        let idx = by_pci[hi as usize];
        cost[mask as usize] = cost[rest] + effort.candidates[idx].w;
        pci_sum[mask as usize] = pci_sum[rest] + effort.candidates[idx].pci_future;
    }
    let mut best_mask = 0u64;
    let mut best_mean = baseline_sum / nb;
    for mask in 1..masks {
        let count = mask.count_ones() as usize;
        let mean = (baseline_sum + pci_sum[mask as usize]) / (nb + lit(count as f64));
        let better = if mean != best_mean {
            mean > best_mean
        } else {
            let (bc, bn) = (cost[best_mask as usize], best_mask.count_ones() as usize);
            let c = cost[mask as usize];
            if c != bc {
                c < bc
            } else if count != bn {
                count < bn
            } else {
                mask_ids_u64(&by_pci, effort, mask) < mask_ids_u64(&by_pci, effort, best_mask)
            }
        };
        if better {
            best_mask = mask;
            best_mean = mean;
        }
    }
    let mut selected = Vec::new();
    for (pos, &idx) in by_pci.iter().enumerate() {
        if best_mask & (1u64 << pos) != 0 {
            selected.push(idx);
        }
    }
    Ok(finish_portfolio(
        effort,
        target_eci,
        selected,
        false,
        PortfolioMethod::BruteForce,
    ))
}

fn mask_ids<T: Scalar>(pool: &[PoolItem<T>], effort: &EffortMatrix<T>, mask: u32) -> Vec<String> {
    let mut ids: Vec<String> = pool
        .iter()
        .enumerate()
        .filter(|(pos, _)| mask & (1 << *pos) != 0)
        .map(|(_, item)| effort.candidates[item.candidate_idx].activity.clone())
        .collect();
    ids.sort();
    ids
}

fn mask_ids_u64<T: Scalar>(order: &[usize], effort: &EffortMatrix<T>, mask: u64) -> Vec<String> {
    let mut ids: Vec<String> = order
        .iter()
        .enumerate()
        .filter(|(pos, _)| mask & (1u64 << *pos) != 0)
        .map(|(_, &idx)| effort.candidates[idx].activity.clone())
        .collect();
    ids.sort();
    ids
}

/// Greedy maximizer of the achievable average: walk candidates by descending
/// future PCI and keep adding while the next one beats the running mean.
fn max_achievable_selection<T: Scalar>(effort: &EffortMatrix<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..effort.candidates.len())
        .filter(|&i| effort.candidates[i].w.is_finite())
        .collect();
    order.sort_by(|&a, &b| {
        effort.candidates[b]
            .pci_future
            .partial_cmp(&effort.candidates[a].pci_future)
            .expect("finite pci")
            .then_with(|| effort.candidates[a].activity.cmp(&effort.candidates[b].activity))
    });
    let mut sum: T = T::zero();
    for (_, pci) in &effort.baseline {
        sum += *pci;
    }
    let mut count = effort.baseline.len();
    let mut chosen = Vec::new();
    for idx in order {
        let pci = effort.candidates[idx].pci_future;
        if pci > sum / lit(count as f64) {
            sum += pci;
            count += 1;
            chosen.push(idx);
        } else {
            break;
        }
    }
    chosen
}

fn finish_portfolio<T: Scalar>(
    effort: &EffortMatrix<T>,
    target_eci: T,
    mut candidate_indices: Vec<usize>,
    feasible: bool,
    method: PortfolioMethod,
) -> Portfolio<T> {
    candidate_indices.sort_by(|&a, &b| {
        effort.candidates[a]
            .activity
            .cmp(&effort.candidates[b].activity)
    });
    let selected: Vec<EffortCandidate<T>> = candidate_indices
        .iter()
        .map(|&i| effort.candidates[i].clone())
        .collect();
    // Total effort folds in ascending activity-id order.
    let mut total_effort = T::zero();
    for c in &selected {
        total_effort += c.w;
    }
    let achieved_eci = union_average(&effort.baseline, &selected);
    Portfolio {
        location: effort.location.clone(),
        target_eci,
        selected,
        achieved_eci,
        total_effort,
        feasible,
        method,
    }
}

/// Relatedness-complexity benchmark: rank candidates by the product of
/// min-max-normalized relatedness and future PCI, then add in rank order
/// until the target is met or the pool is exhausted.
pub fn benchmark_portfolio<T: Scalar>(
    effort: &EffortMatrix<T>,
    omega_of: &BTreeMap<String, T>,
    target_eci: T,
) -> Result<Portfolio<T>> {
    if effort.baseline.is_empty() {
        return Err(Error::EmptyBaseline(effort.location.clone()));
    }
    if effort.candidates.len() < 2 {
        return Err(Error::Degenerate(
            "min-max ranking needs at least two candidates".to_string(),
        ));
    }
    let omegas: Vec<T> = effort
        .candidates
        .iter()
        .map(|c| {
            omega_of.get(&c.activity).copied().ok_or_else(|| {
                Error::Degenerate(format!("no relatedness for candidate {:?}", c.activity))
            })
        })
        .collect::<Result<_>>()?;
    let pcis: Vec<T> = effort.candidates.iter().map(|c| c.pci_future).collect();

    let spread = |values: &[T]| -> Option<(T, T)> {
        let lo = values.iter().copied().fold(T::infinity(), T::min);
        let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
        let tol = lit::<T>(1e-12) * (T::one() + hi.abs());
        (hi - lo > tol).then_some((lo, hi - lo))
    };
    let omega_span = spread(&omegas);
    let pci_span = spread(&pcis);
    if omega_span.is_none() && pci_span.is_none() {
        return Err(Error::Degenerate(
            "both relatedness and PCI are constant across candidates".to_string(),
        ));
    }
    let normalize = |value: T, span: Option<(T, T)>| match span {
        Some((lo, width)) => (value - lo) / width,
        // Constant factor: drop it from the product rather than divide by 0.
        None => T::one(),
    };
    let scores: Vec<T> = omegas
        .iter()
        .zip(&pcis)
        .map(|(o, p)| normalize(*o, omega_span) * normalize(*p, pci_span))
        .collect();

    let mut order: Vec<usize> = (0..effort.candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then_with(|| effort.candidates[a].activity.cmp(&effort.candidates[b].activity))
    });

    let deficit = cover_deficit(&effort.baseline, target_eci);
    let mut chosen: Vec<usize> = Vec::new();
    let mut feasible = deficit <= T::zero();
    for &idx in &order {
        if feasible {
            break;
        }
        chosen.push(idx);
        // Canonical evaluation of the current set, ascending activity id.
        let mut by_id = chosen.clone();
        by_id.sort_by(|&a, &b| {
            effort.candidates[a]
                .activity
                .cmp(&effort.candidates[b].activity)
        });
        let mut gain = T::zero();
        for &i in &by_id {
            gain += effort.candidates[i].pci_future - target_eci;
        }
        feasible = gain >= deficit;
    }

    Ok(finish_portfolio(
        effort,
        target_eci,
        chosen,
        feasible,
        PortfolioMethod::Benchmark,
    ))
}

/// Minimum extra output volume needed to lift each selected activity to
/// `RCA = 1`, holding the year's totals fixed.
pub fn added_volume<T: Scalar>(
    portfolio: &Portfolio<T>,
    panel: &OutputPanel<T>,
    year: i32,
) -> Result<T> {
    let slice: Vec<_> = panel.year_slice(year).collect();
    if slice.is_empty() {
        return Err(Error::MissingYear(year));
    }
    let mut location_total = T::zero();
    let mut activity_totals: BTreeMap<&str, T> = BTreeMap::new();
    let mut cell: BTreeMap<&str, T> = BTreeMap::new();
    let mut grand_total = T::zero();
    let mut location_seen = false;
    for e in &slice {
        grand_total += e.value;
        *activity_totals.entry(e.activity.as_str()).or_insert(T::zero()) += e.value;
        if e.location == portfolio.location {
            location_seen = true;
            location_total += e.value;
            cell.insert(e.activity.as_str(), e.value);
        }
    }
    if !location_seen {
        return Err(Error::UnknownLocation(portfolio.location.clone()));
    }

    let mut volume = T::zero();
    for selected in &portfolio.selected {
        let x_p = activity_totals
            .get(selected.activity.as_str())
            .copied()
            .ok_or_else(|| Error::Degenerate(format!(
                "activity {:?} not in the year-{year} universe",
                selected.activity
            )))?;
        let x_cp = cell.get(selected.activity.as_str()).copied().unwrap_or(T::zero());
        let needed = location_total * x_p / grand_total - x_cp;
        if needed > T::zero() {
            volume += needed;
        }
    }
    Ok(volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn candidate(activity: &str, w: f64, pci: f64) -> EffortCandidate<f64> {
        EffortCandidate {
            activity: activity.to_string(),
            w,
            pci_future: pci,
        }
    }

    fn matrix(baseline: &[(&str, f64)], candidates: &[(&str, f64, f64)]) -> EffortMatrix<f64> {
        let mut baseline: Vec<(String, f64)> = baseline
            .iter()
            .map(|(a, p)| (a.to_string(), *p))
            .collect();
        baseline.sort_by(|a, b| a.0.cmp(&b.0));
        let mut cands: Vec<EffortCandidate<f64>> = candidates
            .iter()
            .map(|(a, w, p)| candidate(a, *w, *p))
            .collect();
        cands.sort_by(|a, b| a.activity.cmp(&b.activity));
        let eci_baseline =
            baseline.iter().map(|(_, p)| *p).sum::<f64>() / baseline.len() as f64;
        EffortMatrix {
            location: "FOCAL".to_string(),
            candidates: cands,
            baseline,
            eci_baseline,
            unpriced: Vec::new(),
        }
    }

    #[test]
    fn effort_inversion_closed_forms() {
        // b1 = 1, all others 0: W = exp(ln 2) - R - 1.
        let b = [0.0, 1.0, 0.0, 0.0, 0.0];
        assert_relative_eq!(solve_added_rca(&b, 0.0, 0.0, 0.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(solve_added_rca(&b, 0.6, 0.0, 0.0), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn effort_round_trips_to_the_threshold() {
        let b = [0.02, 0.63, 0.21, 0.18, 0.015];
        for (rca, omega, omega_rel) in [
            (0.0, 0.2, -0.05),
            (0.4, 0.5, 0.1),
            (0.93, 0.05, -0.2),
        ] {
            let w = solve_added_rca(&b, rca, omega, omega_rel);
            let r_hat = b[1] * (rca + w + 1.0_f64).ln()
                + b[2] * (rca + 1.0_f64).ln()
                + b[3] * omega
                + b[4] * omega_rel
                + b[0];
            assert_relative_eq!(r_hat, std::f64::consts::LN_2, epsilon = 1e-9);
        }
    }

    #[test]
    fn already_satisfied_target_selects_nothing() {
        let m = matrix(&[("b0", 1.0), ("b1", 0.5)], &[("c0", 1.0, 2.0)]);
        let p = optimize_portfolio(&m, 0.5).unwrap();
        assert!(p.feasible);
        assert!(p.selected.is_empty());
        assert_eq!(p.total_effort, 0.0);
        assert_relative_eq!(p.achieved_eci, 0.75);
    }

    #[test]
    fn single_big_gain_beats_two_cheap_ones() {
        // Baseline deficit 0.2 with one baseline activity; candidate gains
        // (+0.2, +0.15, +0.1) at costs (1.0, 0.6, 0.5). Only {a} covers at
        // cost 1.0; {b, c} covers 0.25 but costs 1.1.
        let target = 0.0;
        let m = matrix(
            &[("base", -0.2)],
            &[("a", 1.0, 0.2), ("b", 0.6, 0.15), ("c", 0.5, 0.1)],
        );
        let optimal = optimize_portfolio(&m, target).unwrap();
        let oracle = brute_force_portfolio(&m, target).unwrap();
        assert!(optimal.feasible);
        assert_eq!(
            optimal.selected.iter().map(|c| c.activity.as_str()).collect::<Vec<_>>(),
            vec!["a"]
        );
        assert_eq!(optimal.total_effort, 1.0);
        assert_eq!(oracle.total_effort, optimal.total_effort);
        assert_eq!(oracle.selected, optimal.selected);
    }

    #[test]
    fn infeasible_target_returns_max_achievable() {
        let m = matrix(&[("base", 0.0)], &[("a", 1.0, 0.5), ("b", 2.0, 0.3)]);
        let p = optimize_portfolio(&m, 5.0).unwrap();
        assert!(!p.feasible);
        // Both candidates beat the running mean, so both are taken.
        assert_eq!(p.selected.len(), 2);
        assert_relative_eq!(p.achieved_eci, (0.0 + 0.5 + 0.3) / 3.0);
        let oracle = brute_force_portfolio(&m, 5.0).unwrap();
        assert_eq!(oracle.selected, p.selected);
        assert!(!oracle.feasible);
    }

    #[test]
    fn no_candidates_with_high_target_is_infeasible_not_an_error() {
        let m = matrix(&[("base", 0.0)], &[]);
        let p = optimize_portfolio(&m, 1.0).unwrap();
        assert!(!p.feasible);
        assert!(p.selected.is_empty());
        assert_relative_eq!(p.achieved_eci, 0.0);
    }

    #[test]
    fn single_sufficient_candidate_needs_finite_effort() {
        let m = matrix(&[("base", -0.5)], &[("a", 2.0, 1.0)]);
        let p = brute_force_portfolio(&m, 0.0).unwrap();
        assert!(p.feasible);
        assert_eq!(p.selected.len(), 1);

        let m = matrix(&[("base", -0.5)], &[("a", f64::INFINITY, 1.0)]);
        let p = brute_force_portfolio(&m, 0.0).unwrap();
        assert!(!p.feasible);
        assert!(p.selected.is_empty());
        let opt = optimize_portfolio(&m, 0.0).unwrap();
        assert!(!opt.feasible);
        assert!(opt.selected.is_empty());
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let candidates: Vec<(String, f64, f64)> = (0..23)
            .map(|i| (format!("c{i:02}"), 1.0, 1.0 + i as f64 * 0.01))
            .collect();
        let refs: Vec<(&str, f64, f64)> = candidates
            .iter()
            .map(|(a, w, p)| (a.as_str(), *w, *p))
            .collect();
        let m = matrix(&[("base", 0.0)], &refs);
        assert!(matches!(
            brute_force_portfolio(&m, 0.5),
            Err(Error::TooManyCandidates { count: 23, cap: 22 })
        ));
    }

    #[test]
    fn zero_effort_candidates_are_free() {
        let m = matrix(
            &[("base", -0.3)],
            &[("a", 0.0, 0.5), ("b", 1.0, 0.4)],
        );
        let p = optimize_portfolio(&m, 0.0).unwrap();
        assert!(p.feasible);
        assert_eq!(
            p.selected.iter().map(|c| c.activity.as_str()).collect::<Vec<_>>(),
            vec!["a"]
        );
        assert_eq!(p.total_effort, 0.0);
        let oracle = brute_force_portfolio(&m, 0.0).unwrap();
        assert_eq!(oracle.selected, p.selected);
    }

    #[test]
    fn benchmark_ranks_by_normalized_product() {
        let m = matrix(
            &[("base", -0.4)],
            &[("hi", 5.0, 1.0), ("lo", 0.1, 0.2), ("mid", 1.0, 0.6)],
        );
        let mut omega = BTreeMap::new();
        omega.insert("hi".to_string(), 0.9);
        omega.insert("mid".to_string(), 0.5);
        omega.insert("lo".to_string(), 0.1);
        // "hi" has both max omega and max pci, so it is ranked first.
        let p = benchmark_portfolio(&m, &omega, 0.0).unwrap();
        assert_eq!(p.selected[0].activity, "hi");
        assert!(p.feasible);
    }

    #[test]
    fn benchmark_breaks_score_ties_lexicographically() {
        // (omega, pci) = (0.9, low) vs (0.5, high): normalized products are
        // 1*0 and 0*1, both zero, so rank falls back to the activity id.
        let m = matrix(&[("base", 0.0)], &[("p1", 1.0, 0.2), ("p2", 1.0, 0.8)]);
        let mut omega = BTreeMap::new();
        omega.insert("p1".to_string(), 0.9);
        omega.insert("p2".to_string(), 0.5);
        // p1 is ranked first and already covers the small deficit alone.
        let p = benchmark_portfolio(&m, &omega, 0.05).unwrap();
        assert!(p.feasible);
        assert_eq!(p.selected.len(), 1);
        assert_eq!(p.selected[0].activity, "p1");
        // Unreachable target exhausts the pool.
        let p = benchmark_portfolio(&m, &omega, 5.0).unwrap();
        assert!(!p.feasible);
        assert_eq!(p.selected.len(), 2);
    }

    #[test]
    fn benchmark_needs_spread_or_errors() {
        let m = matrix(&[("base", 0.0)], &[("a", 1.0, 0.5), ("b", 1.0, 0.5)]);
        let mut omega = BTreeMap::new();
        omega.insert("a".to_string(), 0.3);
        omega.insert("b".to_string(), 0.3);
        assert!(matches!(
            benchmark_portfolio(&m, &omega, 0.2),
            Err(Error::Degenerate(_))
        ));

        // Constant omega but varying pci: ranking falls back to pci.
        let m = matrix(&[("base", -0.5)], &[("a", 1.0, 0.9), ("b", 1.0, 0.1)]);
        let p = benchmark_portfolio(&m, &omega, 0.0).unwrap();
        assert_eq!(p.selected[0].activity, "a");
    }

    #[test]
    fn optimizer_never_beats_itself_on_effort_vs_benchmark() {
        let m = matrix(
            &[("base", -0.2)],
            &[
                ("a", 0.4, 0.6),
                ("b", 0.7, 0.9),
                ("c", 0.2, 0.1),
                ("d", 1.5, 1.2),
            ],
        );
        let mut omega = BTreeMap::new();
        for (act, o) in [("a", 0.2), ("b", 0.9), ("c", 0.4), ("d", 0.7)] {
            omega.insert(act.to_string(), o);
        }
        for target in [-0.1, 0.0, 0.2, 0.4] {
            let optimal = optimize_portfolio(&m, target).unwrap();
            let bench = benchmark_portfolio(&m, &omega, target).unwrap();
            if bench.feasible {
                assert!(optimal.feasible);
                assert!(optimal.total_effort <= bench.total_effort + 1e-12);
            }
        }
    }

    #[test]
    fn added_volume_examples() {
        use crate::panel::{OutputPanel, PanelEntry, Provenance};
        // X: FOCAL holds (x: 10), others: (x: 10, y: 3, z: 7). Totals:
        // X_c = 10, X_y = 3, X = 30.
        let entries = vec![
            ("FOCAL", "x", 10.0),
            ("OTHER", "x", 10.0),
            ("OTHER", "y", 3.0),
            ("OTHER", "z", 7.0),
        ];
        let panel = OutputPanel::from_entries(
            entries
                .into_iter()
                .map(|(l, a, v)| PanelEntry {
                    location: l.to_string(),
                    activity: a.to_string(),
                    year: 2000,
                    value: v,
                })
                .collect(),
            Provenance::Filtered,
            None,
            None,
        )
        .unwrap();

        let portfolio = Portfolio {
            location: "FOCAL".to_string(),
            target_eci: 0.0,
            selected: vec![candidate("y", 1.0, 0.5)],
            achieved_eci: 0.0,
            total_effort: 1.0,
            feasible: true,
            method: PortfolioMethod::Optimal,
        };
        // X_c * X_p / X - X_cp = 10 * 3 / 30 - 0 = 1.
        assert_relative_eq!(added_volume(&portfolio, &panel, 2000).unwrap(), 1.0);

        // An activity already at RCA 1 contributes zero: FOCAL x has
        // RCA = (10/10) / (20/30) = 1.5 >= 1, needed is negative.
        let portfolio = Portfolio {
            selected: vec![candidate("x", 0.0, 0.5)],
            ..portfolio
        };
        assert_relative_eq!(added_volume(&portfolio, &panel, 2000).unwrap(), 0.0);
    }
}
