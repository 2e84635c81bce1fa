//! Single-year complexity measures: RCA and specialization matrices, ECI and
//! PCI scores, and the proximity/density relatedness fields.
//!
//! PCI comes from the second eigenvector of the activity-space operator
//! `M'[p][q] = sum_c M[c][p] M[c][q] / (diversity_c * ubiquity_p)`, computed
//! through its symmetrization so the deterministic Jacobi solver applies.
//! ECI is the z-scored average of standardized PCI over each location's
//! specializations; the eigenvector ECI stays available as a cross-check.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;
use crate::panel::OutputPanel;
use crate::scalar::{lit, Scalar};
use crate::stats::{pearson, standardize};

/// One year's RCA matrix with its binarization and margins.
#[derive(Clone, Debug)]
pub struct SpecializationSnapshot<T> {
    pub year: i32,
    pub locations: Vec<String>,
    pub activities: Vec<String>,
    /// `rca[(c, p)] = X_cp * X / (X_c * X_p)`.
    pub rca: Matrix<T>,
    /// `m[(c, p)] = rca[(c, p)] >= 1`.
    pub m: Matrix<bool>,
    pub diversity: Vec<u32>,
    pub ubiquity: Vec<u32>,
}

impl<T: Scalar> SpecializationSnapshot<T> {
    pub fn location_pos(&self, id: &str) -> Option<usize> {
        self.locations.binary_search_by(|l| l.as_str().cmp(id)).ok()
    }

    pub fn activity_pos(&self, id: &str) -> Option<usize> {
        self.activities.binary_search_by(|a| a.as_str().cmp(id)).ok()
    }
}

/// Computes the RCA snapshot for one panel year.
///
/// Every location and activity present in the slice must have a positive
/// total; a zero total signals an upstream filtering failure.
pub fn compute_rca<T: Scalar>(panel: &OutputPanel<T>, year: i32) -> Result<SpecializationSnapshot<T>> {
    let slice: Vec<_> = panel.year_slice(year).collect();
    if slice.is_empty() {
        return Err(Error::MissingYear(year));
    }
    let mut locations: Vec<String> = slice.iter().map(|e| e.location.clone()).collect();
    locations.sort();
    locations.dedup();
    let mut activities: Vec<String> = slice.iter().map(|e| e.activity.clone()).collect();
    activities.sort();
    activities.dedup();

    let loc_pos: BTreeMap<&str, usize> = locations
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let act_pos: BTreeMap<&str, usize> = activities
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();

    let nl = locations.len();
    let na = activities.len();
    let mut x = Matrix::filled(nl, na, T::zero());
    for e in &slice {
        x[(loc_pos[e.location.as_str()], act_pos[e.activity.as_str()])] = e.value;
    }

    let mut row_totals = vec![T::zero(); nl];
    let mut col_totals = vec![T::zero(); na];
    let mut total = T::zero();
    for c in 0..nl {
        for p in 0..na {
            let v = x[(c, p)];
            row_totals[c] += v;
            col_totals[p] += v;
            total += v;
        }
    }
    for (c, rt) in row_totals.iter().enumerate() {
        if *rt <= T::zero() {
            return Err(Error::ZeroTotal {
                id: locations[c].clone(),
                year,
            });
        }
    }
    for (p, ct) in col_totals.iter().enumerate() {
        if *ct <= T::zero() {
            return Err(Error::ZeroTotal {
                id: activities[p].clone(),
                year,
            });
        }
    }

    let rca = Matrix::from_fn(nl, na, |c, p| x[(c, p)] * total / (row_totals[c] * col_totals[p]));
    let m = Matrix::from_fn(nl, na, |c, p| rca[(c, p)] >= T::one());
    let diversity = (0..nl)
        .map(|c| (0..na).filter(|&p| m[(c, p)]).count() as u32)
        .collect();
    let ubiquity = (0..na)
        .map(|p| (0..nl).filter(|&c| m[(c, p)]).count() as u32)
        .collect();

    Ok(SpecializationSnapshot {
        year,
        locations,
        activities,
        rca,
        m,
        diversity,
        ubiquity,
    })
}

/// ECI/PCI scores for the largest connected component of a specialization
/// matrix, both z-scored to mean 0, population std 1.
#[derive(Clone, Debug)]
pub struct ComplexityScores<T> {
    /// Locations actually scored (largest component), sorted.
    pub locations: Vec<String>,
    pub eci: Vec<T>,
    /// Activities actually scored, sorted.
    pub activities: Vec<String>,
    pub pci: Vec<T>,
    /// Human-readable description of the sign convention applied.
    pub orientation_anchor: String,
    /// `(mean, std)` of the oriented raw ECI vector before z-scoring.
    pub eci_standardization: (T, T),
    /// `(mean, std)` of the oriented raw PCI vector before z-scoring.
    pub pci_standardization: (T, T),
    /// Locations outside the largest connected component.
    pub excluded_locations: Vec<String>,
    /// Activities outside the largest connected component.
    pub excluded_activities: Vec<String>,
}

impl<T: Scalar> ComplexityScores<T> {
    pub fn eci_map(&self) -> BTreeMap<String, T> {
        self.locations.iter().cloned().zip(self.eci.iter().copied()).collect()
    }

    pub fn pci_map(&self) -> BTreeMap<String, T> {
        self.activities.iter().cloned().zip(self.pci.iter().copied()).collect()
    }
}

/// Separation below which the second eigenvalue counts as degenerate.
const EIGENVALUE_GAP_TOL: f64 = 1e-9;

/// Computes ECI and PCI from a binary specialization matrix.
///
/// When the bipartite location-activity graph is disconnected the scores are
/// computed on the largest component and the rest are reported as excluded.
pub fn compute_eci_pci<T: Scalar>(
    m: &Matrix<bool>,
    locations: &[String],
    activities: &[String],
) -> Result<ComplexityScores<T>> {
    let nl = m.rows();
    let na = m.cols();
    assert_eq!(nl, locations.len());
    assert_eq!(na, activities.len());

    for c in 0..nl {
        if !(0..na).any(|p| m[(c, p)]) {
            return Err(Error::EmptyMatrixRow(locations[c].clone()));
        }
    }
    for p in 0..na {
        if !(0..nl).any(|c| m[(c, p)]) {
            return Err(Error::EmptyMatrixColumn(activities[p].clone()));
        }
    }

    let (comp_locs, comp_acts) = largest_component(m);
    let excluded_locations: Vec<String> = (0..nl)
        .filter(|c| !comp_locs.contains(c))
        .map(|c| locations[c].clone())
        .collect();
    let excluded_activities: Vec<String> = (0..na)
        .filter(|p| !comp_acts.contains(p))
        .map(|p| activities[p].clone())
        .collect();

    if comp_acts.len() < 2 {
        return Err(Error::Degenerate(
            "largest connected component has fewer than two activities".to_string(),
        ));
    }

    let sub = Matrix::from_fn(comp_locs.len(), comp_acts.len(), |c, p| {
        m[(comp_locs[c], comp_acts[p])]
    });
    let diversity: Vec<u32> = (0..sub.rows())
        .map(|c| (0..sub.cols()).filter(|&p| sub[(c, p)]).count() as u32)
        .collect();
    let ubiquity: Vec<u32> = (0..sub.cols())
        .map(|p| (0..sub.rows()).filter(|&c| sub[(c, p)]).count() as u32)
        .collect();

    let pci_raw = second_eigenvector_scores(&sub, &diversity, &ubiquity, Axis::Activities)?;
    let (mut pci, mut pci_mean, pci_std) = standardize(&pci_raw)?;

    let mut eci_raw = Vec::with_capacity(sub.rows());
    for c in 0..sub.rows() {
        let row: Vec<bool> = (0..sub.cols()).map(|p| sub[(c, p)]).collect();
        eci_raw.push(eci_of_row(&row, &pci)?);
    }
    let (mut eci, mut eci_mean, eci_std) = standardize(&eci_raw)?;

    let diversity_t: Vec<T> = diversity.iter().map(|&d| lit(d as f64)).collect();
    let corr = pearson(&eci, &diversity_t);
    let flipped = corr < T::zero();
    if flipped {
        for v in pci.iter_mut() {
            *v = -*v;
        }
        for v in eci.iter_mut() {
            *v = -*v;
        }
        pci_mean = -pci_mean;
        eci_mean = -eci_mean;
    }
    let orientation_anchor = format!(
        "pci sign fixed so corr(eci, diversity) >= 0{}",
        if flipped { " (flipped)" } else { "" }
    );

    Ok(ComplexityScores {
        locations: comp_locs.iter().map(|&c| locations[c].clone()).collect(),
        eci,
        activities: comp_acts.iter().map(|&p| activities[p].clone()).collect(),
        pci,
        orientation_anchor,
        eci_standardization: (eci_mean, eci_std),
        pci_standardization: (pci_mean, pci_std),
        excluded_locations,
        excluded_activities,
    })
}

/// Eigenvector-route ECI (second eigenvector of the location-space operator),
/// z-scored and oriented like [`compute_eci_pci`]. Cross-check only; requires
/// a connected matrix.
pub fn eigenvector_eci<T: Scalar>(m: &Matrix<bool>) -> Result<Vec<T>> {
    let nl = m.rows();
    let na = m.cols();
    let (comp_locs, comp_acts) = largest_component(m);
    if comp_locs.len() != nl || comp_acts.len() != na {
        return Err(Error::Degenerate(
            "eigenvector_eci requires a connected specialization matrix".to_string(),
        ));
    }
    if nl < 2 {
        return Err(Error::Degenerate(
            "eigenvector_eci requires at least two locations".to_string(),
        ));
    }
    let diversity: Vec<u32> = (0..nl)
        .map(|c| (0..na).filter(|&p| m[(c, p)]).count() as u32)
        .collect();
    let ubiquity: Vec<u32> = (0..na)
        .map(|p| (0..nl).filter(|&c| m[(c, p)]).count() as u32)
        .collect();
    let raw = second_eigenvector_scores(m, &diversity, &ubiquity, Axis::Locations)?;
    let (mut eci, _, _) = standardize(&raw)?;
    let diversity_t: Vec<T> = diversity.iter().map(|&d| lit(d as f64)).collect();
    if pearson(&eci, &diversity_t) < T::zero() {
        for v in eci.iter_mut() {
            *v = -*v;
        }
    }
    Ok(eci)
}

enum Axis {
    Locations,
    Activities,
}

/// Second eigenvector of the co-specialization operator on the given axis,
/// through its symmetric similarity transform.
fn second_eigenvector_scores<T: Scalar>(
    m: &Matrix<bool>,
    diversity: &[u32],
    ubiquity: &[u32],
    axis: Axis,
) -> Result<Vec<T>> {
    let (n, weight_margin, own_margin): (usize, Vec<T>, Vec<T>) = match axis {
        Axis::Activities => (
            m.cols(),
            diversity.iter().map(|&d| lit(d as f64)).collect(),
            ubiquity.iter().map(|&u| lit(u as f64)).collect(),
        ),
        Axis::Locations => (
            m.rows(),
            ubiquity.iter().map(|&u| lit(u as f64)).collect(),
            diversity.iter().map(|&d| lit(d as f64)).collect(),
        ),
    };

    // S[i][j] = sum_k M_ki M_kj / weight_k, then A = D^-1/2 S D^-1/2 where D
    // holds the axis margins. A shares eigenvalues with the row-stochastic
    // operator S D^-1; eigenvectors map back through D^-1/2.
    let mut s = Matrix::filled(n, n, T::zero());
    match axis {
        Axis::Activities => {
            for c in 0..m.rows() {
                let w = T::one() / weight_margin[c];
                for p in 0..n {
                    if !m[(c, p)] {
                        continue;
                    }
                    for q in p..n {
                        if m[(c, q)] {
                            s[(p, q)] += w;
                        }
                    }
                }
            }
        }
        Axis::Locations => {
            for p in 0..m.cols() {
                let w = T::one() / weight_margin[p];
                for c in 0..n {
                    if !m[(c, p)] {
                        continue;
                    }
                    for d in c..n {
                        if m[(d, p)] {
                            s[(c, d)] += w;
                        }
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }

    let a = Matrix::from_fn(n, n, |i, j| {
        s[(i, j)] / (own_margin[i] * own_margin[j]).sqrt()
    });
    let eig = symmetric_eigen(&a)?;

    if n >= 3 {
        let gap = eig.values[1] - eig.values[2];
        let tol = lit::<T>(EIGENVALUE_GAP_TOL).max(T::epsilon() * lit(100.0))
            * T::one().max(eig.values[1].abs());
        if gap <= tol {
            return Err(Error::Degenerate(
                "second eigenvalue of the similarity operator is not simple".to_string(),
            ));
        }
    }

    Ok((0..n)
        .map(|i| eig.vectors[(i, 1)] / own_margin[i].sqrt())
        .collect())
}

/// Average PCI over the activities a row specializes in.
pub fn eci_of_row<T: Scalar>(m_row: &[bool], pci: &[T]) -> Result<T> {
    assert_eq!(m_row.len(), pci.len());
    let mut sum = T::zero();
    let mut count = 0usize;
    for (held, value) in m_row.iter().zip(pci) {
        if *held {
            sum += *value;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::AllZeroRow);
    }
    Ok(sum / lit(count as f64))
}

fn largest_component(m: &Matrix<bool>) -> (Vec<usize>, Vec<usize>) {
    let nl = m.rows();
    let na = m.cols();
    let mut loc_comp = vec![usize::MAX; nl];
    let mut act_comp = vec![usize::MAX; na];
    let mut components: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();

    for start in 0..nl {
        if loc_comp[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut locs = Vec::new();
        let mut acts = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        loc_comp[start] = id;
        queue.push_back((true, start));
        while let Some((is_loc, idx)) = queue.pop_front() {
            if is_loc {
                locs.push(idx);
                for p in 0..na {
                    if m[(idx, p)] && act_comp[p] == usize::MAX {
                        act_comp[p] = id;
                        queue.push_back((false, p));
                    }
                }
            } else {
                acts.push(idx);
                for c in 0..nl {
                    if m[(c, idx)] && loc_comp[c] == usize::MAX {
                        loc_comp[c] = id;
                        queue.push_back((true, c));
                    }
                }
            }
        }
        locs.sort_unstable();
        acts.sort_unstable();
        components.push((locs, acts));
    }

    components
        .into_iter()
        .max_by(|a, b| {
            (a.0.len() + a.1.len())
                .cmp(&(b.0.len() + b.1.len()))
                // First-discovered component wins ties (smaller min location).
                .then_with(|| b.0.first().cmp(&a.0.first()))
        })
        .unwrap_or((Vec::new(), Vec::new()))
}

/// Proximity, density and relative density for one snapshot.
#[derive(Clone, Debug)]
pub struct RelatednessField<T> {
    pub locations: Vec<String>,
    pub activities: Vec<String>,
    /// Activity-activity proximity, symmetric with unit diagonal.
    pub phi: Matrix<T>,
    /// Location-activity relatedness density in `[0, 1]`.
    pub omega: Matrix<T>,
    /// Density centered on each location's mean.
    pub omega_rel: Matrix<T>,
}

/// Minimum conditional co-specialization probability:
/// `phi[p][q] = sum_c M_cp M_cq / max(ubiquity_p, ubiquity_q)`.
pub fn compute_proximity<T: Scalar>(m: &Matrix<bool>) -> Result<Matrix<T>> {
    let nl = m.rows();
    let na = m.cols();
    let ubiquity: Vec<usize> = (0..na)
        .map(|p| (0..nl).filter(|&c| m[(c, p)]).count())
        .collect();
    for (p, &u) in ubiquity.iter().enumerate() {
        if u == 0 {
            return Err(Error::Degenerate(format!(
                "activity column {p} has zero ubiquity"
            )));
        }
    }
    let mut phi = Matrix::filled(na, na, T::zero());
    for p in 0..na {
        phi[(p, p)] = T::one();
        for q in (p + 1)..na {
            let co = (0..nl).filter(|&c| m[(c, p)] && m[(c, q)]).count();
            let denom = ubiquity[p].max(ubiquity[q]);
            let value = lit::<T>(co as f64) / lit(denom as f64);
            phi[(p, q)] = value;
            phi[(q, p)] = value;
        }
    }
    Ok(phi)
}

/// Proximity-weighted share of a location's specializations around each
/// activity: `omega[c][p] = sum_q M_cq phi_pq / sum_q phi_pq`.
pub fn compute_density<T: Scalar>(m: &Matrix<bool>, phi: &Matrix<T>) -> Result<Matrix<T>> {
    let nl = m.rows();
    let na = m.cols();
    assert_eq!(phi.rows(), na);
    assert_eq!(phi.cols(), na);
    let mut denom = vec![T::zero(); na];
    for p in 0..na {
        for q in 0..na {
            denom[p] += phi[(p, q)];
        }
        if denom[p] <= T::zero() {
            return Err(Error::Degenerate(format!(
                "proximity row {p} sums to zero"
            )));
        }
    }
    let mut omega = Matrix::filled(nl, na, T::zero());
    for c in 0..nl {
        for p in 0..na {
            let mut num = T::zero();
            for q in 0..na {
                if m[(c, q)] {
                    num += phi[(p, q)];
                }
            }
            omega[(c, p)] = num / denom[p];
        }
    }
    Ok(omega)
}

/// Centers each location's density row on its own mean.
pub fn compute_relative_density<T: Scalar>(omega: &Matrix<T>) -> Matrix<T> {
    let na = omega.cols();
    let mut out = omega.clone();
    for c in 0..omega.rows() {
        let row_mean = {
            let mut s = T::zero();
            for p in 0..na {
                s += omega[(c, p)];
            }
            s / lit(na as f64)
        };
        for p in 0..na {
            out[(c, p)] = omega[(c, p)] - row_mean;
        }
    }
    out
}

/// Builds the full relatedness field for a snapshot.
pub fn compute_relatedness<T: Scalar>(
    snapshot: &SpecializationSnapshot<T>,
) -> Result<RelatednessField<T>> {
    let phi = compute_proximity(&snapshot.m)?;
    let omega = compute_density(&snapshot.m, &phi)?;
    let omega_rel = compute_relative_density(&omega);
    Ok(RelatednessField {
        locations: snapshot.locations.clone(),
        activities: snapshot.activities.clone(),
        phi,
        omega,
        omega_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{OutputPanel, PanelEntry, Provenance};
    use approx::assert_relative_eq;

    fn panel_from(values: &[(&str, &str, f64)], year: i32) -> OutputPanel<f64> {
        let entries = values
            .iter()
            .map(|(l, a, v)| PanelEntry {
                location: l.to_string(),
                activity: a.to_string(),
                year,
                value: *v,
            })
            .collect();
        OutputPanel::from_entries(entries, Provenance::Filtered, None, None).unwrap()
    }

    fn bool_matrix(rows: &[&[u8]]) -> Matrix<bool> {
        Matrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c] == 1)
    }

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn uniform_matrix_has_unit_rca() {
        let panel = panel_from(
            &[("A", "x", 5.0), ("A", "y", 5.0), ("B", "x", 5.0), ("B", "y", 5.0)],
            2000,
        );
        let snap = compute_rca(&panel, 2000).unwrap();
        for c in 0..2 {
            for p in 0..2 {
                assert_relative_eq!(snap.rca[(c, p)], 1.0);
                assert!(snap.m[(c, p)]);
            }
        }
        assert_eq!(snap.diversity, vec![2, 2]);
        assert_eq!(snap.ubiquity, vec![2, 2]);
    }

    #[test]
    fn rca_cells_follow_the_output_share_formula() {
        // X = [[10, 0], [10, 10]]: row totals (10, 20), column totals (20, 10).
        let panel = panel_from(&[("A", "x", 10.0), ("B", "x", 10.0), ("B", "y", 10.0)], 2000);
        let snap = compute_rca(&panel, 2000).unwrap();
        assert_relative_eq!(snap.rca[(0, 0)], 10.0 * 30.0 / (10.0 * 20.0)); // 1.5
        assert_relative_eq!(snap.rca[(0, 1)], 0.0);
        assert_relative_eq!(snap.rca[(1, 0)], 10.0 * 30.0 / (20.0 * 20.0)); // 0.75
        assert_relative_eq!(snap.rca[(1, 1)], 10.0 * 30.0 / (20.0 * 10.0)); // 1.5
        assert!(!snap.m[(1, 0)]);
        assert!(snap.m[(1, 1)]);
    }

    #[test]
    fn single_cell_rca_is_one() {
        let panel = panel_from(&[("A", "x", 42.0)], 2000);
        let snap = compute_rca(&panel, 2000).unwrap();
        assert_relative_eq!(snap.rca[(0, 0)], 1.0);
    }

    #[test]
    fn rca_mass_identity_holds() {
        let panel = panel_from(
            &[
                ("A", "x", 13.0),
                ("A", "y", 2.0),
                ("B", "x", 5.0),
                ("B", "z", 11.0),
                ("C", "y", 7.0),
                ("C", "z", 3.0),
            ],
            2000,
        );
        let snap = compute_rca(&panel, 2000).unwrap();
        let total: f64 = panel.entries().iter().map(|e| e.value).sum();
        let mut row_totals = vec![0.0; snap.locations.len()];
        let mut col_totals = vec![0.0; snap.activities.len()];
        for e in panel.entries() {
            row_totals[snap.location_pos(&e.location).unwrap()] += e.value;
            col_totals[snap.activity_pos(&e.activity).unwrap()] += e.value;
        }
        let mut reconstructed = 0.0;
        for c in 0..snap.locations.len() {
            for p in 0..snap.activities.len() {
                reconstructed += snap.rca[(c, p)] * row_totals[c] * col_totals[p] / total;
            }
        }
        assert!((reconstructed - total).abs() / total < 1e-12);
    }

    #[test]
    fn zero_total_is_an_upstream_failure() {
        let panel = panel_from(&[("A", "x", 1.0), ("B", "y", 0.0)], 2000);
        assert!(matches!(
            compute_rca(&panel, 2000),
            Err(Error::ZeroTotal { .. })
        ));
        assert!(matches!(
            compute_rca(&panel, 1999),
            Err(Error::MissingYear(1999))
        ));
    }

    #[test]
    fn identity_matrix_scores_are_degenerate() {
        let m = bool_matrix(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        let err = compute_eci_pci::<f64>(&m, &ids("L", 3), &ids("P", 3)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn nested_matrix_eci_follows_diversity() {
        // Location i holds activities 0..=i.
        let m = bool_matrix(&[
            &[1, 0, 0, 0],
            &[1, 1, 0, 0],
            &[1, 1, 1, 0],
            &[1, 1, 1, 1],
        ]);
        let scores = compute_eci_pci::<f64>(&m, &ids("L", 4), &ids("P", 4)).unwrap();
        assert!(scores.excluded_locations.is_empty());
        for w in scores.eci.windows(2) {
            assert!(w[0] < w[1], "eci should increase with diversity: {:?}", scores.eci);
        }
        // Rarer activities are more complex in a nested structure.
        for w in scores.pci.windows(2) {
            assert!(w[0] < w[1], "pci should increase with rarity: {:?}", scores.pci);
        }
        assert_relative_eq!(crate::stats::mean(&scores.eci), 0.0, epsilon = 1e-12);
        assert_relative_eq!(crate::stats::population_std(&scores.eci), 1.0, epsilon = 1e-12);
        assert_relative_eq!(crate::stats::mean(&scores.pci), 0.0, epsilon = 1e-12);
        assert_relative_eq!(crate::stats::population_std(&scores.pci), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disconnected_matrix_scores_largest_component() {
        // Component 1: two locations sharing three activities (connected,
        // non-degenerate); component 2: an isolated location-activity pair.
        let m = bool_matrix(&[
            &[1, 1, 0, 0],
            &[1, 1, 1, 0],
            &[0, 1, 1, 0],
            &[0, 0, 0, 1],
        ]);
        let scores = compute_eci_pci::<f64>(&m, &ids("L", 4), &ids("P", 4)).unwrap();
        assert_eq!(scores.excluded_locations, vec!["L3".to_string()]);
        assert_eq!(scores.excluded_activities, vec!["P3".to_string()]);
        assert_eq!(scores.locations.len(), 3);
        assert_eq!(scores.activities.len(), 3);
    }

    #[test]
    fn eci_of_row_examples() {
        assert_relative_eq!(
            eci_of_row(&[true, true], &[2.5, 2.5]).unwrap(),
            2.5
        );
        assert_relative_eq!(
            eci_of_row(&[true, true], &[1.0, -1.0]).unwrap(),
            0.0
        );
        assert_relative_eq!(
            eci_of_row(&[true, true, true], &[0.2, 0.4, 0.9]).unwrap(),
            0.5
        );
        assert!(matches!(
            eci_of_row(&[false, false], &[1.0, 2.0]),
            Err(Error::AllZeroRow)
        ));
    }

    #[test]
    fn proximity_examples() {
        let identical = bool_matrix(&[&[1, 1], &[1, 1], &[0, 0]]);
        // Zero rows are fine for proximity; only columns need ubiquity.
        let phi = compute_proximity::<f64>(&identical).unwrap();
        assert_relative_eq!(phi[(0, 1)], 1.0);

        let disjoint = bool_matrix(&[&[1, 0], &[0, 1]]);
        let phi = compute_proximity::<f64>(&disjoint).unwrap();
        assert_relative_eq!(phi[(0, 1)], 0.0);
        assert_relative_eq!(phi[(0, 0)], 1.0);

        // Co-occurrence 2, ubiquities 4 and 2.
        let m = bool_matrix(&[&[1, 1], &[1, 1], &[1, 0], &[1, 0]]);
        let phi = compute_proximity::<f64>(&m).unwrap();
        assert_relative_eq!(phi[(0, 1)], 0.5);
        assert_relative_eq!(phi[(1, 0)], 0.5);
    }

    #[test]
    fn density_examples() {
        let m = bool_matrix(&[&[1, 1], &[0, 0]]);
        let phi = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let omega = compute_density(&m, &phi).unwrap();
        assert_relative_eq!(omega[(0, 0)], 1.0);
        assert_relative_eq!(omega[(0, 1)], 1.0);
        assert_relative_eq!(omega[(1, 0)], 0.0);

        // Row (1, 0) against phi row for the second activity (0.5, 1.0).
        let m = bool_matrix(&[&[1, 0]]);
        let omega = compute_density(&m, &phi).unwrap();
        assert_relative_eq!(omega[(0, 1)], 0.5 / 1.5);
    }

    #[test]
    fn relative_density_centers_rows() {
        let omega = Matrix::from_rows(&[vec![0.4, 0.4], vec![0.2, 0.4]]);
        let rel = compute_relative_density(&omega);
        assert_relative_eq!(rel[(0, 0)], 0.0);
        assert_relative_eq!(rel[(0, 1)], 0.0);
        assert_relative_eq!(rel[(1, 0)], -0.1);
        assert_relative_eq!(rel[(1, 1)], 0.1);
        let mean: f64 = (rel[(1, 0)] + rel[(1, 1)]) / 2.0;
        assert_relative_eq!(mean, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scores_are_permutation_invariant() {
        let m = bool_matrix(&[
            &[1, 1, 0, 0],
            &[1, 1, 1, 0],
            &[0, 1, 1, 1],
            &[0, 0, 1, 1],
        ]);
        let locations = ids("L", 4);
        let activities = ids("P", 4);
        let scores = compute_eci_pci::<f64>(&m, &locations, &activities).unwrap();

        // Reverse both axes and relabel so sorted ids land back in order.
        let permuted = Matrix::from_fn(4, 4, |r, c| m[(3 - r, 3 - c)]);
        let perm_locs: Vec<String> = (0..4).map(|i| format!("L{}", 3 - i)).collect();
        let perm_acts: Vec<String> = (0..4).map(|i| format!("P{}", 3 - i)).collect();
        let permuted_scores =
            compute_eci_pci::<f64>(&permuted, &perm_locs, &perm_acts).unwrap();

        let original = scores.eci_map();
        let shuffled = permuted_scores.eci_map();
        for (id, value) in original {
            assert_relative_eq!(value, shuffled[&id], epsilon = 1e-9);
        }
        let original = scores.pci_map();
        let shuffled = permuted_scores.pci_map();
        for (id, value) in original {
            assert_relative_eq!(value, shuffled[&id], epsilon = 1e-9);
        }
    }
}
