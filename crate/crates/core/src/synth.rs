//! Deterministic synthetic trade-and-macro data for demos and tests.
//!
//! The generator simulates a capability-style world: each location has a
//! latent capability, each activity a difficulty, and activities live in
//! blocks so that entering an activity is easier when a location already
//! holds its neighbors. Specialization intensities mean-revert toward their
//! long-run affinity with a relatedness pull, which gives the steppingstone
//! regressions the qualitative structure seen in real output data (positive
//! coefficients on the steppingstone, start-year, relatedness and relative
//! relatedness terms). Everything is seeded, so identical specs produce
//! byte-identical CSVs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub locations: usize,
    pub activities: usize,
    pub year_min: i32,
    pub year_max: i32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            locations: 30,
            activities: 200,
            year_min: 1998,
            year_max: 2022,
            seed: 7,
        }
    }
}

/// Generated CSV payloads in the ingest schemas.
#[derive(Clone, Debug)]
pub struct SynthData {
    /// `country_id,product_hs4,year,export_value`
    pub panel_csv: String,
    /// `country_id,year,gdp_pc_ppp_const2021,population`
    pub macro_csv: String,
}

impl SynthData {
    /// Writes `trade.csv` and `macro.csv` into a directory, returning the paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let panel_path = dir.join("trade.csv");
        let macro_path = dir.join("macro.csv");
        std::fs::write(&panel_path, &self.panel_csv).map_err(|e| Error::io(&panel_path, e))?;
        std::fs::write(&macro_path, &self.macro_csv).map_err(|e| Error::io(&macro_path, e))?;
        Ok((panel_path, macro_path))
    }
}

const N_BLOCKS: usize = 10;
/// Mean-reversion speed toward the long-run affinity.
const REVERSION: f64 = 0.2;
/// Drift weight on the relatedness proxy.
const RELATEDNESS_PULL: f64 = 0.6;
/// Drift weight on the location-centered relatedness proxy.
const RELATIVE_PULL: f64 = 0.6;
/// Innovation noise in the latent log intensity.
const NOISE_SD: f64 = 0.25;
/// Cells below this output value (USD) are treated as absent.
const VALUE_FLOOR: f64 = 1_000.0;

pub fn generate(spec: &SynthSpec) -> SynthData {
    let nl = spec.locations;
    let na = spec.activities;
    let n_years = (spec.year_max - spec.year_min + 1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    // Location capabilities spread from laggard to frontier.
    let capability: Vec<f64> = (0..nl)
        .map(|c| {
            let rank = c as f64 / (nl - 1).max(1) as f64;
            -1.2 + 3.0 * rank + 0.1 * std_normal.sample(&mut rng)
        })
        .collect();
    // Activity difficulties, harder toward the end of the list.
    let difficulty: Vec<f64> = (0..na)
        .map(|p| {
            let rank = p as f64 / (na - 1).max(1) as f64;
            -1.5 + 3.7 * rank + 0.1 * std_normal.sample(&mut rng)
        })
        .collect();
    let block_of: Vec<usize> = (0..na).map(|p| p * N_BLOCKS / na).collect();

    // Block affinities per location (softmax of Gaussian preferences).
    let mut affinity = vec![vec![0.0f64; N_BLOCKS]; nl];
    for row in affinity.iter_mut() {
        let mut total = 0.0;
        for slot in row.iter_mut() {
            *slot = (std_normal.sample(&mut rng)).exp();
            total += *slot;
        }
        for slot in row.iter_mut() {
            *slot /= total;
        }
    }

    // Static activity similarity by block distance, for the relatedness pull.
    let mut sim = vec![vec![0.0f64; na]; na];
    let mut sim_row_sum = vec![0.0f64; na];
    for p in 0..na {
        for q in 0..na {
            let d = (block_of[p] as f64 - block_of[q] as f64).abs();
            sim[p][q] = (-0.8 * d).exp();
            sim_row_sum[p] += sim[p][q];
        }
    }

    // Long-run affinity of each cell.
    let mut mu = vec![vec![0.0f64; na]; nl];
    for c in 0..nl {
        for p in 0..na {
            mu[c][p] = 1.8 * (capability[c] - difficulty[p]).tanh()
                + 2.2 * affinity[c][block_of[p]];
        }
    }

    // Initial latent intensities.
    let mut latent = vec![vec![0.0f64; na]; nl];
    for c in 0..nl {
        for p in 0..na {
            latent[c][p] = mu[c][p] + 0.6 * std_normal.sample(&mut rng);
        }
    }

    // Output scales: mostly well above the USD 1B location filter, with the
    // last two locations designed to exercise the filters (one small and
    // growing across the threshold, one with a sub-million population).
    let mut base_size: Vec<f64> = capability.iter().map(|a| 2.0e9 * (1.1 * a).exp()).collect();
    if nl >= 2 {
        base_size[nl - 1] = 6.0e8;
    }
    let mut population: Vec<f64> = (0..nl)
        .map(|c| 2.0e6 + 2.9e8 * rng.gen::<f64>() * (0.3 + capability[c].exp() / 8.0))
        .collect();
    if nl >= 3 {
        population[nl - 2] = 8.0e5;
    }
    let mut gdppc: Vec<f64> = capability
        .iter()
        .map(|a| (8.0 + 0.8 * a + 0.3 * std_normal.sample(&mut rng)).exp())
        .collect();

    let mut panel_csv = String::from("country_id,product_hs4,year,export_value\n");
    let mut macro_csv = String::from("country_id,year,gdp_pc_ppp_const2021,population\n");

    for step in 0..n_years {
        let year = spec.year_min + step as i32;

        // Emit the current state.
        let size_growth = 1.03f64.powi(step as i32);
        for c in 0..nl {
            for p in 0..na {
                let mut value = base_size[c] * size_growth * latent[c][p].exp() / na as f64;
                // The last few activities are tiny worldwide, so the
                // activity-total filter has something to drop.
                if p + 3 >= na {
                    value *= 1.0e-7;
                }
                if value >= VALUE_FLOOR {
                    let _ = writeln!(
                        panel_csv,
                        "C{c:02},P{p:03},{year},{value}"
                    );
                }
            }
            let _ = writeln!(
                macro_csv,
                "C{c:02},{year},{gdp},{pop}",
                gdp = gdppc[c],
                pop = population[c]
            );
        }

        // Relatedness proxy from the current specialization pattern: the
        // share of similarity mass covered by the location's strong cells.
        let mut rho = vec![vec![0.0f64; na]; nl];
        for c in 0..nl {
            // "Strong" means above the location's median latent intensity.
            let mut sorted: Vec<f64> = latent[c].clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = sorted[na / 2];
            let active: Vec<usize> = (0..na).filter(|&p| latent[c][p] > median).collect();
            for p in 0..na {
                let mass: f64 = active.iter().map(|&q| sim[p][q]).sum();
                rho[c][p] = mass / sim_row_sum[p];
            }
        }

        // Advance the latent state.
        for c in 0..nl {
            let rho_mean: f64 = rho[c].iter().sum::<f64>() / na as f64;
            for p in 0..na {
                let shock = NOISE_SD * std_normal.sample(&mut rng);
                latent[c][p] += REVERSION * (mu[c][p] - latent[c][p])
                    + RELATEDNESS_PULL * (rho[c][p] - 0.5)
                    + RELATIVE_PULL * (rho[c][p] - rho_mean)
                    + shock;
            }
        }

        // Advance the macro series: growth rises with capability and decays
        // with income (convergence), plus a common period swing.
        let common = 1.2 * ((step as f64) * 0.55).sin();
        for c in 0..nl {
            let convergence = -0.9 * (gdppc[c].ln() - 9.0);
            let g_pct = 2.0 + 1.4 * capability[c] + convergence + common
                + 0.8 * std_normal.sample(&mut rng);
            gdppc[c] *= (g_pct / 100.0).exp();
            population[c] *= 1.01;
        }
    }

    SynthData {
        panel_csv,
        macro_csv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_panel_csv, PanelSchema};

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec {
            locations: 6,
            activities: 20,
            year_min: 2000,
            year_max: 2005,
            seed: 42,
        };
        let a = generate(&spec);
        let b = generate(&spec);
        assert_eq!(a.panel_csv, b.panel_csv);
        assert_eq!(a.macro_csv, b.macro_csv);
        let different = generate(&SynthSpec { seed: 43, ..spec });
        assert_ne!(a.panel_csv, different.panel_csv);
    }

    #[test]
    fn generated_csvs_ingest_cleanly() {
        let spec = SynthSpec {
            locations: 8,
            activities: 30,
            year_min: 2000,
            year_max: 2008,
            seed: 1,
        };
        let data = generate(&spec);
        let dir = tempfile::tempdir().unwrap();
        let (panel_path, macro_path) = data.write(dir.path()).unwrap();
        let panel: crate::panel::OutputPanel<f64> =
            load_panel_csv(&panel_path, PanelSchema::Trade).unwrap();
        assert_eq!(panel.years(), Some((2000, 2008)));
        assert!(panel.location_index().len() == 8);
        let macros: crate::panel::MacroSeries<f64> =
            crate::ingest::load_macro_csv(&macro_path).unwrap();
        assert!(macros.get("C00", 2004).is_some());
    }
}
