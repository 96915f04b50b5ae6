//! The built-in experiment grid.
//!
//! The grid crosses three base designs with severity and threshold:
//!
//! | base design                          | delta 0.5, Case I | delta 1, Case I | delta 0.5, II-IV | delta 1, II-IV |
//! |--------------------------------------|------------------:|----------------:|-----------------:|---------------:|
//! | effect -5, main proportions          | `main` 24         | `sens-mild` 20  | `sens-thresholds` 42 | `sens-mild-thresholds` 36 |
//! | effect 0, main proportions           | `sens-effect` 24  | `sens-effect-mild` 20 | `sens-effect-thresholds` 42 | `sens-effect-mild-thresholds` 36 |
//! | effect -5, larger non-complier share | `sens-props` 24   | `sens-props-mild` 20 | `sens-props-thresholds` 42 | `sens-props-mild-thresholds` 36 |
//!
//! Within a family the cells are: binary never-and-always-takers (random,
//! A-F), binary never-takers only (random, A, B), partial
//! never-and-always-takers (random, A-H) and partial never-takers only
//! (random, A, B, G, H). Random non-compliance does not depend on delta, so
//! the delta = 1 families carry only the non-random scenarios, and threshold
//! cases II-IV apply to partial compliance only. That gives 122 cells per
//! base design.
//!
//! Two more cells, `secondary-divergence`, re-analyse the main partial
//! never-and-always-taker scenarios G and H with divergent IV replications
//! excluded. Total: 3 x 122 + 2 = 368.

use crate::dgm::{NonComplierTypes, TrialConfig};
use crate::outcomes::{ComplianceMode, ThresholdCase};
use crate::scenarios::Scenario;

pub const FULL_GRID_CELLS: usize = 368;

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub family: String,
    pub config: TrialConfig,
    pub exclude_divergent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub label: String,
    pub cells: Vec<GridCell>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BaseDesign {
    effect: f64,
    sensitivity_props: bool,
}

const BASE_DESIGNS: [BaseDesign; 3] = [
    BaseDesign { effect: -5.0, sensitivity_props: false },
    BaseDesign { effect: 0.0, sensitivity_props: false },
    BaseDesign { effect: -5.0, sensitivity_props: true },
];

const DESIGN_CELLS: [(ComplianceMode, NonComplierTypes); 4] = [
    (ComplianceMode::Binary, NonComplierTypes::NeverAndAlwaysTakers),
    (ComplianceMode::Binary, NonComplierTypes::NeverTakersOnly),
    (ComplianceMode::Partial, NonComplierTypes::NeverAndAlwaysTakers),
    (ComplianceMode::Partial, NonComplierTypes::NeverTakersOnly),
];

fn family_label(base: BaseDesign, mild: bool, thresholds: bool) -> String {
    let mut parts = Vec::new();
    if base.effect == 0.0 {
        parts.push("effect");
    }
    if base.sensitivity_props {
        parts.push("props");
    }
    if mild {
        parts.push("mild");
    }
    if thresholds {
        parts.push("thresholds");
    }
    if parts.is_empty() {
        "main".to_string()
    } else {
        format!("sens-{}", parts.join("-"))
    }
}

fn family_cells(base: BaseDesign, mild: bool, thresholds: bool, template: &TrialConfig) -> Vec<GridCell> {
    let label = family_label(base, mild, thresholds);
    let cases: &[ThresholdCase] = if thresholds {
        &[ThresholdCase::II, ThresholdCase::III, ThresholdCase::IV]
    } else {
        &[ThresholdCase::I]
    };
    let mut cells = Vec::new();
    for &case in cases {
        for (compliance, noncompliers) in DESIGN_CELLS {
            if case != ThresholdCase::I && compliance == ComplianceMode::Binary {
                continue;
            }
            for scenario in Scenario::applicable(compliance, noncompliers) {
                if mild && scenario.is_random() {
                    continue;
                }
                let mut config = TrialConfig::design(compliance, noncompliers, scenario);
                if base.sensitivity_props {
                    config = config.with_sensitivity_proportions();
                }
                config.effect = base.effect;
                config.delta = if mild { 1.0 } else { 0.5 };
                config.threshold = case;
                config.reps = template.reps;
                config.master_seed = template.master_seed;
                config.divergence = template.divergence;
                config.n = template.n;
                cells.push(GridCell {
                    family: label.clone(),
                    config,
                    exclude_divergent: false,
                });
            }
        }
    }
    cells
}

/// Every cell of the built-in grid, with replications, seed, cohort size and
/// divergence criterion taken from `template`.
pub fn full_grid(template: &TrialConfig) -> GridSpec {
    let mut cells = Vec::with_capacity(FULL_GRID_CELLS);
    for base in BASE_DESIGNS {
        for mild in [false, true] {
            for thresholds in [false, true] {
                cells.extend(family_cells(base, mild, thresholds, template));
            }
        }
    }
    let secondary: Vec<GridCell> = cells
        .iter()
        .filter(|c| {
            c.family == "main"
                && c.config.compliance == ComplianceMode::Partial
                && c.config.noncompliers == NonComplierTypes::NeverAndAlwaysTakers
                && matches!(c.config.scenario, Scenario::G | Scenario::H)
        })
        .map(|c| GridCell {
            family: "secondary-divergence".to_string(),
            config: c.config.clone(),
            exclude_divergent: true,
        })
        .collect();
    cells.extend(secondary);
    GridSpec {
        label: "all".to_string(),
        cells,
    }
}

/// Family labels in grid order.
pub fn family_labels() -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for cell in full_grid(&TrialConfig::default()).cells {
        if !labels.contains(&cell.family) {
            labels.push(cell.family);
        }
    }
    labels
}

fn design_suffix(compliance: ComplianceMode, noncompliers: NonComplierTypes) -> &'static str {
    match (noncompliers, compliance) {
        (NonComplierTypes::NeverAndAlwaysTakers, ComplianceMode::Binary) => "nt_at-binary",
        (NonComplierTypes::NeverAndAlwaysTakers, ComplianceMode::Partial) => "nt_at-partial",
        (NonComplierTypes::NeverTakersOnly, ComplianceMode::Binary) => "nt-binary",
        (NonComplierTypes::NeverTakersOnly, ComplianceMode::Partial) => "nt-partial",
    }
}

/// The full grid (`all`), one family of it, or one design cell of a family
/// such as `main-nt_at-binary`.
pub fn grid_by_label(label: &str, template: &TrialConfig) -> Option<GridSpec> {
    let full = full_grid(template);
    if label == "all" {
        return Some(full);
    }
    let cells: Vec<GridCell> = full
        .cells
        .into_iter()
        .filter(|c| {
            c.family == label
                || label
                    .strip_prefix(c.family.as_str())
                    .and_then(|rest| rest.strip_prefix('-'))
                    .is_some_and(|rest| rest == design_suffix(c.config.compliance, c.config.noncompliers))
        })
        .collect();
    (!cells.is_empty()).then(|| GridSpec {
        label: label.to_string(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(label: &str) -> usize {
        grid_by_label(label, &TrialConfig::default()).map_or(0, |g| g.cells.len())
    }

    #[test]
    fn full_grid_has_368_cells() {
        assert_eq!(full_grid(&TrialConfig::default()).cells.len(), FULL_GRID_CELLS);
    }

    #[test]
    fn family_counts() {
        for prefix in ["main", "sens-effect", "sens-props"] {
            let mild = if prefix == "main" { "sens-mild".to_string() } else { format!("{prefix}-mild") };
            let thr = if prefix == "main" { "sens-thresholds".to_string() } else { format!("{prefix}-thresholds") };
            let mild_thr = if prefix == "main" {
                "sens-mild-thresholds".to_string()
            } else {
                format!("{prefix}-mild-thresholds")
            };
            assert_eq!(count(prefix), 24, "{prefix}");
            assert_eq!(count(&mild), 20, "{mild}");
            assert_eq!(count(&thr), 42, "{thr}");
            assert_eq!(count(&mild_thr), 36, "{mild_thr}");
        }
        assert_eq!(count("secondary-divergence"), 2);
        assert_eq!(family_labels().len(), 13);
        assert_eq!(count("nope"), 0);
        assert_eq!(count("main-nt_at-binary"), 7);
        assert_eq!(count("main-nt_at-partial"), 9);
        assert_eq!(count("sens-mild-nt-partial"), 4);
        assert_eq!(count("sens-thresholds-nt-binary"), 0);
    }

    #[test]
    fn every_cell_is_valid() {
        for cell in full_grid(&TrialConfig::default()).cells {
            cell.config.validate().unwrap();
        }
    }

    #[test]
    fn cells_are_distinct_analyses() {
        let cells = full_grid(&TrialConfig::default()).cells;
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                assert!(a.config != b.config || a.exclude_divergent != b.exclude_divergent);
            }
        }
    }

    #[test]
    fn main_family_design_counts() {
        let main = grid_by_label("main", &TrialConfig::default()).unwrap();
        let tally = |c: ComplianceMode, n: NonComplierTypes| {
            main.cells
                .iter()
                .filter(|cell| cell.config.compliance == c && cell.config.noncompliers == n)
                .count()
        };
        assert_eq!(tally(ComplianceMode::Binary, NonComplierTypes::NeverAndAlwaysTakers), 7);
        assert_eq!(tally(ComplianceMode::Partial, NonComplierTypes::NeverAndAlwaysTakers), 9);
        assert_eq!(tally(ComplianceMode::Binary, NonComplierTypes::NeverTakersOnly), 3);
        assert_eq!(tally(ComplianceMode::Partial, NonComplierTypes::NeverTakersOnly), 5);
    }
}
