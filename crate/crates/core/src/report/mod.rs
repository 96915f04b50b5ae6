//! Experiment grid and result output, plus the command line.

pub mod cli;
pub mod grid;
mod labels;
pub mod recommend;
pub mod table;

use thiserror::Error;

use crate::error::SimulationError;
use crate::estimators::Method;
use crate::montecarlo::{run_study_on, summarize, ReplicationRecord};

pub use grid::{family_labels, full_grid, grid_by_label, GridCell, GridSpec, FULL_GRID_CELLS};
pub use recommend::{recommend_method, Recommendation};
pub use table::{emit_table, parse_csv, ResultRow, TableFormat, CSV_HEADER};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse: {0}")]
    Parse(String),
}

/// Summary rows (ITT, PP, IV) for a finished study.
pub fn rows_for(cell: &GridCell, records: &[ReplicationRecord]) -> Vec<ResultRow> {
    Method::ALL
        .into_iter()
        .map(|method| {
            let exclude = cell.exclude_divergent && method == Method::InstrumentalVariables;
            match summarize(records, method, exclude) {
                Ok(s) => ResultRow::from_summary(&cell.config, &s),
                Err(_) => {
                    let n_div = if method == Method::InstrumentalVariables {
                        records.iter().filter(|r| r.iv_divergent()).count()
                    } else {
                        0
                    };
                    ResultRow::empty(&cell.config, method, n_div, exclude)
                }
            }
        })
        .collect()
}

/// Runs one cell. `threads = None` uses the global pool.
pub fn run_cell(cell: &GridCell, threads: Option<usize>) -> Result<Vec<ResultRow>, ReportError> {
    let records = match threads {
        Some(t) => run_study_on(&cell.config, t)?,
        None => crate::montecarlo::run_study(&cell.config)?,
    };
    Ok(rows_for(cell, &records))
}

pub fn run_grid(spec: &GridSpec, threads: Option<usize>) -> Result<Vec<ResultRow>, ReportError> {
    let run = || {
        let mut rows = Vec::with_capacity(spec.cells.len() * Method::ALL.len());
        for cell in &spec.cells {
            rows.extend(run_cell(cell, None)?);
        }
        Ok(rows)
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}
