//! CSV output for single solves and rate tables.

use std::path::Path;

use hho_core::convergence::RateTable;
use hho_core::manufactured::ExactSolution;
use hho_core::post::Field;
use hho_core::Mesh;

use crate::config::{BcName, VariantName};
use crate::error::{HhoError, Result};

pub const RATES_HEADER: [&str; 9] = [
    "level",
    "h_max",
    "dofs",
    "err_h2_rel",
    "err_l2_rel",
    "slope_h2",
    "slope_l2",
    "assembly_s",
    "solve_s",
];

pub const SOLUTION_HEADER: [&str; 5] = ["cell", "x", "y", "u_h", "u"];

/// Shortest round-trip scientific notation.
pub fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

pub fn rates_file_name(variant: VariantName, k: usize, bc: BcName) -> String {
    let bc = match bc {
        BcName::Strong => "strong",
        BcName::Nitsche => "nitsche",
    };
    format!("rates_{variant:?}_k{k}_{bc}.csv")
}

fn create(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HhoError::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| HhoError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// One row per level; slope columns hold the slope against the previous
/// level and are empty on the first.
pub fn write_rates(path: &Path, table: &RateTable) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(RATES_HEADER)?;
    for (i, (r, s)) in table.reports.iter().zip(table.level_slopes()).enumerate() {
        let (s2, s0) = s.map_or((String::new(), String::new()), |(a, b)| (fmt_f(a), fmt_f(b)));
        w.write_record([
            i.to_string(),
            fmt_f(r.h_max),
            r.dofs.to_string(),
            fmt_f(r.err_h2_rel),
            fmt_f(r.err_l2_rel),
            s2,
            s0,
            fmt_f(r.assembly_s),
            fmt_f(r.solve_s),
        ])?;
    }
    w.flush().map_err(|e| HhoError::io(path, e))?;
    Ok(())
}

/// Discrete and exact solution at each cell centroid.
pub fn write_solution(path: &Path, mesh: &Mesh, field: &Field, u: &dyn ExactSolution) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SOLUTION_HEADER)?;
    for (c, cell) in mesh.cells.iter().enumerate() {
        let p = cell.centroid;
        w.write_record([
            c.to_string(),
            fmt_f(p.x),
            fmt_f(p.y),
            fmt_f(field.eval(mesh, c, p)),
            fmt_f(u.value(p)),
        ])?;
    }
    w.flush().map_err(|e| HhoError::io(path, e))?;
    Ok(())
}

/// Fixed-width text table for the terminal.
pub fn format_table(table: &RateTable) -> String {
    let mut s = format!(
        "{:>5} {:>10} {:>8} {:>11} {:>11} {:>7} {:>7}\n",
        "level", "h_max", "dofs", "err_h2_rel", "err_l2_rel", "rate_h2", "rate_l2"
    );
    for (i, (r, sl)) in table.reports.iter().zip(table.level_slopes()).enumerate() {
        let (a, b) = sl.map_or(("-".to_string(), "-".to_string()), |(a, b)| (format!("{a:.2}"), format!("{b:.2}")));
        s += &format!(
            "{:>5} {:>10.4e} {:>8} {:>11.4e} {:>11.4e} {:>7} {:>7}\n",
            i, r.h_max, r.dofs, r.err_h2_rel, r.err_l2_rel, a, b
        );
    }
    if let Some(f) = table.slopes() {
        s += &format!(
            "fitted over finest levels: h2 {:.3} (dofs {:.3}), l2 {:.3} (dofs {:.3})\n",
            f.h2_vs_h, f.h2_vs_dofs, f.l2_vs_h, f.l2_vs_dofs
        );
    }
    s
}
