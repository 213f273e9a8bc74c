//! The chained Luksan–Vlcek test problem.

use crate::expr::Expr;
use crate::model::{ModelCore, ModelError};
use crate::table::DataTable;

/// Builds the `N`-variable instance. Variables start at -1.2 on odd
/// (1-based) positions and 1.0 elsewhere; all `N - 2` rows are equalities.
pub fn luksan_vlcek(n: usize) -> Result<ModelCore, ModelError> {
    if n < 3 {
        return Err(ModelError::Other(format!("Luksan-Vlcek needs at least 3 variables, got {n}")));
    }
    let mut core = ModelCore::new();
    let start: Vec<f64> = (1..=n).map(|i| if i % 2 == 1 { -1.2 } else { 1.0 }).collect();
    let x = core.add_variable(n, f64::NEG_INFINITY, f64::INFINITY, start)?;

    let rows = DataTable::new(n - 2)
        .with_index("a", (0..n - 2).collect())?
        .with_index("b", (1..n - 1).collect())?
        .with_index("c", (2..n).collect())?;
    let (a, b, c): (Expr, Expr, Expr) = (x.at("a"), x.at("b"), x.at("c"));
    let g = 3.0 * b.clone().powi(3) + 2.0 * c.clone() - 5.0
        + (b.clone() - c.clone()).sin() * (b.clone() + c.clone()).sin()
        + 4.0 * b.clone()
        - a.clone() * (a - b).exp()
        - 3.0;
    core.add_constraint(&g, rows, 0.0, 0.0)?;

    let terms = DataTable::new(n - 1).with_index("p", (0..n - 1).collect())?.with_index("q", (1..n).collect())?;
    let (p, q) = (x.at("p"), x.at("q"));
    let f = 100.0 * (p.clone().powi(2) - q).powi(2) + (p - 1.0).powi(2);
    core.add_objective(&f, terms)?;
    Ok(core)
}
