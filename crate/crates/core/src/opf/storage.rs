use super::{Layout, OpfCons, OpfError, OpfVars, StorageVars};
use crate::expr::field;
use crate::matpower::CaseData;
use crate::model::{ModelCore, ROW_FIELD};
use crate::table::DataTable;

/// Adds storage devices to a multi-period model over `periods` periods.
///
/// Per device `c` and period `k`, with `E0 = E♯/2` and unit period length:
/// `ps = pd − pc`, `ec_0 = E0 + η_c·pc_0 − pd_0/η_d`,
/// `ec_k − ec_{k−1} = η_c·pc_k − pd_k/η_d`, `ps² + qs² ≤ S²` with
/// `S = max(charge rating, discharge rating)`, and `pc·pd = 0` unless
/// `relax_complementarity`. `ps` and `qs` are added into the balance rows.
pub fn add_storage(
    core: &mut ModelCore,
    case: &CaseData,
    periods: usize,
    vars: &mut OpfVars,
    cons: &mut OpfCons,
    relax_complementarity: bool,
) -> Result<(), OpfError> {
    let n = case.storage.len();
    if n == 0 {
        return Ok(());
    }
    for (device, s) in case.storage.iter().enumerate() {
        let fail = |message: &str| Err(OpfError::Storage { device, message: message.to_string() });
        if !(s.charge_efficiency > 0.0 && s.discharge_efficiency > 0.0) {
            return fail("efficiencies must be positive");
        }
        if !(s.energy_rating > 0.0) {
            return fail("energy rating must be positive");
        }
        if s.charge_rating < 0.0 || s.discharge_rating < 0.0 {
            return fail("ratings must be nonnegative");
        }
    }
    let (active, reactive) = match (cons.c_active_power_balance, cons.c_reactive_power_balance) {
        (Some(a), Some(r)) => (a, r),
        _ => return Err(OpfError::Storage { device: 0, message: "power balance rows are missing".into() }),
    };
    let layout = Layout { periods, multi: true };
    let shape = layout.shape(n);
    let recs: Vec<(usize, usize)> = layout.records(n).collect();
    let per = |f: &dyn Fn(usize) -> f64| recs.iter().map(|&(c, _)| f(c)).collect::<Vec<f64>>();
    let st = &case.storage;
    let rating = |c: usize| st[c].charge_rating.max(st[c].discharge_rating);

    let pc = core.add_variable(shape, 0.0, per(&|c| st[c].charge_rating), 0.0)?;
    let pd = core.add_variable(shape, 0.0, per(&|c| st[c].discharge_rating), 0.0)?;
    let ec = core.add_variable(shape, 0.0, per(&|c| st[c].energy_rating), per(&|c| 0.5 * st[c].energy_rating))?;
    let neg = per(&|c| -rating(c));
    let ps = core.add_variable(shape, neg.clone(), per(&|c| rating(c)), 0.0)?;
    let qs = core.add_variable(shape, neg, per(&|c| rating(c)), 0.0)?;

    let idx: Vec<usize> = recs.iter().map(|&(c, t)| layout.idx(c, t)).collect();
    let table = DataTable::new(recs.len())
        .with_index("k", idx.clone())?
        .with_real("eta_c", per(&|c| st[c].charge_efficiency))?
        .with_real("eta_d", per(&|c| st[c].discharge_efficiency))?
        .with_real("s2", per(&|c| rating(c).powi(2)))?;

    let injection = core.add_constraint(&(ps.at("k") - (pd.at("k") - pc.at("k"))), table.clone(), 0.0, 0.0)?;

    let energy_kernel = ec.at("k") - (field("eta_c") * pc.at("k") - pd.at("k") / field("eta_d"));
    let e0: Vec<f64> = recs.iter().map(|&(c, t)| if t == 0 { 0.5 * st[c].energy_rating } else { 0.0 }).collect();
    let energy = core.add_constraint(&energy_kernel, table.clone(), e0.clone(), e0)?;
    let carried: Vec<(usize, usize)> = recs.iter().copied().filter(|&(_, t)| t > 0).collect();
    if !carried.is_empty() {
        let prev = DataTable::new(carried.len())
            .with_index("k", carried.iter().map(|&(c, t)| layout.idx(c, t - 1)).collect())?
            .with_index(ROW_FIELD, carried.iter().map(|&(c, t)| energy.row(layout.idx(c, t))).collect())?;
        core.modify_constraint(&energy, &(-ec.at("k")), prev)?;
    }

    let thermal =
        core.add_constraint(&(ps.at("k").powi(2) + qs.at("k").powi(2) - field("s2")), table.clone(), f64::NEG_INFINITY, 0.0)?;
    if !relax_complementarity {
        cons.c_storage_complementarity = Some(core.add_constraint(&(pc.at("k") * pd.at("k")), table, 0.0, 0.0)?);
    }

    let bus: Vec<usize> = st.iter().map(|s| case.bus_position(s.bus).expect("validated storage bus")).collect();
    let aug = |rows: &crate::model::ConstraintBlock| {
        DataTable::new(recs.len()).with_index("k", idx.clone())?.with_index(
            ROW_FIELD,
            recs.iter().map(|&(c, t)| rows.row(layout.idx(bus[c], t))).collect(),
        )
    };
    core.modify_constraint(&active, &ps.at("k"), aug(&active)?)?;
    core.modify_constraint(&reactive, &qs.at("k"), aug(&reactive)?)?;

    cons.c_storage_injection = Some(injection);
    cons.c_storage_energy = Some(energy);
    cons.c_storage_thermal = Some(thermal);
    vars.storage = Some(StorageVars { pc, pd, ec, ps, qs });
    Ok(())
}
