//! AC optimal power flow models.
//!
//! Static models use vector-shaped blocks; multi-period models use
//! `(elements, periods)` grids, so element `i` at period `t` is local index
//! `i * T + t` in every block and every per-bus or per-branch row block.
//!
//! Branch flows are lifted into variables `p`, `q` with one entry per arc:
//! arc `l` is the from side of branch `l` and arc `nl + l` its to side.

mod storage;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use storage::add_storage;

use crate::expr::{field, Expr};
use crate::matpower::{branch_admittance, validate_case, BusType, CaseData, LoadSeries, MatpowerError};
use crate::model::{CompiledModel, ConstraintBlock, ModelCore, ModelError, Shape, VariableBlock, ROW_FIELD};
use crate::table::DataTable;

/// Angle-difference limits at or beyond this magnitude are replaced by
/// [`ANGLE_LIMIT_DEFAULT`].
pub const ANGLE_LIMIT_CUTOFF: f64 = FRAC_PI_2;
pub const ANGLE_LIMIT_DEFAULT: f64 = std::f64::consts::FRAC_PI_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Form {
    Polar,
    Rect,
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Polar => "polar",
            Form::Rect => "rect",
        })
    }
}

impl FromStr for Form {
    type Err = OpfError;
    fn from_str(s: &str) -> Result<Self, OpfError> {
        match s {
            "polar" => Ok(Form::Polar),
            "rect" | "rectangular" => Ok(Form::Rect),
            other => Err(OpfError::UnknownForm(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error(transparent)]
    Case(#[from] MatpowerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown formulation `{0}` (expected polar or rect)")]
    UnknownForm(String),
    #[error("load curve is empty")]
    EmptyCurve,
    #[error("corrective action ratio {0} outside [0, 1]")]
    BadRatio(f64),
    #[error("load series mismatch: {0}")]
    SeriesMismatch(String),
    #[error("storage device {device}: {message}")]
    Storage { device: usize, message: String },
}

/// Storage decision blocks, one row per device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageVars {
    pub pc: VariableBlock,
    pub pd: VariableBlock,
    pub ec: VariableBlock,
    pub ps: VariableBlock,
    pub qs: VariableBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpfVars {
    pub va: Option<VariableBlock>,
    pub vm: Option<VariableBlock>,
    pub vr: Option<VariableBlock>,
    pub vi: Option<VariableBlock>,
    pub pg: VariableBlock,
    pub qg: VariableBlock,
    pub p: VariableBlock,
    pub q: VariableBlock,
    pub storage: Option<StorageVars>,
    /// Blocks registered by a user callback.
    pub extra: BTreeMap<String, VariableBlock>,
}

impl OpfVars {
    /// Named blocks in registration order.
    pub fn named(&self) -> Vec<(String, VariableBlock)> {
        let mut out: Vec<(String, VariableBlock)> = Vec::new();
        let mut push = |n: &str, b: Option<VariableBlock>| {
            if let Some(b) = b {
                out.push((n.to_string(), b));
            }
        };
        push("va", self.va);
        push("vm", self.vm);
        push("vr", self.vr);
        push("vi", self.vi);
        push("pg", Some(self.pg));
        push("qg", Some(self.qg));
        push("p", Some(self.p));
        push("q", Some(self.q));
        if let Some(s) = self.storage {
            push("pc", Some(s.pc));
            push("pd", Some(s.pd));
            push("ec", Some(s.ec));
            push("ps", Some(s.ps));
            push("qs", Some(s.qs));
        }
        for (n, b) in &self.extra {
            out.push((n.clone(), *b));
        }
        out.sort_by_key(|(_, b)| b.offset());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpfCons {
    pub c_ref_angle: Option<ConstraintBlock>,
    pub c_from_active_power_flow: Option<ConstraintBlock>,
    pub c_from_reactive_power_flow: Option<ConstraintBlock>,
    pub c_to_active_power_flow: Option<ConstraintBlock>,
    pub c_to_reactive_power_flow: Option<ConstraintBlock>,
    pub c_angle_diff: Option<ConstraintBlock>,
    pub c_active_power_balance: Option<ConstraintBlock>,
    pub c_reactive_power_balance: Option<ConstraintBlock>,
    pub c_thermal_from: Option<ConstraintBlock>,
    pub c_thermal_to: Option<ConstraintBlock>,
    pub c_voltage_magnitude: Option<ConstraintBlock>,
    pub c_ramp: Option<ConstraintBlock>,
    pub c_storage_injection: Option<ConstraintBlock>,
    pub c_storage_energy: Option<ConstraintBlock>,
    pub c_storage_thermal: Option<ConstraintBlock>,
    pub c_storage_complementarity: Option<ConstraintBlock>,
    /// Blocks registered by a user callback.
    pub extra: BTreeMap<String, ConstraintBlock>,
}

impl OpfCons {
    /// Named blocks in registration order.
    pub fn named(&self) -> Vec<(String, ConstraintBlock)> {
        let fixed = [
            ("c_ref_angle", self.c_ref_angle),
            ("c_from_active_power_flow", self.c_from_active_power_flow),
            ("c_from_reactive_power_flow", self.c_from_reactive_power_flow),
            ("c_to_active_power_flow", self.c_to_active_power_flow),
            ("c_to_reactive_power_flow", self.c_to_reactive_power_flow),
            ("c_angle_diff", self.c_angle_diff),
            ("c_active_power_balance", self.c_active_power_balance),
            ("c_reactive_power_balance", self.c_reactive_power_balance),
            ("c_thermal_from", self.c_thermal_from),
            ("c_thermal_to", self.c_thermal_to),
            ("c_voltage_magnitude", self.c_voltage_magnitude),
            ("c_ramp", self.c_ramp),
            ("c_storage_injection", self.c_storage_injection),
            ("c_storage_energy", self.c_storage_energy),
            ("c_storage_thermal", self.c_storage_thermal),
            ("c_storage_complementarity", self.c_storage_complementarity),
        ];
        let mut out: Vec<(String, ConstraintBlock)> =
            fixed.into_iter().filter_map(|(n, b)| b.map(|b| (n.to_string(), b))).collect();
        out.extend(self.extra.iter().map(|(n, b)| (n.clone(), *b)));
        out.sort_by_key(|(_, b)| b.offset());
        out
    }
}

/// User extension hook, run after the base model is registered.
pub type UserCallback<'a> = &'a mut dyn FnMut(&mut ModelCore, &mut OpfVars, &mut OpfCons) -> Result<(), ModelError>;

/// A built OPF model with its named references.
#[derive(Debug, Clone)]
pub struct OpfModel {
    pub model: CompiledModel,
    pub vars: OpfVars,
    pub cons: OpfCons,
    pub form: Form,
    pub periods: usize,
    /// The active (status 1) case the model was built from.
    pub case: CaseData,
}

/// Element-to-local-index layout for `T` periods.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub(crate) periods: usize,
    multi: bool,
}

impl Layout {
    pub(crate) fn shape(&self, n: usize) -> Shape {
        if self.multi {
            Shape::Grid(n, self.periods)
        } else {
            Shape::Vector(n)
        }
    }

    pub(crate) fn idx(&self, i: usize, t: usize) -> usize {
        i * self.periods + t
    }

    /// `(element, period)` pairs in local-index order.
    pub(crate) fn records(&self, n: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..n).flat_map(move |i| (0..self.periods).map(move |t| (i, t)))
    }
}

/// The active case plus 0-based element positions.
struct Network {
    case: CaseData,
    gen_bus: Vec<usize>,
    from: Vec<usize>,
    to: Vec<usize>,
    reference: usize,
}

fn prepare(case: &CaseData) -> Result<Network, OpfError> {
    validate_case(case).map_err(MatpowerError::Validation)?;
    let case = case.active();
    let pos = |id: i64| case.bus_position(id).expect("validated reference");
    let gen_bus = case.gens.iter().map(|g| pos(g.bus)).collect();
    let from = case.branches.iter().map(|b| pos(b.from)).collect();
    let to = case.branches.iter().map(|b| pos(b.to)).collect();
    let reference = case.buses.iter().position(|b| b.kind == BusType::Reference).expect("validated reference bus");
    Ok(Network { case, gen_bus, from, to, reference })
}

fn angle_limits(angmin: f64, angmax: f64) -> (f64, f64) {
    let lo = if angmin <= -ANGLE_LIMIT_CUTOFF { -ANGLE_LIMIT_DEFAULT } else { angmin };
    let hi = if angmax >= ANGLE_LIMIT_CUTOFF { ANGLE_LIMIT_DEFAULT } else { angmax };
    (lo, hi)
}

/// Per-period bus loads `(pd, qd)`, per-unit.
type Loads = Vec<(Vec<f64>, Vec<f64>)>;

/// Voltage-dependent expressions of one form.
struct Voltages {
    form: Form,
    a: VariableBlock,
    b: VariableBlock,
}

impl Voltages {
    /// `|V_i|²` at index field `i`.
    fn magnitude_sq(&self, i: &str) -> Expr {
        match self.form {
            Form::Polar => self.b.at(i).powi(2),
            Form::Rect => self.a.at(i).powi(2) + self.b.at(i).powi(2),
        }
    }

    /// `(|V_f||V_t| cos Δ, |V_f||V_t| sin Δ)` with `Δ = θ_f − θ_t`.
    fn products(&self, f: &str, t: &str) -> (Expr, Expr) {
        match self.form {
            Form::Polar => {
                let (va, vm) = (&self.a, &self.b);
                let d = va.at(f) - va.at(t);
                let m = vm.at(f) * vm.at(t);
                (m.clone() * d.clone().cos(), m * d.sin())
            }
            Form::Rect => {
                let (vr, vi) = (&self.a, &self.b);
                (vr.at(f) * vr.at(t) + vi.at(f) * vi.at(t), vi.at(f) * vr.at(t) - vr.at(f) * vi.at(t))
            }
        }
    }
}

fn build(
    network: Network,
    form: Form,
    loads: Loads,
    multi: bool,
    ratio: Option<f64>,
    relax_complementarity: bool,
    callback: Option<UserCallback<'_>>,
) -> Result<OpfModel, OpfError> {
    let layout = Layout { periods: loads.len(), multi };
    let case = &network.case;
    let (nb, ng, nl) = (case.buses.len(), case.gens.len(), case.branches.len());
    let t_count = layout.periods;
    let rep = |v: Vec<f64>| -> Vec<f64> { v.into_iter().flat_map(|x| std::iter::repeat(x).take(t_count)).collect() };
    let mut core = ModelCore::new();

    let vmax = rep(case.buses.iter().map(|b| b.vmax).collect());
    let vmin = rep(case.buses.iter().map(|b| b.vmin).collect());
    let (va, vm, vr, vi, voltages) = match form {
        Form::Polar => {
            let va = core.add_variable(layout.shape(nb), f64::NEG_INFINITY, f64::INFINITY, 0.0)?;
            let vm = core.add_variable(layout.shape(nb), vmin.clone(), vmax.clone(), 1.0)?;
            (Some(va), Some(vm), None, None, Voltages { form, a: va, b: vm })
        }
        Form::Rect => {
            let neg: Vec<f64> = vmax.iter().map(|v| -v).collect();
            let mut vr_lower = neg.clone();
            for t in 0..t_count {
                vr_lower[layout.idx(network.reference, t)] = 0.0;
            }
            let vr = core.add_variable(layout.shape(nb), vr_lower, vmax.clone(), 1.0)?;
            let vi = core.add_variable(layout.shape(nb), neg, vmax.clone(), 0.0)?;
            (None, None, Some(vr), Some(vi), Voltages { form, a: vr, b: vi })
        }
    };
    let gen = |f: fn(&crate::matpower::Gen) -> f64| rep(case.gens.iter().map(f).collect());
    let (pmin, pmax, qmin, qmax) = (gen(|g| g.pmin), gen(|g| g.pmax), gen(|g| g.qmin), gen(|g| g.qmax));
    let mid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(l, u)| 0.5 * (l + u)).collect::<Vec<f64>>();
    let pg = core.add_variable(layout.shape(ng), pmin.clone(), pmax.clone(), mid(&pmin, &pmax))?;
    let qg = core.add_variable(layout.shape(ng), qmin.clone(), qmax.clone(), mid(&qmin, &qmax))?;
    let p = core.add_free_variable(layout.shape(2 * nl))?;
    let q = core.add_free_variable(layout.shape(2 * nl))?;

    let mut cons = OpfCons::default();

    // objective in MW cost units
    let base = case.base_mva;
    let recs: Vec<(usize, usize)> = layout.records(ng).collect();
    let obj = DataTable::new(recs.len())
        .with_index("g", recs.iter().map(|&(i, t)| layout.idx(i, t)).collect())?
        .with_real("c2", recs.iter().map(|&(i, _)| case.gens[i].cost[0] * base * base).collect())?
        .with_real("c1", recs.iter().map(|&(i, _)| case.gens[i].cost[1] * base).collect())?
        .with_real("c0", recs.iter().map(|&(i, _)| case.gens[i].cost[2]).collect())?;
    core.add_objective(&(field("c2") * pg.at("g").powi(2) + field("c1") * pg.at("g") + field("c0")), obj)?;

    let rt = DataTable::new(t_count).with_index("i", (0..t_count).map(|t| layout.idx(network.reference, t)).collect())?;
    let ref_kernel = match form {
        Form::Polar => va.unwrap().at("i"),
        Form::Rect => vi.unwrap().at("i"),
    };
    cons.c_ref_angle = Some(core.add_constraint(&ref_kernel, rt, 0.0, 0.0)?);

    // branch flow definitions
    let brecs: Vec<(usize, usize)> = layout.records(nl).collect();
    let adm = case
        .branches
        .iter()
        .enumerate()
        .map(|(l, b)| {
            branch_admittance(b).map_err(|_| OpfError::Case(MatpowerError::DegenerateBranch(l)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let coef = |f: &dyn Fn(&crate::matpower::BranchAdmittance) -> f64| brecs.iter().map(|&(l, _)| f(&adm[l])).collect::<Vec<f64>>();
    let flow_table = DataTable::new(brecs.len())
        .with_index("f", brecs.iter().map(|&(l, t)| layout.idx(network.from[l], t)).collect())?
        .with_index("t", brecs.iter().map(|&(l, t)| layout.idx(network.to[l], t)).collect())?
        .with_index("af", brecs.iter().map(|&(l, t)| layout.idx(l, t)).collect())?
        .with_index("at", brecs.iter().map(|&(l, t)| layout.idx(nl + l, t)).collect())?
        .with_real("c1", coef(&|a| (a.g + a.g_fr) / a.tm))?
        .with_real("c2", coef(&|a| (-a.g * a.tr + a.b * a.ti) / a.tm))?
        .with_real("c3", coef(&|a| (-a.b * a.tr - a.g * a.ti) / a.tm))?
        .with_real("c4", coef(&|a| -(a.b + a.b_fr) / a.tm))?
        .with_real("c5", coef(&|a| a.g + a.g_to))?
        .with_real("c6", coef(&|a| (-a.g * a.tr - a.b * a.ti) / a.tm))?
        .with_real("c7", coef(&|a| (-a.b * a.tr + a.g * a.ti) / a.tm))?
        .with_real("c8", coef(&|a| -(a.b + a.b_to)))?;
    let (wr, wi) = voltages.products("f", "t");
    let (vf2, vt2) = (voltages.magnitude_sq("f"), voltages.magnitude_sq("t"));
    let c = |n: &str| field(n);
    // cos(−Δ) = cos Δ and sin(−Δ) = −sin Δ on the to side
    let p_fr = c("c1") * vf2.clone() + c("c2") * wr.clone() + c("c3") * wi.clone();
    let q_fr = c("c4") * vf2 - c("c3") * wr.clone() + c("c2") * wi.clone();
    let p_to = c("c5") * vt2.clone() + c("c6") * wr.clone() - c("c7") * wi.clone();
    let q_to = c("c8") * vt2 - c("c7") * wr.clone() - c("c6") * wi.clone();
    cons.c_from_active_power_flow = Some(core.add_constraint(&(p.at("af") - p_fr), flow_table.clone(), 0.0, 0.0)?);
    cons.c_from_reactive_power_flow = Some(core.add_constraint(&(q.at("af") - q_fr), flow_table.clone(), 0.0, 0.0)?);
    cons.c_to_active_power_flow = Some(core.add_constraint(&(p.at("at") - p_to), flow_table.clone(), 0.0, 0.0)?);
    cons.c_to_reactive_power_flow = Some(core.add_constraint(&(q.at("at") - q_to), flow_table.clone(), 0.0, 0.0)?);

    let limits: Vec<(f64, f64)> = case.branches.iter().map(|b| angle_limits(b.angmin, b.angmax)).collect();
    cons.c_angle_diff = Some(match form {
        Form::Polar => {
            let lo = brecs.iter().map(|&(l, _)| limits[l].0).collect::<Vec<f64>>();
            let hi = brecs.iter().map(|&(l, _)| limits[l].1).collect::<Vec<f64>>();
            let va = va.unwrap();
            core.add_constraint(&(va.at("f") - va.at("t")), flow_table.clone(), lo, hi)?
        }
        Form::Rect => {
            // record 2k: wi − tan(angmax)·wr ≤ 0; record 2k+1: wi − tan(angmin)·wr ≥ 0
            let n = brecs.len();
            let pick = |v: &[usize]| -> Vec<usize> { (0..2 * n).map(|k| v[k / 2]).collect() };
            let f_idx: Vec<usize> = brecs.iter().map(|&(l, t)| layout.idx(network.from[l], t)).collect();
            let t_idx: Vec<usize> = brecs.iter().map(|&(l, t)| layout.idx(network.to[l], t)).collect();
            let tan: Vec<f64> = (0..2 * n)
                .map(|k| {
                    let (lo, hi) = limits[brecs[k / 2].0];
                    if k % 2 == 0 { hi.tan() } else { lo.tan() }
                })
                .collect();
            let table = DataTable::new(2 * n)
                .with_index("f", pick(&f_idx))?
                .with_index("t", pick(&t_idx))?
                .with_real("tan", tan)?;
            let lo: Vec<f64> = (0..2 * n).map(|k| if k % 2 == 0 { f64::NEG_INFINITY } else { 0.0 }).collect();
            let hi: Vec<f64> = (0..2 * n).map(|k| if k % 2 == 0 { 0.0 } else { f64::INFINITY }).collect();
            core.add_constraint(&(wi.clone() - field("tan") * wr.clone()), table, lo, hi)?
        }
    });

    // power balance: base rows carry loads and shunts
    let busrecs: Vec<(usize, usize)> = layout.records(nb).collect();
    let bus_table = DataTable::new(busrecs.len())
        .with_index("i", busrecs.iter().map(|&(i, t)| layout.idx(i, t)).collect())?
        .with_real("pd", busrecs.iter().map(|&(i, t)| loads[t].0[i]).collect())?
        .with_real("qd", busrecs.iter().map(|&(i, t)| loads[t].1[i]).collect())?
        .with_real("gs", busrecs.iter().map(|&(i, _)| case.buses[i].gs).collect())?
        .with_real("bs", busrecs.iter().map(|&(i, _)| case.buses[i].bs).collect())?;
    let vm2 = voltages.magnitude_sq("i");
    let active = core.add_constraint(&(-field("pd") - field("gs") * vm2.clone()), bus_table.clone(), 0.0, 0.0)?;
    let reactive = core.add_constraint(&(-field("qd") + field("bs") * vm2), bus_table, 0.0, 0.0)?;

    let gen_aug = DataTable::new(recs.len())
        .with_index("g", recs.iter().map(|&(i, t)| layout.idx(i, t)).collect())?
        .with_index(ROW_FIELD, recs.iter().map(|&(i, t)| active.row(layout.idx(network.gen_bus[i], t))).collect())?;
    core.modify_constraint(&active, &pg.at("g"), gen_aug.clone())?;
    let gen_aug = gen_aug.with_index(ROW_FIELD, recs.iter().map(|&(i, t)| reactive.row(layout.idx(network.gen_bus[i], t))).collect())?;
    core.modify_constraint(&reactive, &qg.at("g"), gen_aug)?;

    let arcrecs: Vec<(usize, usize)> = layout.records(2 * nl).collect();
    let arc_bus = |a: usize| if a < nl { network.from[a] } else { network.to[a - nl] };
    let arc_aug = DataTable::new(arcrecs.len())
        .with_index("a", arcrecs.iter().map(|&(a, t)| layout.idx(a, t)).collect())?
        .with_index(ROW_FIELD, arcrecs.iter().map(|&(a, t)| active.row(layout.idx(arc_bus(a), t))).collect())?;
    core.modify_constraint(&active, &(-p.at("a")), arc_aug.clone())?;
    let arc_aug =
        arc_aug.with_index(ROW_FIELD, arcrecs.iter().map(|&(a, t)| reactive.row(layout.idx(arc_bus(a), t))).collect())?;
    core.modify_constraint(&reactive, &(-q.at("a")), arc_aug)?;
    cons.c_active_power_balance = Some(active);
    cons.c_reactive_power_balance = Some(reactive);

    // thermal limits on rated branches
    let rated: Vec<(usize, usize)> = brecs.iter().copied().filter(|&(l, _)| case.branches[l].rate_a > 0.0).collect();
    if !rated.is_empty() {
        let table = |side: usize| -> Result<DataTable, ModelError> {
            DataTable::new(rated.len())
                .with_index("a", rated.iter().map(|&(l, t)| layout.idx(side * nl + l, t)).collect())?
                .with_real("s2", rated.iter().map(|&(l, _)| case.branches[l].rate_a.powi(2)).collect())
        };
        let kernel = p.at("a").powi(2) + q.at("a").powi(2) - field("s2");
        cons.c_thermal_from = Some(core.add_constraint(&kernel, table(0)?, f64::NEG_INFINITY, 0.0)?);
        cons.c_thermal_to = Some(core.add_constraint(&kernel, table(1)?, f64::NEG_INFINITY, 0.0)?);
    }

    if form == Form::Rect {
        let table = DataTable::new(busrecs.len()).with_index("i", busrecs.iter().map(|&(i, t)| layout.idx(i, t)).collect())?;
        let lo: Vec<f64> = vmin.iter().map(|v| v * v).collect();
        let hi: Vec<f64> = vmax.iter().map(|v| v * v).collect();
        cons.c_voltage_magnitude = Some(core.add_constraint(&voltages.magnitude_sq("i"), table, lo, hi)?);
    }

    if let Some(r) = ratio {
        if t_count > 1 {
            let ramps: Vec<(usize, usize)> = (0..ng).flat_map(|g| (0..t_count - 1).map(move |t| (g, t))).collect();
            let table = DataTable::new(ramps.len())
                .with_index("a", ramps.iter().map(|&(g, t)| layout.idx(g, t)).collect())?
                .with_index("b", ramps.iter().map(|&(g, t)| layout.idx(g, t + 1)).collect())?;
            let span: Vec<f64> = ramps.iter().map(|&(g, _)| r * (case.gens[g].pmax - case.gens[g].pmin)).collect();
            let lo: Vec<f64> = span.iter().map(|s| -s).collect();
            cons.c_ramp = Some(core.add_constraint(&(pg.at("b") - pg.at("a")), table, lo, span)?);
        }
    }

    let mut vars = OpfVars { va, vm, vr, vi, pg, qg, p, q, storage: None, extra: BTreeMap::new() };
    if multi && !case.storage.is_empty() {
        add_storage(&mut core, case, t_count, &mut vars, &mut cons, relax_complementarity)?;
    }

    if let Some(cb) = callback {
        cb(&mut core, &mut vars, &mut cons).map_err(|e| ModelError::Callback(Box::new(e)))?;
    }
    let model = core.compile()?;
    Ok(OpfModel { model, vars, cons, form, periods: t_count, case: network.case })
}

fn static_loads(case: &CaseData) -> (Vec<f64>, Vec<f64>) {
    (case.buses.iter().map(|b| b.pd).collect(), case.buses.iter().map(|b| b.qd).collect())
}

/// Single-period AC OPF.
pub fn opf_model(case: &CaseData, form: Form, callback: Option<UserCallback<'_>>) -> Result<OpfModel, OpfError> {
    let network = prepare(case)?;
    let loads = vec![static_loads(&network.case)];
    build(network, form, loads, false, None, false, callback)
}

/// Options shared by the multi-period builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiPeriod {
    pub form: Form,
    pub corrective_action_ratio: f64,
    /// Omits the storage complementarity rows.
    pub relax_complementarity: bool,
}

impl Default for MultiPeriod {
    fn default() -> Self {
        MultiPeriod { form: Form::Polar, corrective_action_ratio: 0.25, relax_complementarity: false }
    }
}

fn check_ratio(r: f64) -> Result<(), OpfError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(OpfError::BadRatio(r));
    }
    Ok(())
}

/// Multi-period OPF with every bus load scaled by `curve[t]`.
pub fn mpopf_model(
    case: &CaseData,
    curve: &[f64],
    options: MultiPeriod,
    callback: Option<UserCallback<'_>>,
) -> Result<OpfModel, OpfError> {
    if curve.is_empty() {
        return Err(OpfError::EmptyCurve);
    }
    check_ratio(options.corrective_action_ratio)?;
    let network = prepare(case)?;
    let (pd, qd) = static_loads(&network.case);
    let loads = curve
        .iter()
        .map(|s| (pd.iter().map(|v| v * s).collect(), qd.iter().map(|v| v * s).collect()))
        .collect();
    build(network, options.form, loads, true, Some(options.corrective_action_ratio), options.relax_complementarity, callback)
}

/// Multi-period OPF with per-bus, per-period loads.
pub fn mpopf_model_series(
    case: &CaseData,
    pd: &LoadSeries,
    qd: &LoadSeries,
    options: MultiPeriod,
    callback: Option<UserCallback<'_>>,
) -> Result<OpfModel, OpfError> {
    if pd.periods != qd.periods {
        return Err(OpfError::SeriesMismatch(format!("{} active periods vs {} reactive periods", pd.periods, qd.periods)));
    }
    let nb = case.buses.len();
    if let Some(row) = pd.values.iter().chain(&qd.values).find(|r| r.len() != nb) {
        return Err(OpfError::SeriesMismatch(format!("row of {} columns for {nb} buses", row.len())));
    }
    if pd.periods == 0 {
        return Err(OpfError::EmptyCurve);
    }
    check_ratio(options.corrective_action_ratio)?;
    let network = prepare(case)?;
    let loads = pd.values.iter().cloned().zip(qd.values.iter().cloned()).collect();
    build(network, options.form, loads, true, Some(options.corrective_action_ratio), options.relax_complementarity, callback)
}

impl OpfModel {
    /// Named solution blocks of `x`.
    pub fn solution_blocks(&self, x: &[f64]) -> Result<Vec<(String, crate::BlockValues)>, ModelError> {
        self.vars.named().into_iter().map(|(n, b)| Ok((n, self.model.solution(x, &b)?))).collect()
    }

    /// `max pc·pd` over all devices and periods; 0 without storage.
    pub fn complementarity_violation(&self, x: &[f64]) -> f64 {
        match &self.vars.storage {
            Some(s) => x[s.pc.range()].iter().zip(&x[s.pd.range()]).map(|(c, d)| c * d).fold(0.0, f64::max),
            None => 0.0,
        }
    }
}
