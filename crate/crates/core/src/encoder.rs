//! The decoupling-and-aggregation recurrent encoder.
//!
//! Each token step keeps three subtask cells, one each for subjects (`S`),
//! relations (`R`) and objects (`O`). Per step:
//!
//! 1. candidates: `f = z + (h_prev·W_f + b_f)`, `c̃ = tanh(z + (h_prev·W_c + b_c))`
//! 2. inter-aggregation: `f_ro = f_o - f_r`, `f_so = f_o - f_s`, `f_sr = f_s + f_r`
//! 3. intra-aggregation: `a_s = (f_prev_s + f_prev_ro)⊙c_prev_s + (f_s + f_ro)⊙c̃_s`,
//!    and likewise `r` with `so`, `o` with `sr`
//! 4. finalization: `h̃ = tanh(a)`, `c = a·W_a + b_a`, `h = tanh(c)`
//!
//! where `z` is the token's row of the per-subtask input projection
//! `Z = X·W_z + b_z`. The state carried between steps holds `h`, `c`, `f`
//! and the three inter-aggregates of the previous token, all zero before
//! the first token.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{Bound, ParamStore};
use crate::tensor::Tensor;

/// Subjects, relations, objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subtask {
    S,
    R,
    O,
}

impl Subtask {
    pub const ALL: [Subtask; 3] = [Subtask::S, Subtask::R, Subtask::O];

    pub fn tag(self) -> &'static str {
        match self {
            Subtask::S => "s",
            Subtask::R => "r",
            Subtask::O => "o",
        }
    }
}

/// One value per subtask, indexed `[S, R, O]`.
pub type PerSubtask<T> = [T; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

/// Direction assignment for stacked layers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSchedule {
    /// Layer 1 left-to-right, layer 2 right-to-left, and so on.
    #[default]
    Alternating,
    /// Every layer left-to-right.
    LeftToRight,
}

impl DirectionSchedule {
    pub fn direction(self, layer: usize) -> Direction {
        match self {
            DirectionSchedule::Alternating if layer % 2 == 1 => Direction::RightToLeft,
            _ => Direction::LeftToRight,
        }
    }
}

/// What a layer above the first receives as its per-token input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerFeed {
    /// `h_s + h_r + h_o` of the layer below.
    #[default]
    HiddenSum,
    /// `h̃_s + h̃_r + h̃_o` of the layer below.
    FeatureSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderOptions {
    /// When false the inter-aggregated features are replaced by zeros.
    pub interaction: bool,
}

impl Default for EncoderOptions {
    fn default() -> Self {
        EncoderOptions { interaction: true }
    }
}

/// Parameter names and widths of one encoder layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DamParams {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Store positions, `[subtask][w_z, w_f, w_c, w_a, b_z, b_f, b_c, b_a]`.
    slots: [[usize; 8]; 3],
}

const CELL_WEIGHTS: [&str; 4] = ["w_z", "w_f", "w_c", "w_a"];
const CELL_BIASES: [&str; 4] = ["b_z", "b_f", "b_c", "b_a"];

impl DamParams {
    /// Registers the 24 tensors of one layer: weights uniform in
    /// `±1/sqrt(hidden_dim)`, biases zero.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::contract("encoder widths must be positive"));
        }
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut slots = [[0; 8]; 3];
        for (p, cell) in Subtask::ALL.into_iter().zip(&mut slots) {
            for (k, (w, b)) in CELL_WEIGHTS.iter().zip(CELL_BIASES).enumerate() {
                let rows = if *w == "w_z" { input_dim } else { hidden_dim };
                cell[k] = store.uniform(format!("{prefix}.{}.{w}", p.tag()), &[rows, hidden_dim], bound)?;
                cell[4 + k] = store.zeros(format!("{prefix}.{}.{b}", p.tag()), &[hidden_dim])?;
            }
        }
        Ok(DamParams {
            prefix: prefix.to_string(),
            input_dim,
            hidden_dim,
            slots,
        })
    }

    pub fn name(&self, p: Subtask, field: &str) -> String {
        format!("{}.{}.{field}", self.prefix, p.tag())
    }

    /// All parameter names belonging to the given subtask cell.
    pub fn cell_names(&self, p: Subtask) -> Vec<String> {
        CELL_WEIGHTS
            .iter()
            .chain(CELL_BIASES.iter())
            .map(|f| self.name(p, f))
            .collect()
    }

    pub fn bind(&self, bound: &Bound) -> Result<DamVars> {
        let cell = |p: Subtask| -> Result<CellVars> {
            let v = |k: usize| bound.get(self.slots[p as usize][k]);
            Ok(CellVars {
                w_z: v(0)?,
                w_f: v(1)?,
                w_c: v(2)?,
                w_a: v(3)?,
                b_z: v(4)?,
                b_f: v(5)?,
                b_c: v(6)?,
                b_a: v(7)?,
            })
        };
        Ok(DamVars {
            cells: [cell(Subtask::S)?, cell(Subtask::R)?, cell(Subtask::O)?],
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CellVars {
    pub w_z: Var,
    pub b_z: Var,
    pub w_f: Var,
    pub b_f: Var,
    pub w_c: Var,
    pub b_c: Var,
    pub w_a: Var,
    pub b_a: Var,
}

/// A layer's parameters bound to a computation record.
#[derive(Clone, Copy, Debug)]
pub struct DamVars {
    pub cells: PerSubtask<CellVars>,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Recurrent carry between token steps; every entry is `[1×d_h]`.
#[derive(Clone, Copy, Debug)]
pub struct DamState {
    pub h: PerSubtask<Var>,
    pub c: PerSubtask<Var>,
    pub f: PerSubtask<Var>,
    /// `[f_ro, f_so, f_sr]` of the previous step.
    pub inter: PerSubtask<Var>,
}

impl DamState {
    pub fn zeros(g: &mut Graph, hidden_dim: usize) -> Self {
        let z = g.leaf(Tensor::zeros(&[1, hidden_dim]));
        DamState {
            h: [z; 3],
            c: [z; 3],
            f: [z; 3],
            inter: [z; 3],
        }
    }
}

/// Intermediate features of one token step, kept for inspection.
#[derive(Clone, Copy, Debug)]
pub struct StepTrace {
    pub token: usize,
    pub f: PerSubtask<Var>,
    /// `[f_ro, f_so, f_sr]`.
    pub inter: PerSubtask<Var>,
    pub a: PerSubtask<Var>,
}

/// Result of encoding one sentence with one layer.
#[derive(Clone, Debug)]
pub struct DamOutput {
    pub direction: Direction,
    /// Final subtask features `h̃`, each `[t×d_h]` in original token order.
    pub h_tilde: PerSubtask<Var>,
    /// Hidden states `h`, each `[t×d_h]` in original token order.
    pub hidden: PerSubtask<Var>,
    pub final_state: DamState,
    /// One entry per processed token, in processing order.
    pub steps: Vec<StepTrace>,
}

/// `Z^p = X·W_z_p + b_z_p` for each subtask.
pub fn project_inputs(g: &mut Graph, x: Var, vars: &DamVars) -> Result<PerSubtask<Var>> {
    let mut out = [x; 3];
    for (slot, cell) in out.iter_mut().zip(&vars.cells) {
        let xw = g.matmul(x, cell.w_z)?;
        *slot = g.add_row(xw, cell.b_z)?;
    }
    Ok(out)
}

/// Per-subtask raw features `f` and candidate cell states `c̃`.
pub fn compute_candidates(
    g: &mut Graph,
    z: PerSubtask<Var>,
    state: &DamState,
    vars: &DamVars,
) -> Result<(PerSubtask<Var>, PerSubtask<Var>)> {
    let mut f = z;
    let mut c_tilde = z;
    for i in 0..3 {
        let cell = &vars.cells[i];
        let hf = g.matmul(state.h[i], cell.w_f)?;
        let hf = g.add_row(hf, cell.b_f)?;
        f[i] = g.add(z[i], hf)?;
        let hc = g.matmul(state.h[i], cell.w_c)?;
        let hc = g.add_row(hc, cell.b_c)?;
        let pre = g.add(z[i], hc)?;
        c_tilde[i] = g.tanh(pre)?;
    }
    Ok((f, c_tilde))
}

/// `[f_ro, f_so, f_sr] = [f_o - f_r, f_o - f_s, f_s + f_r]`.
pub fn inter_aggregate(g: &mut Graph, f: PerSubtask<Var>) -> Result<PerSubtask<Var>> {
    let [fs, fr, fo] = f;
    let ro = g.sub(fo, fr)?;
    let so = g.sub(fo, fs)?;
    let sr = g.add(fs, fr)?;
    Ok([ro, so, sr])
}

/// Enhanced features `a`, pairing subjects with `ro`, relations with `so`
/// and objects with `sr`.
pub fn intra_aggregate(
    g: &mut Graph,
    f: PerSubtask<Var>,
    inter: PerSubtask<Var>,
    state: &DamState,
    c_tilde: PerSubtask<Var>,
) -> Result<PerSubtask<Var>> {
    let mut a = f;
    for i in 0..3 {
        let prev = g.add(state.f[i], state.inter[i])?;
        let prev = g.mul(prev, state.c[i])?;
        let cur = g.add(f[i], inter[i])?;
        let cur = g.mul(cur, c_tilde[i])?;
        a[i] = g.add(prev, cur)?;
    }
    Ok(a)
}

/// Per subtask, returns `(h̃, c, h)`.
pub fn finalize(
    g: &mut Graph,
    a: PerSubtask<Var>,
    vars: &DamVars,
) -> Result<(PerSubtask<Var>, PerSubtask<Var>, PerSubtask<Var>)> {
    let (mut h_tilde, mut c, mut h) = (a, a, a);
    for i in 0..3 {
        let cell = &vars.cells[i];
        h_tilde[i] = g.tanh(a[i])?;
        let aw = g.matmul(a[i], cell.w_a)?;
        c[i] = g.add_row(aw, cell.b_a)?;
        h[i] = g.tanh(c[i])?;
    }
    Ok((h_tilde, c, h))
}

/// One full token step: candidates, inter- and intra-aggregation, finalization.
pub fn cell_step(
    g: &mut Graph,
    z: PerSubtask<Var>,
    state: &DamState,
    vars: &DamVars,
    opts: EncoderOptions,
    zero: Var,
) -> Result<(PerSubtask<Var>, PerSubtask<Var>, DamState, StepTrace)> {
    let (f, c_tilde) = compute_candidates(g, z, state, vars)?;
    let inter = if opts.interaction {
        inter_aggregate(g, f)?
    } else {
        [zero; 3]
    };
    let a = intra_aggregate(g, f, inter, state, c_tilde)?;
    let (h_tilde, c, h) = finalize(g, a, vars)?;
    let next = DamState { h, c, f, inter };
    let trace = StepTrace {
        token: 0,
        f,
        inter,
        a,
    };
    Ok((h_tilde, h, next, trace))
}

/// Encodes a `[t×d_p]` sentence matrix with one layer.
///
/// Right-to-left encoding visits tokens from last to first but returns
/// features in original token order.
pub fn encode_sequence(
    g: &mut Graph,
    x: Var,
    vars: &DamVars,
    direction: Direction,
    opts: EncoderOptions,
) -> Result<DamOutput> {
    let shape = g.shape(x).to_vec();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::contract(format!(
            "encoder input must be a non-empty [t×d_p] matrix, got {shape:?}"
        )));
    }
    if shape[1] != vars.input_dim {
        return Err(Error::dim("encode_sequence", &shape, &[vars.input_dim, vars.hidden_dim]));
    }
    let t = shape[0];
    let z_all = project_inputs(g, x, vars)?;
    let mut state = DamState::zeros(g, vars.hidden_dim);
    let zero = state.f[0];

    let order: Vec<usize> = match direction {
        Direction::LeftToRight => (0..t).collect(),
        Direction::RightToLeft => (0..t).rev().collect(),
    };
    let mut h_tilde_rows: Vec<PerSubtask<Var>> = vec![[zero; 3]; t];
    let mut hidden_rows: Vec<PerSubtask<Var>> = vec![[zero; 3]; t];
    let mut steps = Vec::with_capacity(t);
    for &tok in &order {
        let mut z = z_all;
        for (zi, zall) in z.iter_mut().zip(&z_all) {
            *zi = g.row(*zall, tok)?;
        }
        let (h_tilde, h, next, mut trace) = cell_step(g, z, &state, vars, opts, zero)?;
        trace.token = tok;
        steps.push(trace);
        h_tilde_rows[tok] = h_tilde;
        hidden_rows[tok] = h;
        state = next;
    }

    let stack = |g: &mut Graph, rows: &[PerSubtask<Var>]| -> Result<PerSubtask<Var>> {
        let mut out = [zero; 3];
        for (i, slot) in out.iter_mut().enumerate() {
            let parts: Vec<Var> = rows.iter().map(|r| r[i]).collect();
            *slot = g.concat(&parts, 0)?;
        }
        Ok(out)
    };
    let h_tilde = stack(g, &h_tilde_rows)?;
    let hidden = stack(g, &hidden_rows)?;
    Ok(DamOutput {
        direction,
        h_tilde,
        hidden,
        final_state: state,
        steps,
    })
}

/// Encodes with `layers.len()` stacked layers. Layer 1 reads `x`; each
/// higher layer reads the per-token sum selected by `feed` from the layer
/// below. All layer outputs are returned, bottom first.
pub fn encode_stacked(
    g: &mut Graph,
    x: Var,
    layers: &[DamVars],
    schedule: DirectionSchedule,
    feed: LayerFeed,
    opts: EncoderOptions,
) -> Result<Vec<DamOutput>> {
    if layers.is_empty() {
        return Err(Error::contract("encode_stacked needs at least one layer"));
    }
    let mut outputs: Vec<DamOutput> = Vec::with_capacity(layers.len());
    let mut input = x;
    for (l, vars) in layers.iter().enumerate() {
        if let Some(below) = outputs.last() {
            let src = match feed {
                LayerFeed::HiddenSum => below.hidden,
                LayerFeed::FeatureSum => below.h_tilde,
            };
            let sr = g.add(src[0], src[1])?;
            input = g.add(sr, src[2])?;
        }
        outputs.push(encode_sequence(g, input, vars, schedule.direction(l), opts)?);
    }
    Ok(outputs)
}
