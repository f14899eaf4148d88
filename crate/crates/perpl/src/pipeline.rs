//! End-to-end driver: parse -> desugar -> typecheck -> linearize ->
//! eliminate recursive types -> compile equations -> solve.

use crate::diag::Diagnostics;
use crate::dr::{self, Elimination};
use crate::linearize::linearize;
use crate::mspe::{compile_mspe, Mspe, MspeError};
use crate::solver::{self, SolveConfig, SolveReport, Weight};
use crate::typecheck::{typecheck, Mode, TypedProgram};

/// Failure modes, distinguished for exit-code mapping: diagnostics (1),
/// no elimination order (2), solver/compiler budget (3).
#[derive(Debug)]
pub enum PipelineError {
    Diagnostics(Diagnostics),
    NoSequence { message: String, residual_dot: String },
    Budget(String),
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PipelineError::Diagnostics(d) => write!(f, "{d}"),
            PipelineError::NoSequence { message, .. } => write!(f, "{message}"),
            PipelineError::Budget(m) => write!(f, "{m}"),
        }
    }
}

impl From<Diagnostics> for PipelineError {
    fn from(d: Diagnostics) -> Self {
        PipelineError::Diagnostics(d)
    }
}

pub const DEFAULT_MAX_VARS: u128 = 20_000_000;

/// Parse, desugar, and typecheck a source program.
pub fn check_source(source: &str, mode: Mode) -> Result<TypedProgram, Diagnostics> {
    let surface = crate::parser::parse_program(source)?;
    let core = crate::desugar::desugar(&surface)?;
    typecheck(core, mode)
}

/// Make the program strictly linear, then eliminate every recursive type.
pub fn transform(tp: &TypedProgram) -> Result<Elimination, PipelineError> {
    let linear = linearize(tp)?;
    dr::eliminate_recursive_types(&linear).map_err(|stuck| PipelineError::NoSequence {
        message: stuck.message.clone(),
        residual_dot: dr::render_dot(&stuck.residual),
    })
}

/// Compile the transformed program's equation system (reduced).
pub fn compile(tp: &TypedProgram, max_vars: u128) -> Result<Mspe, PipelineError> {
    let mut m = compile_mspe(tp, max_vars).map_err(|e| match e {
        MspeError::Budget(msg) => PipelineError::Budget(msg),
        MspeError::Invalid(d) => PipelineError::Diagnostics(d),
    })?;
    m.reduce();
    Ok(m)
}

/// Root weights with their rendered values.
pub type Distribution<W> = Vec<(String, W)>;

pub fn distribution_json<W: Weight>(dist: &Distribution<W>) -> serde_json::Value {
    let support: Vec<serde_json::Value> = dist
        .iter()
        .map(|(v, w)| {
            let weight = if w.is_infinite() {
                serde_json::Value::String("inf".into())
            } else {
                serde_json::json!(w.to_f64())
            };
            serde_json::json!({"value": v, "weight": weight})
        })
        .collect();
    serde_json::json!({"support": support})
}

pub struct Solved<W> {
    pub distribution: Distribution<W>,
    pub report: SolveReport,
    pub mspe: Mspe,
    pub transformed: TypedProgram,
    pub elimination: Vec<(crate::core::Tag, String, dr::Label)>,
}

/// Full pipeline from source to solved distribution.
pub fn solve_source<W: Weight>(
    source: &str,
    mode: Mode,
    cfg: &SolveConfig,
    max_vars: u128,
) -> Result<Solved<W>, PipelineError> {
    let tp = check_source(source, mode)?;
    let elim = transform(&tp)?;
    let mspe = compile(&elim.result, max_vars)?;
    let (value, report) = solver::solve::<W>(&mspe, cfg);
    let distribution = mspe
        .roots
        .iter()
        .map(|(v, i)| (v.clone(), value[*i].clone()))
        .collect();
    Ok(Solved {
        distribution,
        report,
        mspe,
        transformed: elim.result,
        elimination: elim.sequence,
    })
}
