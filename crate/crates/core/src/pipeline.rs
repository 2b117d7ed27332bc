//! Source text to Horn system in one call.

use crate::abstraction::{encode, AbstractionConfig, EncodeError};
use crate::frontend::{self, Cfg, FrontendError, Program};
use crate::horn::{self, HornSystem};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// A checked program together with its normalized CFG.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub program: Program,
    pub cfg: Cfg,
}

/// Parses, checks and lowers a program; `hints` holds optional hint
/// properties in the property syntax.
pub fn compile(src: &str, hints: Option<&str>) -> Result<Compiled, PipelineError> {
    let program = frontend::parse(src)?;
    let hints = match hints {
        Some(h) => frontend::parse_hints(&program, h)?,
        None => Vec::new(),
    };
    let cfg = frontend::build_cfg(&program, &hints)?;
    Ok(Compiled { program, cfg })
}

/// Encodes a CFG; `raw` skips simplification.
pub fn to_horn(cfg: &Cfg, conf: &AbstractionConfig, raw: bool) -> Result<HornSystem, PipelineError> {
    let sys = encode(cfg, conf)?;
    sys.validate().map_err(PipelineError::Internal)?;
    if raw {
        return Ok(sys);
    }
    let sys = horn::simplify(&sys);
    sys.validate().map_err(PipelineError::Internal)?;
    Ok(sys)
}
