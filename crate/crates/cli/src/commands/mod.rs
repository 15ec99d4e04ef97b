pub mod augment;
pub mod encode;
pub mod eval;
pub mod gen;
pub mod masks;
pub mod probe;
pub mod selftest;
pub mod stats;

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::files::{json_bytes, Run};

/// Prints `report` as JSON, and writes it with a manifest when `out` is set.
pub fn emit<T: Serialize>(run: &Run, report: &T, out: Option<&Path>) -> Result<()> {
    let bytes = json_bytes(report);
    match out {
        Some(path) => {
            run.output(path, &bytes)?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}
