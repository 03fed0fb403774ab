//! File formats for valuation vectors and reports.
//!
//! Every emitted file is UTF-8. CSV numeric cells render 17 significant
//! digits so round-trips are bit-stable; JSON relies on shortest round-trip
//! float formatting. Schemas carry a version.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::valuation::ValuationVector;

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Renders an `f64` with 17 significant digits (round-trip exact).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Valuation CSV: `train_id,value` with one row per training sample.
pub fn write_valuation_csv<W: Write>(w: &mut W, values: &ValuationVector) -> Result<()> {
    writeln!(w, "train_id,value")?;
    for (id, v) in values.values.iter().enumerate() {
        writeln!(w, "{},{}", id, fmt_f64(*v))?;
    }
    Ok(())
}

/// JSON envelope for a valuation vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValuationDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub valuation: ValuationVector,
}

pub fn write_valuation_json<W: Write>(w: &mut W, values: &ValuationVector) -> Result<()> {
    let doc = ValuationDocument {
        schema_version: SCHEMA_VERSION,
        valuation: values.clone(),
    };
    serde_json::to_writer_pretty(&mut *w, &doc)
        .map_err(|e| crate::error::Error::invalid(format!("json serialization failed: {e}")))?;
    writeln!(w)?;
    Ok(())
}
