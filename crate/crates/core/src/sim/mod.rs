//! Synthetic data-generating processes with known parameters.

pub mod callbacks;
pub mod donations;
pub mod evaluations;
pub mod events;

use std::io::Write;

use crate::error::Result;

pub use callbacks::{
    simulate_callbacks, simulate_latent_panel, simulate_two_threshold_callbacks, CallbackDgpParams, LatentDesign,
    LatentRule,
};
pub use donations::{simulate_donations, DonationInvestor, DonationParams};
pub use evaluations::{simulate_evaluations, EvalDgpParams, EvalSession, MixtureDraw, SlopeMixture};
pub use events::{emit_event_log, EmailEvent, EmailEventLog, EmittedLog, EventKind, EventTiming, ReadTime};

/// Writes a `parameter,value` ground-truth sidecar.
pub fn write_truth_csv<W: Write>(out: W, truth: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "value"])?;
    for (k, v) in truth {
        w.write_record([k.as_str(), &format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}
