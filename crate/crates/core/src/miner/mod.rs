//! Tier mining: cleanse captured figures, compute profit, classify each
//! business with a threshold decision tree and assess tax from the rate
//! guide.

mod cleanse;
mod extract;
mod guide;
mod profit;
mod tree;

use thiserror::Error;

pub use cleanse::{cleanse, normalize_name, CapturedRecord, CleanRecord, CleansingReport, RejectReason};
pub use extract::{captured_records, run_extraction, MiningEntry, MiningReport, Rejection, CSV_HEADER};
pub use guide::{Band, TierRateGuide, CURRENCY};
pub use profit::{compute_profitability, ProfitReport};
pub use tree::{assess_tax, classify_tier, Node};

use crate::domain::ScreenMessage;
use crate::pool::PoolError;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("invalid rate guide: {0}")]
    InvalidGuide(String),
    #[error("revenue and expenses must be non-negative")]
    NegativeInput,
    #[error("{}", ScreenMessage::NoEarningsRecords.text())]
    NoEarningsRecords { rejected: usize },
    #[error(transparent)]
    Pool(#[from] PoolError),
}
