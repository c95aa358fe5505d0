use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exclusion {
    NoGeodata,
    IllegibleGeodata,
    UnresolvableRetweet,
    TooShortAfterClean,
}

/// Records entering and leaving one pipeline stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub input: u64,
    pub output: u64,
    pub excluded: u64,
}

/// Stage-by-stage accounting of retained and excluded records.
///
/// `total_in == retained + excluded_total()` holds after every call to
/// [`FiltrationLedger::record_stage`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiltrationLedger {
    pub total_in: u64,
    pub excluded_no_geodata: u64,
    pub excluded_illegible_geodata: u64,
    pub excluded_unresolvable_retweet: u64,
    pub excluded_too_short_after_clean: u64,
    pub retained: u64,
    #[serde(default)]
    pub stages: Vec<StageCount>,
}

impl FiltrationLedger {
    pub fn new(total_in: u64) -> Self {
        Self {
            total_in,
            retained: total_in,
            ..Self::default()
        }
    }

    pub fn excluded_total(&self) -> u64 {
        self.excluded_no_geodata
            + self.excluded_illegible_geodata
            + self.excluded_unresolvable_retweet
            + self.excluded_too_short_after_clean
    }

    pub fn is_conserved(&self) -> bool {
        self.total_in == self.retained + self.excluded_total()
            && self
                .stages
                .iter()
                .all(|s| s.input == s.output + s.excluded)
    }

    /// Account for one stage that received `input` records and excluded the
    /// given counts.
    pub fn record_stage(&mut self, stage: &str, input: u64, excluded: &[(Exclusion, u64)]) -> Result<()> {
        if input != self.retained {
            return Err(Error::Contract(format!(
                "stage `{stage}` received {input} records but the ledger retains {}",
                self.retained
            )));
        }
        let dropped: u64 = excluded.iter().map(|(_, n)| n).sum();
        if dropped > input {
            return Err(Error::Contract(format!(
                "stage `{stage}` excluded {dropped} of {input} records"
            )));
        }
        for &(reason, n) in excluded {
            match reason {
                Exclusion::NoGeodata => self.excluded_no_geodata += n,
                Exclusion::IllegibleGeodata => self.excluded_illegible_geodata += n,
                Exclusion::UnresolvableRetweet => self.excluded_unresolvable_retweet += n,
                Exclusion::TooShortAfterClean => self.excluded_too_short_after_clean += n,
            }
        }
        self.retained -= dropped;
        self.stages.retain(|s| s.stage != stage);
        self.stages.push(StageCount {
            stage: stage.to_string(),
            input,
            output: input - dropped,
            excluded: dropped,
        });
        Ok(())
    }
}
