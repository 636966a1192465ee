use serde::{Deserialize, Serialize};

use super::ForgeError;
use crate::trajectory::{
    amplitude_filter, normalize_trajectory, AmplitudeDecision, CoordinateSpace, TrajectoryError, TrajectorySequence,
};

/// What the doctor agent retrieves for one clip: the unit-space trajectory,
/// phonetic type and content, and the diagnostic label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub trajectory: TrajectorySequence,
    pub phonetic_type: String,
    pub phonetic_text: String,
    pub diagnostic_label: String,
}

impl KnowledgeRecord {
    pub fn new(
        trajectory: TrajectorySequence,
        phonetic_type: impl Into<String>,
        phonetic_text: impl Into<String>,
        diagnostic_label: impl Into<String>,
    ) -> Result<Self, ForgeError> {
        let record = KnowledgeRecord {
            trajectory,
            phonetic_type: phonetic_type.into(),
            phonetic_text: phonetic_text.into(),
            diagnostic_label: diagnostic_label.into(),
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        if self.trajectory.space != CoordinateSpace::UnitNormalized {
            return Err(ForgeError::InvalidRecord("trajectory must be unit-normalized".into()));
        }
        self.trajectory.check_shape().map_err(|e| ForgeError::InvalidRecord(e.to_string()))?;
        for (name, value) in [
            ("phonetic_type", &self.phonetic_type),
            ("phonetic_text", &self.phonetic_text),
            ("diagnostic_label", &self.diagnostic_label),
        ] {
            if value.trim().is_empty() {
                return Err(ForgeError::InvalidRecord(format!("{name} is empty")));
            }
        }
        Ok(())
    }
}

/// Whether the amplitude threshold is checked on raw pixels or after
/// normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    BeforeNormalization,
    #[default]
    AfterNormalization,
}

/// Normalizes a raw trajectory and applies the amplitude threshold in the
/// configured order. `Ok(None)` means the sample was dropped as low-motion.
pub fn prepare_trajectory(
    raw: &TrajectorySequence,
    delta: f64,
    order: FilterOrder,
) -> Result<Option<TrajectorySequence>, TrajectoryError> {
    if order == FilterOrder::BeforeNormalization && amplitude_filter(raw, delta)? == AmplitudeDecision::Drop {
        return Ok(None);
    }
    let normalized = normalize_trajectory(raw)?;
    if order == FilterOrder::AfterNormalization && amplitude_filter(&normalized, delta)? == AmplitudeDecision::Drop {
        return Ok(None);
    }
    Ok(Some(normalized))
}

/// A knowledge record with the identifiers used to cite it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub knowledge_id: String,
    pub clip_id: String,
    pub record: KnowledgeRecord,
}
