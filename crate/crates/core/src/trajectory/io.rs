//! Trajectory file format. Coordinates are written with six decimals.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AxisRange, CoordinateSpace, Point, Region, TrajectoryError, TrajectorySequence, TrajectorySource};

/// JSON formatter that prints every float with exactly six decimals.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixedDecimalFormatter;

impl serde_json::ser::Formatter for FixedDecimalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.6}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.6}")
    }
}

/// Compact JSON with six-decimal floats.
pub fn to_fixed_json<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDecimalFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFlags {
    pub degenerate_x: bool,
    pub degenerate_y: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryProvenance {
    pub source: TrajectorySource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<[AxisRange; 2]>,
    /// Free-form details (tracker configuration, filter order, ...).
    #[serde(default)]
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub clip_id: String,
    pub space: CoordinateSpace,
    #[serde(rename = "P")]
    pub points_per_region: usize,
    /// `tip_1`, ..., `root_P` in frame point order.
    pub point_labels: Vec<String>,
    pub frames: Vec<Vec<Point>>,
    pub flags: TrajectoryFlags,
    pub provenance: TrajectoryProvenance,
}

impl TrajectoryFile {
    pub fn from_sequence(clip_id: &str, seq: &TrajectorySequence, details: serde_json::Value) -> Self {
        let point_labels = Region::ALL
            .iter()
            .flat_map(|r| (1..=seq.points_per_region).map(move |i| format!("{}_{i}", r.as_str())))
            .collect();
        TrajectoryFile {
            clip_id: clip_id.to_string(),
            space: seq.space,
            points_per_region: seq.points_per_region,
            point_labels,
            frames: seq.frames.clone(),
            flags: TrajectoryFlags { degenerate_x: seq.degenerate_axes[0], degenerate_y: seq.degenerate_axes[1] },
            provenance: TrajectoryProvenance { source: seq.source, normalization: seq.normalization, details },
        }
    }

    pub fn into_sequence(self) -> Result<TrajectorySequence, TrajectoryError> {
        let seq = TrajectorySequence {
            frames: self.frames,
            points_per_region: self.points_per_region,
            space: self.space,
            source: self.provenance.source,
            degenerate_axes: [self.flags.degenerate_x, self.flags.degenerate_y],
            normalization: self.provenance.normalization,
        };
        seq.check_shape()?;
        Ok(seq)
    }
}

pub fn write_trajectory_file(path: &Path, file: &TrajectoryFile) -> Result<(), TrajectoryError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(to_fixed_json(file)?.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_file(path: &Path) -> Result<TrajectoryFile, TrajectoryError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
