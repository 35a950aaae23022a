use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Neutral-to-apex clips: one neutral frame plus two target-expression frames.
    NeutralPlusApex,
    /// Constant-expression clips: five equidistant frames spanning the clip.
    UniformFive,
    /// Media that is already a set of still images.
    Passthrough,
}

impl SamplingStrategy {
    pub fn emitted_count(self) -> u32 {
        match self {
            SamplingStrategy::NeutralPlusApex => 3,
            SamplingStrategy::UniformFive => 5,
            SamplingStrategy::Passthrough => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SamplingStrategy::NeutralPlusApex => "neutral_plus_apex",
            SamplingStrategy::UniformFive => "uniform_five",
            SamplingStrategy::Passthrough => "passthrough",
        }
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral_plus_apex" => Ok(SamplingStrategy::NeutralPlusApex),
            "uniform_five" => Ok(SamplingStrategy::UniformFive),
            "passthrough" => Ok(SamplingStrategy::Passthrough),
            other => Err(Error::Config(format!("unknown sampling strategy `{other}`"))),
        }
    }
}

/// Whether a sampled frame shows the neutral face or the clip's expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameRole {
    Neutral,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledFrame {
    pub index: u32,
    pub role: FrameRole,
}

/// round(numer / denom) with halves rounded up, exact in integers.
fn round_half_up(numer: u64, denom: u64) -> u64 {
    (2 * numer + denom) / (2 * denom)
}

/// Selects the frames to keep from a clip of `frame_count` frames.
///
/// Indices are strictly increasing. `video` only names the clip in errors.
pub fn sample_frames(frame_count: u32, strategy: SamplingStrategy, video: &str) -> Result<Vec<SampledFrame>> {
    let needed = strategy.emitted_count().max(1);
    if frame_count < needed {
        return Err(Error::Sampling {
            video: video.to_string(),
            message: format!("{strategy} needs at least {needed} frames, clip has {frame_count}"),
        });
    }
    let last = (frame_count - 1) as u64;
    let frames = match strategy {
        SamplingStrategy::Passthrough => Vec::new(),
        SamplingStrategy::UniformFive => (0..5u64)
            .map(|i| SampledFrame {
                index: round_half_up(i * last, 4) as u32,
                role: FrameRole::Target,
            })
            .collect(),
        SamplingStrategy::NeutralPlusApex => {
            // Three-frame clips would place the 75% frame on the last one.
            let apex = round_half_up(3 * last, 4).min(last - 1);
            vec![
                SampledFrame { index: 0, role: FrameRole::Neutral },
                SampledFrame { index: apex as u32, role: FrameRole::Target },
                SampledFrame { index: last as u32, role: FrameRole::Target },
            ]
        }
    };
    Ok(frames)
}
