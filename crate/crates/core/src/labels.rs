//! Categorical vocabularies shared by every stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! vocabulary {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownVariant;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(UnknownVariant {
                        kind: stringify!($name),
                        value: other.to_string(),
                    }),
                }
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} value `{value}`")]
pub struct UnknownVariant {
    pub kind: &'static str,
    pub value: String,
}

vocabulary! {
    /// The seven canonical expression classes. Ordering follows the usual
    /// table layout (the six basic emotions, then neutral).
    pub enum ExpressionLabel {
        Anger => "anger",
        Disgust => "disgust",
        Fear => "fear",
        Happiness => "happiness",
        Sadness => "sadness",
        Surprise => "surprise",
        Neutral => "neutral",
    }
}

vocabulary! {
    pub enum Gender {
        Male => "male",
        Female => "female",
    }
}

vocabulary! {
    pub enum AgeGroup {
        Child => "child",
        Adult => "adult",
        Elderly => "elderly",
    }
}

vocabulary! {
    /// Discretized head yaw. `Left`/`Right` refer to image sides.
    pub enum HeadPose {
        Front => "front",
        HalfLeft => "half_left",
        HalfRight => "half_right",
        FullLeft => "full_left",
        FullRight => "full_right",
        Back => "back",
    }
}

vocabulary! {
    pub enum MediaType {
        Image => "image",
        Video => "video",
    }
}

vocabulary! {
    pub enum Provenance {
        WebAutomatic => "web_automatic",
        WebManual => "web_manual",
        LabControlled => "lab_controlled",
    }
}

impl ExpressionLabel {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl HeadPose {
    /// Poses that are too far from frontal to keep.
    pub fn is_full_or_back(self) -> bool {
        matches!(self, HeadPose::FullLeft | HeadPose::FullRight | HeadPose::Back)
    }

    /// Swaps left and right; front and back are fixed points.
    pub fn mirrored(self) -> HeadPose {
        match self {
            HeadPose::HalfLeft => HeadPose::HalfRight,
            HeadPose::HalfRight => HeadPose::HalfLeft,
            HeadPose::FullLeft => HeadPose::FullRight,
            HeadPose::FullRight => HeadPose::FullLeft,
            other => other,
        }
    }
}
