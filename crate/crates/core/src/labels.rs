//! The two-class water frame and the label types used across the pipeline.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::belief::{Frame, MassFunction, Subset};
use crate::error::Result;

pub const WATER: Subset = Subset::from_bits(0b01);
pub const NON_WATER: Subset = Subset::from_bits(0b10);
pub const OMEGA: Subset = Subset::from_bits(0b11);

/// The shared `{water, non-water}` frame.
pub fn water_frame() -> Arc<Frame> {
    static FRAME: OnceLock<Arc<Frame>> = OnceLock::new();
    Arc::clone(FRAME.get_or_init(|| {
        Arc::new(Frame::new(["water", "non-water"]).expect("static frame is valid"))
    }))
}

/// Hard two-class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Water,
    NonWater,
}

impl Label {
    pub fn subset(self) -> Subset {
        match self {
            Label::Water => WATER,
            Label::NonWater => NON_WATER,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Water => 0,
            Label::NonWater => 1,
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Water => Label::NonWater,
            Label::NonWater => Label::Water,
        }
    }
}

/// Final decision label, including the composite "ignorance" outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassLabel {
    Water,
    NonWater,
    Ignorance,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Water, ClassLabel::NonWater, ClassLabel::Ignorance];

    /// Maps a decided subset of the water frame to a label.
    pub fn from_subset(s: Subset) -> Option<Self> {
        match s {
            WATER => Some(ClassLabel::Water),
            NON_WATER => Some(ClassLabel::NonWater),
            OMEGA => Some(ClassLabel::Ignorance),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Water => "water",
            ClassLabel::NonWater => "non-water",
            ClassLabel::Ignorance => "ignorance",
        }
    }
}

impl From<Label> for ClassLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Water => ClassLabel::Water,
            Label::NonWater => ClassLabel::NonWater,
        }
    }
}

/// Masses of `{water}`, `{non-water}` and `Ω` for one pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MassTriple {
    pub water: f64,
    pub non_water: f64,
    pub ignorance: f64,
}

impl MassTriple {
    pub fn new(water: f64, non_water: f64, ignorance: f64) -> Self {
        MassTriple {
            water,
            non_water,
            ignorance,
        }
    }

    pub fn total(&self) -> f64 {
        self.water + self.non_water + self.ignorance
    }

    pub fn of(m: &MassFunction) -> Self {
        MassTriple {
            water: m.mass(WATER),
            non_water: m.mass(NON_WATER),
            ignorance: m.mass(OMEGA),
        }
    }

    pub fn to_mass_function(self) -> Result<MassFunction> {
        MassFunction::from_focal(
            water_frame(),
            &[
                (WATER, self.water),
                (NON_WATER, self.non_water),
                (OMEGA, self.ignorance),
            ],
        )
    }
}
