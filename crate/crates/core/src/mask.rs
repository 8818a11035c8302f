//! Segmentation mask raster and the feature class table.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Class codes as stored in mask rasters. Code 0 is background; anything the
/// segmentation model produces outside the mappable set folds into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    Background = 0,
    Sidewalk = 1,
    Building = 2,
    TrafficSign = 3,
    TrafficLight = 4,
    Pole = 5,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 6] = [
        FeatureClass::Background,
        FeatureClass::Sidewalk,
        FeatureClass::Building,
        FeatureClass::TrafficSign,
        FeatureClass::TrafficLight,
        FeatureClass::Pole,
    ];

    /// The five sidewalk-relevant classes that can be localized and uploaded.
    pub const MAPPABLE: [FeatureClass; 5] = [
        FeatureClass::Sidewalk,
        FeatureClass::Building,
        FeatureClass::TrafficSign,
        FeatureClass::TrafficLight,
        FeatureClass::Pole,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureClass::Background => "background",
            FeatureClass::Sidewalk => "sidewalk",
            FeatureClass::Building => "building",
            FeatureClass::TrafficSign => "traffic_sign",
            FeatureClass::TrafficLight => "traffic_light",
            FeatureClass::Pole => "pole",
        }
    }

    pub fn is_mappable(self) -> bool {
        self != FeatureClass::Background
    }
}

impl fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown feature class `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for FeatureClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("mask dimensions must be non-zero (got {width}x{height})")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("label buffer has {got} cells, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("label {label} at index {index} is not a known class code")]
    UnknownLabel { label: u8, index: usize },
}

/// Row-major grid of class codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl SegMask {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::EmptyDimensions { width, height });
        }
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(MaskError::BufferSize {
                expected,
                got: labels.len(),
            });
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| FeatureClass::from_code(l).is_none())
        {
            return Err(MaskError::UnknownLabel { label, index });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// All-background mask.
    pub fn background(width: u32, height: u32) -> Result<Self, MaskError> {
        Self::new(width, height, vec![0; width as usize * height as usize])
    }

    /// Builds a mask from a closure over `(x, y)`.
    pub fn from_fn(
        width: u32,
        height: u32,
        f: impl Fn(u32, u32) -> FeatureClass,
    ) -> Result<Self, MaskError> {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y).code());
            }
        }
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn code_at(&self, x: u32, y: u32) -> u8 {
        self.labels[self.index(x, y)]
    }

    #[inline]
    pub fn class_at(&self, x: u32, y: u32) -> FeatureClass {
        // labels are validated on construction
        FeatureClass::from_code(self.code_at(x, y)).unwrap_or(FeatureClass::Background)
    }

    pub fn get(&self, x: i64, y: i64) -> Option<FeatureClass> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(self.class_at(x as u32, y as u32))
        }
    }

    pub fn set(&mut self, x: u32, y: u32, class: FeatureClass) {
        let i = self.index(x, y);
        self.labels[i] = class.code();
    }

    pub fn count(&self, class: FeatureClass) -> usize {
        let code = class.code();
        self.labels.iter().filter(|&&l| l == code).count()
    }

    pub fn same_dimensions(&self, other: &SegMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_codes_round_trip() {
        for c in FeatureClass::ALL {
            assert_eq!(FeatureClass::from_code(c.code()), Some(c));
            assert_eq!(c.name().parse::<FeatureClass>().unwrap(), c);
        }
        assert_eq!(FeatureClass::from_code(6), None);
        assert!("curb".parse::<FeatureClass>().is_err());
        assert_eq!(FeatureClass::MAPPABLE.len(), 5);
    }

    #[test]
    fn rejects_bad_masks() {
        assert!(matches!(
            SegMask::new(0, 3, vec![]),
            Err(MaskError::EmptyDimensions { .. })
        ));
        assert!(matches!(
            SegMask::new(2, 2, vec![0; 3]),
            Err(MaskError::BufferSize { .. })
        ));
        assert!(matches!(
            SegMask::new(2, 1, vec![0, 9]),
            Err(MaskError::UnknownLabel { label: 9, index: 1 })
        ));
    }

    #[test]
    fn serde_uses_snake_case_names() {
        let json = serde_json::to_string(&FeatureClass::TrafficSign).unwrap();
        assert_eq!(json, "\"traffic_sign\"");
    }
}
