//! Model parameters as an ordered list of named, shaped f32 tensors.
//!
//! Values are stored in 32-bit precision — transfer-size accounting assumes
//! 32 bits per element — while all arithmetic on them accumulates in f64 (see
//! [`ParamVector::zip_with`]).

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
#[cfg(not(feature = "std"))]
use crate::fmath::F64Ext;

/// One named tensor of a model's parameter set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl Tensor {
    /// Number of elements implied by the shape.
    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

/// The full parameter set of a model: ordered, uniquely named tensors.
///
/// Order and names are a deterministic function of the model architecture,
/// so two `ParamVector`s from the same [`crate::model::ModelSpec`] always
/// align element-for-element.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamVector {
    pub tensors: Vec<Tensor>,
}

impl ParamVector {
    /// Builds a parameter vector from `(name, shape)` pairs, zero-filled.
    pub fn zeros(layout: &[(&str, Vec<usize>)]) -> Self {
        let tensors = layout
            .iter()
            .map(|(name, shape)| Tensor {
                name: String::from(*name),
                shape: shape.clone(),
                values: alloc::vec![0.0; shape.iter().product()],
            })
            .collect();
        ParamVector { tensors }
    }

    /// Zero-filled copy with the same layout.
    pub fn zeros_like(&self) -> Self {
        ParamVector {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    values: alloc::vec![0.0; t.values.len()],
                })
                .collect(),
        }
    }

    /// Total number of scalar parameters.
    pub fn element_count(&self) -> usize {
        self.tensors.iter().map(Tensor::element_count).sum()
    }

    /// Size of the uncompressed parameter set on the wire: 32 bits/element.
    pub fn bit_size_uncompressed(&self) -> u64 {
        32 * self.element_count() as u64
    }

    /// True when both vectors have identical names and shapes in order.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    /// Errors unless `other` shares this vector's layout.
    pub fn check_same_layout(&self, other: &Self) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Contract(String::from(
                "parameter vectors have different tensor layouts",
            )))
        }
    }

    /// Tensor accessor by name.
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Iterates over all values in layout order.
    pub fn iter_values(&self) -> impl Iterator<Item = f32> + '_ {
        self.tensors.iter().flat_map(|t| t.values.iter().copied())
    }

    /// Reads the value at a flat index spanning all tensors in order.
    pub fn get_flat(&self, mut index: usize) -> f32 {
        for t in &self.tensors {
            if index < t.values.len() {
                return t.values[index];
            }
            index -= t.values.len();
        }
        panic!("flat index out of range");
    }

    /// Writes the value at a flat index spanning all tensors in order.
    pub fn set_flat(&mut self, mut index: usize, value: f32) {
        for t in &mut self.tensors {
            if index < t.values.len() {
                t.values[index] = value;
                return;
            }
            index -= t.values.len();
        }
        panic!("flat index out of range");
    }

    /// Elementwise combination of two same-layout vectors.
    ///
    /// Operands are widened to f64, combined, and the result rounded back to
    /// f32 storage.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_layout(other)?;
        let tensors = self
            .tensors
            .iter()
            .zip(&other.tensors)
            .map(|(a, b)| Tensor {
                name: a.name.clone(),
                shape: a.shape.clone(),
                values: a
                    .values
                    .iter()
                    .zip(&b.values)
                    .map(|(&x, &y)| f(f64::from(x), f64::from(y)) as f32)
                    .collect(),
            })
            .collect();
        Ok(ParamVector { tensors })
    }

    /// True when every stored value is finite.
    pub fn all_finite(&self) -> bool {
        self.iter_values().all(f32::is_finite)
    }

    /// True when both vectors are identical down to the bit pattern.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.same_layout(other)
            && self
                .iter_values()
                .zip(other.iter_values())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Euclidean norm of the difference, accumulated in f64.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        self.iter_values()
            .zip(other.iter_values())
            .map(|(a, b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}
