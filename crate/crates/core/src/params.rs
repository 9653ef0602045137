//! Flat parameter and gradient vectors with a named-segment layout.
//!
//! All trainable state (weights, biases, learnable per-step inner learning
//! rates) lives in one flat `Vec<f64>` so the optimizer, the differentiation
//! engine and the checkpoint format all see the same indexing.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One named, contiguous slice of the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Named-segment map over a flat vector. Segments are disjoint and cover the
/// whole vector by construction (offsets are assigned consecutively).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<Segment>,
    total: usize,
}

impl Layout {
    pub fn new(segments: impl IntoIterator<Item = (impl Into<String>, usize)>) -> Self {
        let mut out = Vec::new();
        let mut offset = 0;
        for (name, len) in segments {
            out.push(Segment {
                name: name.into(),
                offset,
                len,
            });
            offset += len;
        }
        Layout {
            segments: out,
            total: offset,
        }
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Index range of a named segment.
    pub fn range(&self, name: &str) -> Result<Range<usize>> {
        self.segment(name)
            .map(|s| s.offset..s.offset + s.len)
            .ok_or_else(|| Error::Structural(format!("layout has no segment named `{name}`")))
    }
}

/// Flat view of all trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    layout: Arc<Layout>,
    values: Vec<f64>,
}

impl ParameterVector {
    /// Build from a layout and matching values. Rejects length mismatches and
    /// non-finite entries.
    pub fn new(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::Structural(format!(
                "parameter vector has {} values but layout covers {}",
                values.len(),
                layout.total_len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "parameter vector has non-finite value at index {i}"
            )));
        }
        Ok(ParameterVector { layout, values })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for optimizer updates. Callers that may produce
    /// non-finite values must follow up with [`ParameterVector::check_finite`].
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segment(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.values[self.layout.range(name)?])
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "parameter vector has non-finite value at index {i}"
            )));
        }
        Ok(())
    }
}

/// Gradient with the same layout as the parameter vector it differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    layout: Arc<Layout>,
    values: Vec<f64>,
}

impl GradientVector {
    pub fn new(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::Structural(format!(
                "gradient vector has {} values but layout covers {}",
                values.len(),
                layout.total_len()
            )));
        }
        Ok(GradientVector { layout, values })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let n = layout.total_len();
        GradientVector {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "gradient vector has non-finite value at index {i}"
            )));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &GradientVector) -> Result<f64> {
        self.same_layout(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn same_layout(&self, other: &GradientVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Structural(
                "gradient vectors have different layouts".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Arc<Layout> {
        Arc::new(Layout::new([("w", 3usize), ("b", 2usize)]))
    }

    #[test]
    fn segments_are_disjoint_and_cover() {
        let l = layout();
        assert_eq!(l.total_len(), 5);
        assert_eq!(l.range("w").unwrap(), 0..3);
        assert_eq!(l.range("b").unwrap(), 3..5);
        assert!(l.range("missing").is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(ParameterVector::new(layout(), vec![0.0; 4]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut v = vec![0.0; 5];
        v[2] = f64::NAN;
        assert!(matches!(
            ParameterVector::new(layout(), v),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn segment_views() {
        let p = ParameterVector::new(layout(), vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(p.segment("b").unwrap(), &[4.0, 5.0]);
    }

    #[test]
    fn dot_requires_same_layout() {
        let a = GradientVector::new(layout(), vec![1.0; 5]).unwrap();
        let other = Arc::new(Layout::new([("w", 5usize)]));
        let b = GradientVector::new(other, vec![1.0; 5]).unwrap();
        assert!(a.dot(&b).is_err());
    }
}
