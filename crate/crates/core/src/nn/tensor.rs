use std::io::{BufRead, Write};

use super::NnError;

/// Dense row-major n-dimensional array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same data, new shape with identical element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<(), NnError> {
        if self.shape != shape {
            return Err(NnError::ShapeMismatch(format!(
                "{what}: expected {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    pub fn expect_rank(&self, rank: usize, what: &str) -> Result<(), NnError> {
        if self.shape.len() != rank {
            return Err(NnError::ShapeMismatch(format!(
                "{what}: expected rank {rank}, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Rejects NaN and infinities.
    pub fn check_finite(&self, what: &str) -> Result<(), NnError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(NnError::NonFinite(format!("{what}: element {i} is {}", self.data[i]))),
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<(), NnError> {
        other.expect_shape(&self.shape, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rounds every element to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }

    /// Contiguous slice of the leading-axis entry `index`.
    pub fn outer(&self, index: usize) -> &[f64] {
        let stride = self.data.len() / self.shape[0];
        &self.data[index * stride..(index + 1) * stride]
    }

    pub fn outer_mut(&mut self, index: usize) -> &mut [f64] {
        let stride = self.data.len() / self.shape[0];
        &mut self.data[index * stride..(index + 1) * stride]
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Debug dump: a text header line `tensor <d0> <d1> ...` followed by
    /// little-endian `f32` values.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dims: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
        writeln!(w, "tensor {}", dims.join(" "))?;
        for v in &self.data {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(mut r: R) -> Result<Self, NnError> {
        let mut header = String::new();
        r.read_line(&mut header)
            .map_err(|e| NnError::Dump(e.to_string()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(NnError::Dump("missing `tensor` header".into()));
        }
        let shape = parts
            .map(|p| p.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| NnError::Dump(format!("bad dimension: {e}")))?;
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)
            .map_err(|e| NnError::Dump(e.to_string()))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Tensor::new(shape, data)
    }
}
