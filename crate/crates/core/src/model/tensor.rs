use crate::error::{Error, Result};

/// Dense row-major f64 array. Convolution stages use `[batch, channel,
/// time, freq]`; recurrent stages use `[time, feature]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [b, c, t, f] => Ok((b, c, t, f)),
            _ => Err(Error::shape(format!("expected a 4-d tensor, got shape {:?}", self.shape))),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [t, d] => Ok((t, d)),
            _ => Err(Error::shape(format!("expected a 2-d tensor, got shape {:?}", self.shape))),
        }
    }

    /// Channels `[start, end)` of a 4-d tensor.
    pub fn channel_slice(&self, start: usize, end: usize) -> Result<Tensor> {
        let (b, c, t, f) = self.dims4()?;
        if start > end || end > c {
            return Err(Error::shape(format!("channel range {start}..{end} out of 0..{c}")));
        }
        let plane = t * f;
        let mut data = Vec::with_capacity(b * (end - start) * plane);
        for bi in 0..b {
            data.extend_from_slice(&self.data[(bi * c + start) * plane..(bi * c + end) * plane]);
        }
        Ok(Tensor::from_raw(vec![b, end - start, t, f], data))
    }

    /// Stacks equally shaped 4-d tensors along the batch axis.
    pub fn stack_batch(items: &[Tensor]) -> Result<Tensor> {
        let first = items.first().ok_or_else(|| Error::shape("cannot stack zero tensors"))?;
        let (_, c, t, f) = first.dims4()?;
        let mut data = Vec::new();
        let mut b = 0;
        for it in items {
            let (bi, ci, ti, fi) = it.dims4()?;
            if (ci, ti, fi) != (c, t, f) {
                return Err(Error::shape(format!("cannot stack {:?} with {:?}", it.shape, first.shape)));
            }
            b += bi;
            data.extend_from_slice(&it.data);
        }
        Ok(Tensor::from_raw(vec![b, c, t, f], data))
    }

    pub fn batch_item(&self, index: usize) -> Result<Tensor> {
        let (b, c, t, f) = self.dims4()?;
        if index >= b {
            return Err(Error::shape(format!("batch index {index} out of 0..{b}")));
        }
        let n = c * t * f;
        Ok(Tensor::from_raw(vec![1, c, t, f], self.data[index * n..(index + 1) * n].to_vec()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
        let t = Tensor::new(vec![2, 3, 1, 1], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.channel_slice(1, 3).unwrap().data(), &[1.0, 2.0, 4.0, 5.0]);
        assert_eq!(t.batch_item(1).unwrap().data(), &[3.0, 4.0, 5.0]);
        let s = Tensor::stack_batch(&[t.batch_item(1).unwrap(), t.batch_item(0).unwrap()]).unwrap();
        assert_eq!(s.data(), &[3.0, 4.0, 5.0, 0.0, 1.0, 2.0]);
        assert!(t.dims2().is_err());
    }
}
