//! Dense tensors: numeric frame components and jet-valued leaf fields.

use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variance {
    Up,
    Down,
}

/// Which index range a slot runs over: the full frame `0..n` or the leaf `2..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Full,
    Leaf,
}

/// Row-major multi-index helpers.
pub(crate) fn unravel(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

pub(crate) fn ravel(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| {
        debug_assert!(i < d);
        acc * d + i
    })
}

/// Numeric tensor components in the partly null frame at one point.
///
/// Leaf slots are stored 0-based; index `a` corresponds to the printed leaf
/// label `a + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    n: usize,
    slots: Vec<(Variance, Basis)>,
    data: Vec<f64>,
}

impl FrameTensor {
    pub fn zeros(n: usize, slots: Vec<(Variance, Basis)>) -> FrameTensor {
        let len = slots
            .iter()
            .map(|s| slot_dim(n, s.1))
            .product();
        FrameTensor { n, slots, data: vec![0.0; len] }
    }

    pub fn from_fn(
        n: usize,
        slots: Vec<(Variance, Basis)>,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> FrameTensor {
        let mut t = FrameTensor::zeros(n, slots);
        let dims = t.dims();
        let mut idx = vec![0; dims.len()];
        for flat in 0..t.data.len() {
            unravel(flat, &dims, &mut idx);
            t.data[flat] = f(&idx);
        }
        t
    }

    /// Leaf tensor with the given variances.
    pub fn leaf(n: usize, variance: &[Variance], data: Vec<f64>) -> FrameTensor {
        let slots: Vec<_> = variance.iter().map(|&v| (v, Basis::Leaf)).collect();
        let t = FrameTensor::zeros(n, slots);
        assert_eq!(t.data.len(), data.len(), "component count does not match valence");
        FrameTensor { data, ..t }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> &[(Variance, Basis)] {
        &self.slots
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.slots.iter().map(|s| slot_dim(self.n, s.1)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[ravel(idx, &self.dims())]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let k = ravel(idx, &self.dims());
        self.data[k] = value;
    }

    /// Printed label of internal index `i` in slot `slot`.
    pub fn label(&self, slot: usize, i: usize) -> usize {
        match self.slots[slot].1 {
            Basis::Full => i,
            Basis::Leaf => i + 2,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Max-norm of the difference; panics if the valences differ.
    pub fn max_abs_diff(&self, other: &FrameTensor) -> f64 {
        assert_eq!(self.slots, other.slots, "tensor valences differ");
        assert_eq!(self.n, other.n, "tensor dimensions differ");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> FrameTensor {
        FrameTensor { data: self.data.iter().map(|x| x * s).collect(), ..self.clone() }
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        assert_eq!(self.rank(), 2, "not a two-slot tensor");
        let d = self.dims();
        nalgebra::DMatrix::from_row_slice(d[0], d[1], &self.data)
    }
}

fn slot_dim(n: usize, basis: Basis) -> usize {
    match basis {
        Basis::Full => n,
        Basis::Leaf => n - 2,
    }
}

/// Leaf tensor field whose components are jets about a base point.
#[derive(Debug, Clone)]
pub struct JetTensor {
    variance: Vec<Variance>,
    dim: usize,
    data: Vec<Jet>,
}

impl JetTensor {
    pub fn from_fn(
        variance: Vec<Variance>,
        dim: usize,
        mut f: impl FnMut(&[usize]) -> Jet,
    ) -> JetTensor {
        let dims = vec![dim; variance.len()];
        let len = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let data = (0..len)
            .map(|flat| {
                unravel(flat, &dims, &mut idx);
                f(&idx)
            })
            .collect();
        JetTensor { variance, dim, data }
    }

    pub fn scalar(j: Jet) -> JetTensor {
        JetTensor { variance: Vec::new(), dim: 0, data: vec![j] }
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Jet] {
        &self.data
    }

    fn dims(&self) -> Vec<usize> {
        vec![self.dim; self.rank()]
    }

    pub fn at(&self, idx: &[usize]) -> &Jet {
        &self.data[ravel(idx, &self.dims())]
    }

    pub fn order(&self) -> usize {
        self.data.iter().map(|j| j.order()).min().unwrap_or(0)
    }

    /// Componentwise partial derivative in jet variable `var`.
    pub fn partial(&self, var: usize) -> JetTensor {
        JetTensor {
            variance: self.variance.clone(),
            dim: self.dim,
            data: self.data.iter().map(|j| j.diff(var)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> JetTensor {
        JetTensor { variance: self.variance.clone(), dim: self.dim, data: self.data.iter().map(f).collect() }
    }

    /// Same components with a different valence label (index raising is done by callers).
    pub fn with_variance(mut self, variance: Vec<Variance>) -> JetTensor {
        assert_eq!(variance.len(), self.rank());
        self.variance = variance;
        self
    }

    /// Constant terms as a leaf frame tensor for an `n`-dimensional chart.
    pub fn values(&self, n: usize) -> FrameTensor {
        FrameTensor::leaf(n, &self.variance, self.data.iter().map(|j| j.value()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let dims = [2, 3, 4];
        let mut idx = [0; 3];
        for flat in 0..24 {
            unravel(flat, &dims, &mut idx);
            assert_eq!(ravel(&idx, &dims), flat);
        }
    }

    #[test]
    fn frame_tensor_labels() {
        let t = FrameTensor::zeros(5, vec![(Variance::Up, Basis::Full), (Variance::Down, Basis::Leaf)]);
        assert_eq!(t.dims(), vec![5, 3]);
        assert_eq!(t.label(1, 0), 2);
        assert_eq!(t.label(0, 1), 1);
    }
}
