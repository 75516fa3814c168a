use super::NnError;
use crate::num::Scalar;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![S::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self, NnError> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(NnError::ShapeMismatch {
                op: "tensor",
                left: shape.to_vec(),
                right: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = S::zero());
    }

    pub fn is_finite(&self) -> bool {
        // x * 0 is 0 for finite x and NaN otherwise; the chunked sum vectorizes.
        let mut acc = [S::zero(); 8];
        let chunks = self.data.chunks_exact(8);
        let tail = chunks.remainder();
        for c in chunks {
            for (a, &x) in acc.iter_mut().zip(c) {
                *a = *a + x * S::zero();
            }
        }
        acc.iter().all(|a| *a == S::zero()) && tail.iter().all(|x| x.is_finite())
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[S] {
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec<S> {
    len: usize,
    idx: Vec<u32>,
    val: Vec<S>,
}

impl<S: Scalar> SparseVec<S> {
    pub fn new(len: usize, idx: Vec<u32>, val: Vec<S>) -> Result<Self, NnError> {
        if idx.len() != val.len() {
            return Err(NnError::ShapeMismatch {
                op: "sparse",
                left: vec![idx.len()],
                right: vec![val.len()],
            });
        }
        for w in idx.windows(2) {
            if w[0] >= w[1] {
                return Err(NnError::Invalid("sparse indices must increase".into()));
            }
        }
        if let Some(&last) = idx.last() {
            if last as usize >= len {
                return Err(NnError::IndexOutOfRange {
                    index: last as usize,
                    len,
                });
            }
        }
        Ok(SparseVec { len, idx, val })
    }

    /// Keeps every entry, zeros included, so gradients exist for all of them.
    pub fn from_dense(v: &[S]) -> Self {
        SparseVec {
            len: v.len(),
            idx: (0..v.len() as u32).collect(),
            val: v.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.idx
    }

    pub fn values(&self) -> &[S] {
        &self.val
    }

    pub fn to_dense(&self) -> Vec<S> {
        let mut v = vec![S::zero(); self.len];
        for (&i, &x) in self.idx.iter().zip(&self.val) {
            v[i as usize] = x;
        }
        v
    }

    /// Moves entry `i` to `perm[i]`; `perm` must be a permutation of `0..len`.
    pub fn permuted(&self, perm: &[u32]) -> SparseVec<S> {
        debug_assert_eq!(perm.len(), self.len);
        let mut pairs: Vec<(u32, S)> = self.idx.iter().zip(&self.val).map(|(&i, &v)| (perm[i as usize], v)).collect();
        pairs.sort_unstable_by_key(|e| e.0);
        let (idx, val) = pairs.into_iter().unzip();
        SparseVec { len: self.len, idx, val }
    }

    /// `self ⧺ other`, with `other`'s indices shifted by `self.len()`.
    pub fn concat(&self, other: &SparseVec<S>) -> SparseVec<S> {
        let off = self.len as u32;
        let mut idx = Vec::with_capacity(self.nnz() + other.nnz());
        idx.extend_from_slice(&self.idx);
        idx.extend(other.idx.iter().map(|i| i + off));
        let mut val = Vec::with_capacity(idx.len());
        val.extend_from_slice(&self.val);
        val.extend_from_slice(&other.val);
        SparseVec {
            len: self.len + other.len,
            idx,
            val,
        }
    }

    /// `self ⧺ dense`; the dense block occupies the last `dense.len()` entries.
    pub fn append_dense(&self, dense: &[S]) -> SparseVec<S> {
        self.concat(&SparseVec::from_dense(dense))
    }
}
