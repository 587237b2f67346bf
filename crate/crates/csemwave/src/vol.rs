//! Flat 3D volume storage with x-fastest ordering.
//!
//! Index `(i1, i2, i3)` maps to `i1 + n1*(i2 + n2*i3)`, matching the on-disk
//! layout of model and field files.

/// Dense 3D array backed by a flat `Vec`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vol<T> {
    n1: usize,
    n2: usize,
    n3: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Vol<T> {
    pub fn filled(n1: usize, n2: usize, n3: usize, value: T) -> Self {
        Self {
            n1,
            n2,
            n3,
            data: vec![value; n1 * n2 * n3],
        }
    }

    pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n1 * n2 * n3, "volume size mismatch");
        Self { n1, n2, n3, data }
    }

    #[inline(always)]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    #[inline(always)]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline(always)]
    pub fn idx(&self, i1: usize, i2: usize, i3: usize) -> usize {
        debug_assert!(i1 < self.n1 && i2 < self.n2 && i3 < self.n3);
        i1 + self.n1 * (i2 + self.n2 * i3)
    }

    #[inline(always)]
    pub fn at(&self, i1: usize, i2: usize, i3: usize) -> T {
        self.data[self.idx(i1, i2, i3)]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, i1: usize, i2: usize, i3: usize) -> &mut T {
        let n = self.idx(i1, i2, i3);
        &mut self.data[n]
    }

    /// Apply `f` element-wise, producing a new volume.
    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Vol<U> {
        Vol {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T: Copy + num_traits::Zero> Vol<T> {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self::filled(n1, n2, n3, T::zero())
    }

    pub fn fill_zero(&mut self) {
        for v in &mut self.data {
            *v = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_fastest_layout() {
        let mut v = Vol::zeros(3, 4, 5);
        *v.at_mut(1, 0, 0) = 1.0;
        *v.at_mut(0, 1, 0) = 2.0;
        *v.at_mut(0, 0, 1) = 3.0;
        assert_eq!(v.data[1], 1.0);
        assert_eq!(v.data[3], 2.0);
        assert_eq!(v.data[12], 3.0);
    }
}
