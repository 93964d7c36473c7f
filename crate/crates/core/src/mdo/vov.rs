use crate::error::{Error, Result};

/// A vector of vectors: one flat buffer partitioned into fixed blocks.
///
/// Block boundaries are set at construction and never change; all mutation
/// goes through [`Vov::block_mut`], which preserves block lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Vov {
    data: Vec<f64>,
    offsets: Vec<usize>,
}

impl Vov {
    pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Self {
        let mut data = Vec::new();
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in blocks {
            data.extend_from_slice(b.as_ref());
            offsets.push(data.len());
        }
        Vov { data, offsets }
    }

    /// Builds a VoV with the given block lengths from a flat slice.
    pub fn from_flat(flat: &[f64], lengths: &[usize]) -> Result<Self> {
        let total: usize = lengths.iter().sum();
        if total != flat.len() {
            return Err(Error::DimensionMismatch {
                context: "Vov::from_flat",
                expected: total,
                got: flat.len(),
            });
        }
        let mut offsets = Vec::with_capacity(lengths.len() + 1);
        offsets.push(0);
        let mut acc = 0;
        for &l in lengths {
            acc += l;
            offsets.push(acc);
        }
        Ok(Vov {
            data: flat.to_vec(),
            offsets,
        })
    }

    pub fn zeros(lengths: &[usize]) -> Self {
        let total = lengths.iter().sum();
        Self::from_flat(&vec![0.0; total], lengths).expect("lengths sum to buffer size")
    }

    pub fn n_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block_lengths(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Block `i` (zero-based). Panics when out of range, like slice indexing.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        &mut self.data[a..b]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.offsets.windows(2).map(move |w| &self.data[w[0]..w[1]])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// All blocks except block `j` (zero-based), concatenated in order.
    pub fn exclude(&self, j: usize) -> Result<Vov> {
        if j >= self.n_blocks() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.n_blocks(),
            });
        }
        let kept: Vec<&[f64]> = self
            .blocks()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, b)| b)
            .collect();
        Ok(Vov::from_blocks(&kept))
    }

    /// Inverse of [`Vov::exclude`]: inserts `block` so that it becomes block `j`.
    pub fn insert(&self, j: usize, block: &[f64]) -> Result<Vov> {
        if j > self.n_blocks() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.n_blocks(),
            });
        }
        let mut blocks: Vec<&[f64]> = self.blocks().collect();
        blocks.insert(j, block);
        Ok(Vov::from_blocks(&blocks))
    }
}

/// Free-function form of [`Vov::exclude`].
pub fn vov_exclude(v: &Vov, j: usize) -> Result<Vov> {
    v.exclude(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blocks(v: &Vov) -> Vec<Vec<f64>> {
        v.blocks().map(|b| b.to_vec()).collect()
    }

    #[test]
    fn exclude_middle_first_last() {
        let v = Vov::from_blocks(&[vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(
            blocks(&vov_exclude(&v, 1).unwrap()),
            vec![vec![1.0], vec![3.0]]
        );

        let v = Vov::from_blocks(&[vec![1.0], vec![2.0]]);
        assert_eq!(blocks(&vov_exclude(&v, 0).unwrap()), vec![vec![2.0]]);

        let v = Vov::from_blocks(&[vec![1.0, 2.0], vec![3.0], vec![4.0, 5.0]]);
        assert_eq!(
            blocks(&vov_exclude(&v, 2).unwrap()),
            vec![vec![1.0, 2.0], vec![3.0]]
        );
    }

    #[test]
    fn exclude_out_of_range() {
        let v = Vov::from_blocks(&[vec![1.0], vec![2.0]]);
        assert!(matches!(
            v.exclude(2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn from_flat_checks_length() {
        assert!(Vov::from_flat(&[1.0, 2.0], &[1, 2]).is_err());
        let v = Vov::from_flat(&[1.0, 2.0, 3.0], &[1, 2]).unwrap();
        assert_eq!(v.block(1), &[2.0, 3.0]);
        assert_eq!(v.len(), 3);
    }

    proptest! {
        #[test]
        fn exclude_then_insert_round_trips(
            lens in prop::collection::vec(0usize..4, 1..6),
            seed in any::<u64>(),
            pick in any::<prop::sample::Index>(),
        ) {
            let total: usize = lens.iter().sum();
            let flat: Vec<f64> = (0..total).map(|k| (seed.wrapping_add(k as u64) % 97) as f64).collect();
            let v = Vov::from_flat(&flat, &lens).unwrap();
            let j = pick.index(lens.len());
            let rebuilt = v.exclude(j).unwrap().insert(j, v.block(j)).unwrap();
            prop_assert_eq!(rebuilt.len(), v.len());
            prop_assert_eq!(rebuilt, v);
        }
    }
}
