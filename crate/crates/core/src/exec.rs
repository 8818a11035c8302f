//! Sequential / parallel execution switch for the data-parallel loops.
//!
//! Every hot loop in the crate (mask warping, voting, rendering, batch
//! capture processing) goes through the helpers here so that the same code
//! path can be benchmarked both ways. Without the `parallel` feature,
//! [`Exec::Parallel`] silently degrades to sequential execution.

/// Execution strategy for data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Whether work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `0..n`, preserving index order in the output.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over a slice, preserving order.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Fills `buf` row by row; `f(row, row_slice)` writes one row of `width` cells.
    pub fn fill_rows<T, F>(self, buf: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            buf.par_chunks_mut(width)
                .enumerate()
                .for_each(|(y, row)| f(y, row));
            return;
        }
        buf.chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_agree() {
        let seq = Exec::Sequential.map_range(100, |i| i * i);
        let par = Exec::Parallel.map_range(100, |i| i * i);
        assert_eq!(seq, par);

        let mut a = vec![0u32; 12];
        let mut b = vec![0u32; 12];
        Exec::Sequential.fill_rows(&mut a, 4, |y, row| {
            for (x, c) in row.iter_mut().enumerate() {
                *c = (y * 10 + x) as u32;
            }
        });
        Exec::Parallel.fill_rows(&mut b, 4, |y, row| {
            for (x, c) in row.iter_mut().enumerate() {
                *c = (y * 10 + x) as u32;
            }
        });
        assert_eq!(a, b);
        assert_eq!(a[5], 11);
    }
}
