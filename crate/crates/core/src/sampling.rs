//! Deterministic low-discrepancy points and order-independent parallel maps.

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse of `index` in the `dimension`-th prime base.
pub fn halton(index: usize, dimension: usize) -> f64 {
    let base = PRIMES[dimension % PRIMES.len()] as usize;
    let mut i = index;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `f` over `0..n`, in parallel when the feature is on; the output order is the index order.
pub(crate) fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two_and_three() {
        let b2: Vec<f64> = (0..5).map(|i| halton(i, 0)).collect();
        assert_eq!(b2, vec![0.0, 0.5, 0.25, 0.75, 0.125]);
        assert!((halton(4, 1) - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn map_keeps_order() {
        assert_eq!(map_indices(100, |i| i * 2), (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
