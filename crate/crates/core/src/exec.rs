//! Serial/parallel execution of independent per-item work.

/// How per-particle (or per-frame, per-cell) work is scheduled.
///
/// Results are identical under both policies; only wall time differs. Without the
/// `parallel` feature, `Parallel` runs serially.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Execution {
    Serial,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f(index, item)` to every element of `items`.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
            return;
        }
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_under_both_policies() {
        let serial = Execution::Serial.map(1000, |i| i * i);
        let parallel = Execution::Parallel.map(1000, |i| i * i);
        assert_eq!(serial, parallel);
        assert_eq!(serial[31], 961);
    }

    #[test]
    fn for_each_mut_sees_indices() {
        let mut v = vec![0usize; 100];
        Execution::Parallel.for_each_mut(&mut v, |i, x| *x = 2 * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
