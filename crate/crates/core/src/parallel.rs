//! Order-preserving parallel map over contiguous chunks, one chunk per worker.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Worker pool; a single worker runs everything on the calling thread.
pub(crate) struct Workers {
    count: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub(crate) fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        let pool = if count > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(count)
                    .build()
                    .map_err(|e| Error::config("workers", e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self { count, pool })
    }

    /// `items.iter().map(f)` with results in input order.
    pub(crate) fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        match &self.pool {
            Some(pool) if items.len() > 1 => {
                let chunk = items.len().div_ceil(self.count);
                pool.install(|| {
                    items
                        .par_chunks(chunk)
                        .map(|c| c.iter().map(&f).collect::<Vec<_>>())
                        .collect::<Vec<_>>()
                })
                .into_iter()
                .flatten()
                .collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    pub(crate) fn try_map<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync,
    {
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept_for_any_worker_count() {
        let items: Vec<u64> = (0..1000).collect();
        let one = Workers::new(1).unwrap().map(&items, |x| x * x);
        for n in [2, 3, 7, 16] {
            assert_eq!(Workers::new(n).unwrap().map(&items, |x| x * x), one);
        }
        assert!(Workers::new(0).is_err());
    }
}
