//! Counter-based random streams and the deterministic replicate engine.
//!
//! Replicate `i` of a run with master seed `s` draws from ChaCha8 keyed by
//! `s` on stream `i`; the draw counter is ChaCha's word position. A
//! replicate's draws therefore depend only on `(s, i)`, never on which
//! worker runs it. Replicates are grouped into fixed-size chunks, each
//! folded sequentially, and chunk accumulators are merged in chunk order,
//! so results (including floating-point sums) are bit-identical for any
//! worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Replicates per chunk. Part of the determinism contract: changing it
/// changes floating-point summation order.
pub const CHUNK: u64 = 4096;

/// The random stream owned by one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateStream {
    rng: ChaCha8Rng,
    replicate: u64,
}

impl ReplicateStream {
    pub fn new(master_seed: u64, replicate: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(replicate);
        Self { rng, replicate }
    }

    fn from_base(base: &ChaCha8Rng, replicate: u64) -> Self {
        let mut rng = base.clone();
        rng.set_stream(replicate);
        Self { rng, replicate }
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    /// Number of 32-bit words consumed so far.
    pub fn draw_counter(&self) -> u128 {
        self.rng.get_word_pos()
    }
}

impl RngCore for ReplicateStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Order-sensitive merge of per-chunk accumulators.
pub trait Merge {
    fn merge(&mut self, later: Self);
}

/// Runs `replicates` independent replicates and folds them into an accumulator.
///
/// `workers = None` uses the global rayon pool. The result does not depend
/// on `workers`.
pub fn run_replicates<A, E, I, F>(
    master_seed: u64,
    replicates: u64,
    workers: Option<usize>,
    init: I,
    body: F,
) -> Result<A, E>
where
    A: Merge + Send,
    E: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &mut ReplicateStream) -> Result<(), E> + Sync,
{
    let base = ChaCha8Rng::seed_from_u64(master_seed);
    let chunks = replicates.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let end = ((c + 1) * CHUNK).min(replicates);
                for i in c * CHUNK..end {
                    let mut stream = ReplicateStream::from_base(&base, i);
                    body(&mut acc, &mut stream)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<A>, E>>()
    };
    let parts = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(work)?,
        None => work()?,
    };
    let mut parts = parts.into_iter();
    let mut total = parts.next().unwrap_or_else(&init);
    for p in parts {
        total.merge(p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[derive(Default)]
    struct Trace(Vec<(u64, u64)>, f64);

    impl Merge for Trace {
        fn merge(&mut self, later: Self) {
            self.0.extend(later.0);
            self.1 += later.1;
        }
    }

    fn trace(workers: Option<usize>) -> Trace {
        run_replicates::<_, (), _, _>(99, 10_000, workers, Trace::default, |acc, s| {
            let v: u64 = s.random();
            acc.0.push((s.replicate(), v));
            acc.1 += s.random::<f64>();
            Ok(())
        })
        .unwrap()
    }

    #[test]
    fn streams_depend_only_on_seed_and_index() {
        let a = trace(Some(1));
        let b = trace(Some(8));
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert_eq!(a.0.len(), 10_000);
        assert!(a.0.iter().enumerate().all(|(i, (r, _))| *r == i as u64));
        let mut direct = ReplicateStream::new(99, 4321);
        assert_eq!(a.0[4321].1, direct.random::<u64>());
        assert_eq!(direct.draw_counter(), 2);
    }

    #[test]
    fn errors_propagate() {
        let r = run_replicates(1, 100, Some(2), || (), |_, s| {
            if s.replicate() == 57 {
                Err(s.replicate())
            } else {
                Ok(())
            }
        });
        assert_eq!(r, Err(57));
    }

    impl Merge for () {
        fn merge(&mut self, _: Self) {}
    }
}
