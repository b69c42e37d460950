use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{unbounded, Receiver, Sender};

use super::graph::CandidateStarSet;
use super::prune::{prune, prune_rng, PruneTrace, UniformPicker};
use crate::network::RoadMap;

/// Worker threads that prune candidate star-sets popped from a shared queue.
pub struct PrunePool {
    jobs: Option<Sender<CandidateStarSet>>,
    results: Receiver<(CandidateStarSet, PruneTrace)>,
    workers: Vec<JoinHandle<()>>,
}

impl PrunePool {
    pub fn new(map: Arc<RoadMap>, seed: u64, workers: usize) -> Self {
        let (job_tx, job_rx) = unbounded::<CandidateStarSet>();
        let (res_tx, res_rx) = unbounded();
        let workers = (0..workers.max(1))
            .map(|i| {
                let (rx, tx, map) = (job_rx.clone(), res_tx.clone(), map.clone());
                std::thread::Builder::new()
                    .name(format!("prune-{i}"))
                    .spawn(move || {
                        for cand in rx {
                            let mut picker = UniformPicker(prune_rng(seed, cand.id));
                            let trace = prune(&cand, &map.stars, &mut picker);
                            if tx.send((cand, trace)).is_err() {
                                break;
                            }
                        }
                    })
                    .expect("spawn pruning worker")
            })
            .collect();
        PrunePool {
            jobs: Some(job_tx),
            results: res_rx,
            workers,
        }
    }

    /// Prunes a batch; results come back ordered by candidate id.
    pub fn prune_all(&self, batch: Vec<CandidateStarSet>) -> Vec<(CandidateStarSet, PruneTrace)> {
        let n = batch.len();
        let jobs = self.jobs.as_ref().expect("pool running");
        for cand in batch {
            jobs.send(cand).expect("pruning workers alive");
        }
        let mut out: Vec<_> = (0..n)
            .map(|_| self.results.recv().expect("pruning worker result"))
            .collect();
        out.sort_by_key(|(c, _)| c.id);
        out
    }
}

impl Drop for PrunePool {
    fn drop(&mut self) {
        self.jobs.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}
