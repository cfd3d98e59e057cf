//! Hamiltonian application over worker ranks that talk only through
//! channels.
//!
//! Rank (b, t, m) owns the output block σ[rows_m(α slice of b), β slice of
//! b]. Per application:
//!
//! 1. ring: every basis ring (fixed t, m) circulates the owned ψ blocks so
//!    each rank sees all B of them after B − 1 shifts;
//! 2. compute: a rank adds the contributions of the α sources assigned to
//!    its task replica t;
//! 3. reduce: partial outputs of the T replicas are summed along a fixed
//!    binary tree rooted at t = 0;
//! 4. gather: each t = 0 rank sends its finished block to the caller, which
//!    concatenates the M row slices.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, RecvTimeoutError, SyncSender};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::balance::{balance_tasks, round_robin, TaskAssignment};
use super::partition::{PartitionPlan, RankId};
use crate::sci::{CIVector, LinearOperator, SubspaceHamiltonian};
use crate::{Error, Result};

pub const DEFAULT_WATCHDOG: Duration = Duration::from_secs(30);

#[derive(Clone, Debug)]
pub struct EngineOptions {
    /// LPT task assignment when true, round-robin otherwise.
    pub balance: bool,
    /// Longest a rank waits on any single receive.
    pub watchdog: Duration,
    /// Fault injection: this rank silently skips its sends in the named
    /// phase ("shift", "reduce" or "gather").
    #[doc(hidden)]
    pub stall: Option<(usize, &'static str)>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            balance: true,
            watchdog: DEFAULT_WATCHDOG,
            stall: None,
        }
    }
}

/// Messages sent per kind during one application.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub shifts: usize,
    pub reductions: usize,
    pub gathers: usize,
}

impl MessageCounts {
    /// The pattern a correct application produces.
    pub fn expected(plan: &PartitionPlan) -> Self {
        let b = plan.basis_ranks();
        MessageCounts {
            shifts: plan.rank_count() * (b - 1),
            reductions: b * plan.m * (plan.t - 1),
            gathers: b * plan.m,
        }
    }

    fn add(&mut self, o: MessageCounts) {
        self.shifts += o.shifts;
        self.reductions += o.reductions;
        self.gathers += o.gathers;
    }
}

#[derive(Clone, Debug)]
pub struct DistributedReport {
    /// Row-major σ = Hψ over the full subspace.
    pub sigma: Vec<f64>,
    pub counts: MessageCounts,
    /// Accumulated block-entry updates per rank, indexed by linear rank.
    pub rank_work: Vec<u64>,
}

/// Task sizes along the α axis: coupled rows of each source half.
pub fn task_sizes(ham: &SubspaceHamiltonian) -> Vec<u64> {
    let t = ham.alpha_table();
    (0..t.len()).map(|s| t.connections(s) as u64 + 1).collect()
}

pub fn assign_tasks(ham: &SubspaceHamiltonian, t: usize, balance: bool) -> Result<TaskAssignment> {
    let sizes = task_sizes(ham);
    if balance {
        balance_tasks(&sizes, t)
    } else {
        round_robin(&sizes, t)
    }
}

struct Block {
    origin: usize,
    data: Vec<f64>,
}

struct Partial {
    from_t: usize,
    data: Vec<f64>,
}

struct Finished {
    b: usize,
    m: usize,
    data: Vec<f64>,
}

#[derive(Default)]
struct Counters {
    shifts: AtomicUsize,
    reductions: AtomicUsize,
    gathers: AtomicUsize,
}

struct Ctx<'a> {
    ham: &'a SubspaceHamiltonian,
    plan: &'a PartitionPlan,
    owner: &'a [usize],
    psi: &'a [f64],
    opts: &'a EngineOptions,
    counters: &'a Counters,
}

impl Ctx<'_> {
    fn stalled(&self, rank: usize, phase: &str) -> bool {
        self.opts.stall.is_some_and(|(r, p)| r == rank && p == phase)
    }

    fn deadlock(&self, rank: usize, phase: &'static str) -> Error {
        Error::Deadlock {
            rank,
            phase,
            timeout_ms: self.opts.watchdog.as_millis(),
        }
    }

    fn recv<T>(&self, rx: &Receiver<T>, peer: usize, phase: &'static str) -> Result<T> {
        rx.recv_timeout(self.opts.watchdog).map_err(|e| match e {
            RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected => self.deadlock(peer, phase),
        })
    }
}

struct Wiring {
    ring_tx: SyncSender<Block>,
    ring_rx: Receiver<Block>,
    reduce_rx: Receiver<Partial>,
    reduce_tx: Vec<SyncSender<Partial>>,
    gather_tx: SyncSender<Finished>,
}

fn owned_block(ctx: &Ctx, b: usize) -> Vec<f64> {
    let (a, c) = ctx.plan.block(b);
    let nb = ctx.plan.dims().1;
    let mut out = Vec::with_capacity(a.len() * c.len());
    for row in a {
        out.extend_from_slice(&ctx.psi[row * nb + c.start..row * nb + c.end]);
    }
    out
}

fn run_rank(ctx: &Ctx, me: usize, w: Wiring) -> Result<u64> {
    let plan = ctx.plan;
    let id = plan.rank_id(me);
    let nbasis = plan.basis_ranks();
    let (_, out_cols) = plan.block(id.b);
    let rows = plan.row_slices[id.b / plan.b_beta][id.m].clone();
    let ncols = out_cols.len();
    let mut out = vec![0.0; rows.len() * ncols];
    let mut work = 0u64;
    let prev = plan.rank_index(RankId {
        b: (id.b + nbasis - 1) % nbasis,
        ..id
    });

    let mut held = Block {
        origin: id.b,
        data: owned_block(ctx, id.b),
    };
    for step in 0..nbasis {
        let last = step + 1 == nbasis;
        if !last && !ctx.stalled(me, "shift") {
            let next = plan.rank_index(RankId {
                b: (id.b + 1) % nbasis,
                ..id
            });
            w.ring_tx
                .send(Block {
                    origin: held.origin,
                    data: held.data.clone(),
                })
                .map_err(|_| ctx.deadlock(next, "shift"))?;
            ctx.counters.shifts.fetch_add(1, Ordering::Relaxed);
        }

        let (src_alpha, src_cols) = plan.block(held.origin);
        let width = src_cols.len();
        for (r, row) in rows.clone().enumerate() {
            let dst = &mut out[r * ncols..(r + 1) * ncols];
            for (src, coupling) in ctx.ham.alpha_couplings(row) {
                if src < src_alpha.start || src >= src_alpha.end || ctx.owner[src] != id.t {
                    continue;
                }
                let off = (src - src_alpha.start) * width;
                ctx.ham.accumulate_block(
                    row,
                    coupling,
                    src_cols.clone(),
                    &held.data[off..off + width],
                    out_cols.clone(),
                    dst,
                );
                work += (ncols * width.max(1)) as u64;
            }
        }

        if !last {
            held = ctx.recv(&w.ring_rx, prev, "shift")?;
        }
    }

    // fixed binary tree over t; partner t + s is always folded in at level s
    let mut pending: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut s = 1;
    while s < plan.t {
        if id.t.is_multiple_of(2 * s) {
            let child = id.t + s;
            if child < plan.t {
                let data = loop {
                    if let Some(d) = pending.remove(&child) {
                        break d;
                    }
                    let peer = plan.rank_index(RankId { t: child, ..id });
                    let msg = ctx.recv(&w.reduce_rx, peer, "reduce")?;
                    pending.insert(msg.from_t, msg.data);
                };
                out.iter_mut().zip(&data).for_each(|(a, b)| *a += b);
            }
        } else {
            let parent = id.t - s;
            if !ctx.stalled(me, "reduce") {
                w.reduce_tx[parent]
                    .send(Partial {
                        from_t: id.t,
                        data: out,
                    })
                    .map_err(|_| ctx.deadlock(plan.rank_index(RankId { t: parent, ..id }), "reduce"))?;
                ctx.counters.reductions.fetch_add(1, Ordering::Relaxed);
            }
            return Ok(work);
        }
        s *= 2;
    }

    if !ctx.stalled(me, "gather") {
        w.gather_tx
            .send(Finished {
                b: id.b,
                m: id.m,
                data: out,
            })
            .map_err(|_| ctx.deadlock(me, "gather"))?;
        ctx.counters.gathers.fetch_add(1, Ordering::Relaxed);
    }
    Ok(work)
}

/// σ = Hψ computed by `plan.rank_count()` message-passing ranks.
pub fn distributed_apply(
    ham: &SubspaceHamiltonian,
    psi: &[f64],
    plan: &PartitionPlan,
    opts: &EngineOptions,
) -> Result<DistributedReport> {
    let assignment = assign_tasks(ham, plan.t, opts.balance)?;
    distributed_apply_with(ham, psi, plan, &assignment, opts)
}

/// As [`distributed_apply`] with a precomputed task assignment.
pub fn distributed_apply_with(
    ham: &SubspaceHamiltonian,
    psi: &[f64],
    plan: &PartitionPlan,
    assignment: &TaskAssignment,
    opts: &EngineOptions,
) -> Result<DistributedReport> {
    let basis = ham.basis();
    let (da, db) = (basis.dim_alpha(), basis.dim_beta());
    if plan.dims() != (da, db) {
        return Err(Error::BasisMismatch(format!(
            "plan covers {:?}, subspace is ({da}, {db})",
            plan.dims()
        )));
    }
    if psi.len() != da * db {
        return Err(Error::BasisMismatch(format!("ψ has {} entries, subspace {}", psi.len(), da * db)));
    }
    if assignment.replica.len() != da || assignment.replicas() != plan.t {
        return Err(Error::Contract("task assignment does not match plan".into()));
    }

    let nranks = plan.rank_count();
    let nbasis = plan.basis_ranks();
    let counters = Counters::default();
    let ctx = Ctx {
        ham,
        plan,
        owner: &assignment.replica,
        psi,
        opts,
        counters: &counters,
    };

    let mut ring: Vec<(SyncSender<Block>, Option<Receiver<Block>>)> = (0..nranks)
        .map(|_| {
            let (tx, rx) = sync_channel(nbasis);
            (tx, Some(rx))
        })
        .collect();
    let mut reduce: Vec<(SyncSender<Partial>, Option<Receiver<Partial>>)> = (0..nranks)
        .map(|_| {
            let (tx, rx) = sync_channel(plan.t);
            (tx, Some(rx))
        })
        .collect();
    let (gather_tx, gather_rx) = sync_channel::<Finished>(nbasis * plan.m);

    let mut wirings = Vec::with_capacity(nranks);
    for me in 0..nranks {
        let id = plan.rank_id(me);
        let next = plan.rank_index(RankId {
            b: (id.b + 1) % nbasis,
            ..id
        });
        wirings.push(Wiring {
            ring_tx: ring[next].0.clone(),
            ring_rx: ring[me].1.take().expect("one receiver per rank"),
            reduce_rx: reduce[me].1.take().expect("one receiver per rank"),
            reduce_tx: (0..plan.t)
                .map(|t| reduce[plan.rank_index(RankId { t, ..id })].0.clone())
                .collect(),
            gather_tx: gather_tx.clone(),
        });
    }
    drop(ring);
    drop(reduce);
    drop(gather_tx);

    let results: Mutex<Vec<Option<Result<u64>>>> = Mutex::new((0..nranks).map(|_| None).collect());
    let mut sigma = vec![0.0; da * db];
    let collected: Result<()> = std::thread::scope(|scope| {
        for (me, w) in wirings.into_iter().enumerate() {
            let ctx = &ctx;
            let results = &results;
            std::thread::Builder::new()
                .name(format!("rank-{me}"))
                .spawn_scoped(scope, move || {
                    let r = run_rank(ctx, me, w);
                    results.lock().expect("result slot")[me] = Some(r);
                })
                .map_err(|e| Error::io("thread spawn", e))?;
        }
        let mut missing: Vec<(usize, usize)> = (0..nbasis).flat_map(|b| (0..plan.m).map(move |m| (b, m))).collect();
        while !missing.is_empty() {
            let (b, m) = missing[0];
            let waiting_on = plan.rank_index(RankId { b, t: 0, m });
            let f = ctx.recv(&gather_rx, waiting_on, "gather")?;
            missing.retain(|&k| k != (f.b, f.m));
            let rows = plan.row_slices[f.b / plan.b_beta][f.m].clone();
            let cols = plan.block(f.b).1;
            for (r, row) in rows.enumerate() {
                sigma[row * db + cols.start..row * db + cols.end]
                    .copy_from_slice(&f.data[r * cols.len()..(r + 1) * cols.len()]);
            }
        }
        Ok(())
    });

    let results: Vec<Option<Result<u64>>> = results.into_inner().expect("ranks joined");
    let mut rank_work = vec![0u64; nranks];
    let mut errors: Vec<(usize, Error)> = Vec::new();
    let mut silent = vec![false; nranks];
    for (me, r) in results.into_iter().enumerate() {
        match r {
            Some(Ok(w)) => {
                rank_work[me] = w;
                silent[me] = true;
            }
            Some(Err(e)) => errors.push((me, e)),
            None => {}
        }
    }
    if let Err(e) = collected {
        errors.push((usize::MAX, e));
    }
    if !errors.is_empty() {
        // a rank that finished cleanly but is named as stalled is the cause
        let pick = errors
            .iter()
            .position(|(_, e)| matches!(e, Error::Deadlock { rank, .. } if silent.get(*rank) == Some(&true)))
            .unwrap_or(0);
        return Err(errors.swap_remove(pick).1);
    }
    Ok(DistributedReport {
        sigma,
        counts: MessageCounts {
            shifts: counters.shifts.load(Ordering::Relaxed),
            reductions: counters.reductions.load(Ordering::Relaxed),
            gathers: counters.gathers.load(Ordering::Relaxed),
        },
        rank_work,
    })
}

/// CIVector-level wrapper of [`distributed_apply`].
pub fn distributed_apply_vector(
    psi: &CIVector,
    ham: &SubspaceHamiltonian,
    plan: &PartitionPlan,
    opts: &EngineOptions,
) -> Result<CIVector> {
    if psi.basis().as_ref() != ham.basis().as_ref() {
        return Err(Error::BasisMismatch("CI vector and tables built on different subspaces".into()));
    }
    let rep = distributed_apply(ham, psi.amplitudes(), plan, opts)?;
    CIVector::new(ham.basis().clone(), rep.sigma)
}

/// Davidson-facing operator that routes every product through the ranks.
pub struct DistributedOperator<'a> {
    ham: &'a SubspaceHamiltonian,
    plan: PartitionPlan,
    assignment: TaskAssignment,
    opts: EngineOptions,
    totals: Mutex<(usize, MessageCounts)>,
}

impl<'a> DistributedOperator<'a> {
    pub fn new(ham: &'a SubspaceHamiltonian, plan: PartitionPlan, opts: EngineOptions) -> Result<Self> {
        let assignment = assign_tasks(ham, plan.t, opts.balance)?;
        Ok(DistributedOperator {
            ham,
            plan,
            assignment,
            opts,
            totals: Mutex::new((0, MessageCounts::default())),
        })
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    pub fn assignment(&self) -> &TaskAssignment {
        &self.assignment
    }

    /// (applications, summed message counts) so far.
    pub fn totals(&self) -> (usize, MessageCounts) {
        *self.totals.lock().expect("totals")
    }
}

impl LinearOperator for DistributedOperator<'_> {
    fn dim(&self) -> usize {
        self.ham.basis().dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let rep = distributed_apply_with(self.ham, x, &self.plan, &self.assignment, &self.opts)?;
        y.copy_from_slice(&rep.sigma);
        let mut t = self.totals.lock().expect("totals");
        t.0 += 1;
        t.1.add(rep.counts);
        Ok(())
    }
}
