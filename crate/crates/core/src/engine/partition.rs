use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Contiguous ranges of sizes differing by at most one; earlier ranges get
/// the remainder.
pub fn split_even(len: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let (q, r) = (len / parts, len % parts);
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let size = q + usize::from(i < r);
            let range = start..start + size;
            start += size;
            range
        })
        .collect()
}

/// The (B_α, B_β, T, M) decomposition of one Hamiltonian application.
///
/// Basis rank `b = ia·b_beta + ib` owns ψ[alpha_slices[ia], beta_slices[ib]].
/// Each basis rank is replicated `t` times along source tasks and `m` times
/// along output rows inside its α slice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub b_alpha: usize,
    pub b_beta: usize,
    pub t: usize,
    pub m: usize,
    pub alpha_slices: Vec<Range<usize>>,
    pub beta_slices: Vec<Range<usize>>,
    /// row_slices[ia][m]: output rows of replica `m` within α slice `ia`.
    pub row_slices: Vec<Vec<Range<usize>>>,
}

/// Coordinates of one worker rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RankId {
    pub b: usize,
    pub t: usize,
    pub m: usize,
}

impl PartitionPlan {
    pub fn basis_ranks(&self) -> usize {
        self.b_alpha * self.b_beta
    }

    pub fn rank_count(&self) -> usize {
        self.basis_ranks() * self.t * self.m
    }

    /// Linear rank number, m fastest.
    pub fn rank_index(&self, id: RankId) -> usize {
        (id.b * self.t + id.t) * self.m + id.m
    }

    pub fn rank_id(&self, index: usize) -> RankId {
        RankId {
            b: index / (self.t * self.m),
            t: index / self.m % self.t,
            m: index % self.m,
        }
    }

    /// (α slice, β slice) of basis rank `b`.
    pub fn block(&self, b: usize) -> (Range<usize>, Range<usize>) {
        (
            self.alpha_slices[b / self.b_beta].clone(),
            self.beta_slices[b % self.b_beta].clone(),
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (
            self.alpha_slices.last().map_or(0, |r| r.end),
            self.beta_slices.last().map_or(0, |r| r.end),
        )
    }
}

pub fn plan_partition(
    d_alpha: usize,
    d_beta: usize,
    b_alpha: usize,
    b_beta: usize,
    t: usize,
    m: usize,
) -> Result<PartitionPlan> {
    if b_alpha == 0 || b_beta == 0 || t == 0 || m == 0 {
        return Err(Error::Infeasible(format!(
            "factors must be positive, got ({b_alpha}, {b_beta}, {t}, {m})"
        )));
    }
    if b_alpha > d_alpha || b_beta > d_beta {
        return Err(Error::Infeasible(format!(
            "({b_alpha}, {b_beta}) basis ranks exceed half dimensions ({d_alpha}, {d_beta})"
        )));
    }
    let alpha_slices = split_even(d_alpha, b_alpha);
    let row_slices = alpha_slices
        .iter()
        .map(|s| {
            split_even(s.len(), m)
                .into_iter()
                .map(|r| s.start + r.start..s.start + r.end)
                .collect()
        })
        .collect();
    Ok(PartitionPlan {
        b_alpha,
        b_beta,
        t,
        m,
        alpha_slices,
        beta_slices: split_even(d_beta, b_beta),
        row_slices,
    })
}

/// Every (b_alpha, b_beta, t, m) with product `ranks` that fits the
/// dimensions, in lexicographic order.
pub fn factorizations(ranks: usize, d_alpha: usize, d_beta: usize) -> Vec<(usize, usize, usize, usize)> {
    let divisors = |n: usize| (1..=n).filter(move |d| n.is_multiple_of(*d));
    let mut out = Vec::new();
    for ba in divisors(ranks) {
        for bb in divisors(ranks / ba) {
            for t in divisors(ranks / ba / bb) {
                let m = ranks / ba / bb / t;
                if ba <= d_alpha && bb <= d_beta {
                    out.push((ba, bb, t, m));
                }
            }
        }
    }
    out
}
