//! Dense brute-force reference computations for uniform laws, written
//! independently of the sparse library code they check.
#![allow(dead_code)]

use offbias::{build_snapshot, InteractionEvent, InteractionLog, Snapshot};

/// Membership matrix `member[u][i]`; every row must have a `true`.
pub fn log_from_matrix(member: &[Vec<bool>]) -> InteractionLog {
    let mut log = InteractionLog::new();
    for (u, row) in member.iter().enumerate() {
        for (i, &held) in row.iter().enumerate() {
            if held {
                log.push(InteractionEvent::new(
                    format!("u{u:03}"),
                    format!("i{i:03}"),
                    0,
                ));
            }
        }
    }
    log
}

/// Forces every user to hold at least one item.
pub fn fill_empty_rows(member: &mut [Vec<bool>]) {
    let n_items = member.first().map_or(0, Vec::len);
    for (u, row) in member.iter_mut().enumerate() {
        if !row.iter().any(|&b| b) {
            row[u % n_items] = true;
        }
    }
}

pub struct Dense {
    pub items: Vec<String>,
    pub member: Vec<Vec<bool>>,
}

impl Dense {
    /// Membership of the snapshot's users over the snapshot's items.
    pub fn of(snap: &Snapshot) -> Self {
        let items = snap.item_ids().to_vec();
        let member = snap
            .user_ids()
            .iter()
            .map(|u| items.iter().map(|i| snap.contains_ids(u, i)).collect())
            .collect();
        Dense { items, member }
    }

    pub fn n_users(&self) -> usize {
        self.member.len()
    }

    /// P(i|u,ω) under uniform laws.
    pub fn conditional(&self, u: usize, i: usize, w: &[f64]) -> f64 {
        if !self.member[u][i] {
            return 0.0;
        }
        let norm: f64 = (0..self.items.len())
            .filter(|&j| self.member[u][j])
            .map(|j| w[j])
            .sum();
        w[i] / norm
    }

    pub fn marginal(&self, w: &[f64]) -> Vec<f64> {
        let pu = 1.0 / self.n_users() as f64;
        (0..self.items.len())
            .map(|i| {
                (0..self.n_users())
                    .map(|u| pu * self.conditional(u, i, w))
                    .sum()
            })
            .collect()
    }

    pub fn pairwise(&self, i: usize, k: usize, w: &[f64]) -> f64 {
        let pu = 1.0 / self.n_users() as f64;
        (0..self.n_users())
            .map(|u| pu * self.conditional(u, i, w) * self.conditional(u, k, w))
            .sum()
    }

    /// Σ_{i: target_i > 0} target_i ln(target_i / P(i|ω)).
    pub fn kl(&self, target: &[f64], w: &[f64]) -> f64 {
        let m = self.marginal(w);
        target
            .iter()
            .zip(&m)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, p)| t * (t / p).ln())
            .sum()
    }

    /// Central difference of `kl` along coordinate `k` with step `h`.
    pub fn kl_central_difference(&self, target: &[f64], w: &[f64], k: usize, h: f64) -> f64 {
        let mut plus = w.to_vec();
        let mut minus = w.to_vec();
        plus[k] += h;
        minus[k] -= h;
        (self.kl(target, &plus) - self.kl(target, &minus)) / (2.0 * h)
    }
}

pub fn snapshot_of(member: &[Vec<bool>]) -> Snapshot {
    build_snapshot(&log_from_matrix(member), 0).unwrap()
}
