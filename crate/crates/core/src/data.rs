//! Interaction logs and the frozen per-user profiles derived from them.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer number of days since the start of the dataset.
pub type Timestamp = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionEvent {
    #[serde(rename = "user_id")]
    pub user: String,
    #[serde(rename = "item_id")]
    pub item: String,
    pub timestamp: Timestamp,
}

impl InteractionEvent {
    pub fn new(user: impl Into<String>, item: impl Into<String>, timestamp: Timestamp) -> Self {
        InteractionEvent {
            user: user.into(),
            item: item.into(),
            timestamp,
        }
    }
}

/// Timestamped user-item associations. Events need not be sorted and may
/// repeat a (user, item) pair; snapshots keep the earliest occurrence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionLog {
    events: Vec<InteractionEvent>,
}

impl InteractionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<InteractionEvent>) -> Self {
        InteractionLog { events }
    }

    pub fn push(&mut self, event: InteractionEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<InteractionEvent> {
        self.events
    }

    pub fn max_timestamp(&self) -> Option<Timestamp> {
        self.events.iter().map(|e| e.timestamp).max()
    }
}

impl Extend<InteractionEvent> for InteractionLog {
    fn extend<I: IntoIterator<Item = InteractionEvent>>(&mut self, iter: I) {
        self.events.extend(iter);
    }
}

impl FromIterator<InteractionEvent> for InteractionLog {
    fn from_iter<I: IntoIterator<Item = InteractionEvent>>(iter: I) -> Self {
        InteractionLog {
            events: iter.into_iter().collect(),
        }
    }
}

/// Dense index of a user inside one [`Snapshot`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserIdx(pub u32);

/// Dense index of an item inside one [`Snapshot`]. Indices follow the
/// lexicographic order of item identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemIdx(pub u32);

impl UserIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ItemIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UserIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for ItemIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// State of the system at time `t`: every user's item set, stored both
/// user-major (profiles) and item-major (holders).
///
/// Users and items are indexed in lexicographic order of their identifiers,
/// so iteration order is independent of the order of events in the log.
#[derive(Clone, Debug)]
pub struct Snapshot {
    time: Timestamp,
    users: Vec<String>,
    items: Vec<String>,
    user_lookup: HashMap<String, UserIdx>,
    item_lookup: HashMap<String, ItemIdx>,
    // CSR: profile of user u is profile_items[profile_offsets[u]..profile_offsets[u + 1]]
    profile_offsets: Vec<usize>,
    profile_items: Vec<ItemIdx>,
    // CSC: holders of item i is holder_users[holder_offsets[i]..holder_offsets[i + 1]]
    holder_offsets: Vec<usize>,
    holder_users: Vec<UserIdx>,
    membership: HashSet<u64>,
}

/// Freeze `log` at time `t`: keep events with `timestamp <= t`, collapse
/// duplicate pairs, and drop users left without items.
pub fn build_snapshot(log: &InteractionLog, t: Timestamp) -> Result<Snapshot> {
    let mut pairs: Vec<(&str, &str)> = log
        .events
        .iter()
        .filter(|e| e.timestamp <= t)
        .map(|e| (e.user.as_str(), e.item.as_str()))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptySnapshot { time: t });
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut users: Vec<&str> = pairs.iter().map(|p| p.0).collect();
    users.dedup();
    let mut items: Vec<&str> = pairs.iter().map(|p| p.1).collect();
    items.sort_unstable();
    items.dedup();

    let item_lookup: HashMap<String, ItemIdx> = items
        .iter()
        .enumerate()
        .map(|(k, id)| (id.to_string(), ItemIdx(k as u32)))
        .collect();
    let user_lookup: HashMap<String, UserIdx> = users
        .iter()
        .enumerate()
        .map(|(k, id)| (id.to_string(), UserIdx(k as u32)))
        .collect();

    let mut profile_offsets = Vec::with_capacity(users.len() + 1);
    let mut profile_items = Vec::with_capacity(pairs.len());
    let mut holder_counts = vec![0usize; items.len()];
    let mut membership = HashSet::with_capacity(pairs.len());
    let mut current: Option<&str> = None;
    let mut user_k = 0u32;
    for &(u, i) in &pairs {
        if current != Some(u) {
            if current.is_some() {
                user_k += 1;
            }
            current = Some(u);
            profile_offsets.push(profile_items.len());
        }
        let item = item_lookup[i];
        profile_items.push(item);
        holder_counts[item.index()] += 1;
        membership.insert(pair_key(UserIdx(user_k), item));
    }
    profile_offsets.push(profile_items.len());

    let mut holder_offsets = Vec::with_capacity(items.len() + 1);
    let mut acc = 0;
    holder_offsets.push(0);
    for c in &holder_counts {
        acc += c;
        holder_offsets.push(acc);
    }
    let mut fill = holder_offsets[..items.len()].to_vec();
    let mut holder_users = vec![UserIdx(0); profile_items.len()];
    for u in 0..users.len() {
        for &item in &profile_items[profile_offsets[u]..profile_offsets[u + 1]] {
            holder_users[fill[item.index()]] = UserIdx(u as u32);
            fill[item.index()] += 1;
        }
    }

    Ok(Snapshot {
        time: t,
        users: users.into_iter().map(str::to_string).collect(),
        items: items.into_iter().map(str::to_string).collect(),
        user_lookup,
        item_lookup,
        profile_offsets,
        profile_items,
        holder_offsets,
        holder_users,
        membership,
    })
}

#[inline]
fn pair_key(u: UserIdx, i: ItemIdx) -> u64 {
    ((u.0 as u64) << 32) | i.0 as u64
}

impl Snapshot {
    pub fn time(&self) -> Timestamp {
        self.time
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Number of distinct items held by at least one user.
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Number of (user, item) memberships.
    pub fn nnz(&self) -> usize {
        self.profile_items.len()
    }

    pub fn mean_profile_size(&self) -> f64 {
        self.nnz() as f64 / self.n_users() as f64
    }

    pub fn user_id(&self, u: UserIdx) -> &str {
        &self.users[u.index()]
    }

    pub fn item_id(&self, i: ItemIdx) -> &str {
        &self.items[i.index()]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.users
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    pub fn user_index(&self, id: &str) -> Option<UserIdx> {
        self.user_lookup.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<ItemIdx> {
        self.item_lookup.get(id).copied()
    }

    pub fn users(&self) -> impl ExactSizeIterator<Item = UserIdx> + Clone {
        (0..self.users.len() as u32).map(UserIdx)
    }

    pub fn items(&self) -> impl ExactSizeIterator<Item = ItemIdx> + Clone {
        (0..self.items.len() as u32).map(ItemIdx)
    }

    /// Items of user `u`, sorted by index.
    pub fn profile(&self, u: UserIdx) -> &[ItemIdx] {
        &self.profile_items[self.profile_range(u)]
    }

    /// Users holding item `i`, sorted by index.
    pub fn holders(&self, i: ItemIdx) -> &[UserIdx] {
        &self.holder_users[self.holder_offsets[i.index()]..self.holder_offsets[i.index() + 1]]
    }

    /// Positions of user `u`'s pairs in the flat pair order. Per-pair tables
    /// (conditional probabilities) are laid out in this order.
    pub fn profile_range(&self, u: UserIdx) -> std::ops::Range<usize> {
        self.profile_offsets[u.index()]..self.profile_offsets[u.index() + 1]
    }

    /// Flat pair position of (u, i), if `i` is in `u`'s profile.
    pub fn pair_position(&self, u: UserIdx, i: ItemIdx) -> Option<usize> {
        let range = self.profile_range(u);
        self.profile_items[range.clone()]
            .binary_search(&i)
            .ok()
            .map(|k| range.start + k)
    }

    /// Constant expected time membership test.
    pub fn contains(&self, u: UserIdx, i: ItemIdx) -> bool {
        self.membership.contains(&pair_key(u, i))
    }

    pub fn contains_ids(&self, user: &str, item: &str) -> bool {
        match (self.user_index(user), self.item_index(item)) {
            (Some(u), Some(i)) => self.contains(u, i),
            _ => false,
        }
    }

    /// Profile of a user by identifier, as identifiers.
    pub fn profile_ids(&self, user: &str) -> Result<Vec<&str>> {
        let u = self
            .user_index(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        Ok(self.profile(u).iter().map(|&i| self.item_id(i)).collect())
    }
}
