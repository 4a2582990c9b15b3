//! Stream bookkeeping and the asymmetric SIC interference graph.

use std::ops::Range;

/// One data stream: `index` is the 0-based position in its user's SIC order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamId {
    pub user: usize,
    pub index: usize,
}

/// Streams in (user, stream) lexicographic order.
///
/// Stream `(k, m)` is interfered by every stream of every other user and by
/// its own user's later streams `(k, i)` with `i > m`; earlier streams have
/// already been cancelled. With one stream per user this is the full
/// "all `j != k`" interference pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamLayout {
    streams: Vec<StreamId>,
    offsets: Vec<usize>,
}

impl StreamLayout {
    pub fn new(streams_per_user: &[usize]) -> Self {
        let mut streams = Vec::new();
        let mut offsets = Vec::with_capacity(streams_per_user.len() + 1);
        for (user, &d) in streams_per_user.iter().enumerate() {
            offsets.push(streams.len());
            streams.extend((0..d).map(|index| StreamId { user, index }));
        }
        offsets.push(streams.len());
        Self { streams, offsets }
    }

    /// One stream per user.
    pub fn single(num_users: usize) -> Self {
        Self::new(&vec![1; num_users])
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn streams(&self) -> &[StreamId] {
        &self.streams
    }

    pub fn stream(&self, s: usize) -> StreamId {
        self.streams[s]
    }

    pub fn user_of(&self, s: usize) -> usize {
        self.streams[s].user
    }

    /// Flat indices of user `k`'s streams, in SIC order.
    pub fn user_streams(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn streams_of(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn is_single_stream(&self) -> bool {
        self.len() == self.num_users()
    }

    /// Whether `source` leaks into the receiver of `victim`.
    pub fn interferes(&self, victim: usize, source: usize) -> bool {
        if victim == source {
            return false;
        }
        let (v, s) = (self.streams[victim], self.streams[source]);
        v.user != s.user || s.index > v.index
    }

    /// Streams that interfere at `victim`'s receiver.
    pub fn interferers(&self, victim: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&t| self.interferes(victim, t))
    }

    /// Streams whose receivers see `source` as interference; in the virtual
    /// uplink these are the streams interfering with `source`.
    pub fn victims(&self, source: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&t| self.interferes(t, source))
    }
}
