use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Page I/O counters. A read request fetches one or more contiguous pages;
/// `page_reads` counts pages, `read_requests` counts requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IoStats {
    pub page_reads: u64,
    pub page_writes: u64,
    pub read_requests: u64,
    pub readahead_pages: u64,
    pub temp_pages_written: u64,
}

impl IoStats {
    pub const KEYS: [&'static str; 5] = [
        "page_reads",
        "page_writes",
        "read_requests",
        "readahead_pages",
        "temp_pages_written",
    ];

    pub fn values(&self) -> [u64; 5] {
        [
            self.page_reads,
            self.page_writes,
            self.read_requests,
            self.readahead_pages,
            self.temp_pages_written,
        ]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&'static str, u64)> {
        Self::KEYS.into_iter().zip(self.values())
    }
}

impl Add for IoStats {
    type Output = IoStats;

    fn add(self, rhs: IoStats) -> IoStats {
        IoStats {
            page_reads: self.page_reads + rhs.page_reads,
            page_writes: self.page_writes + rhs.page_writes,
            read_requests: self.read_requests + rhs.read_requests,
            readahead_pages: self.readahead_pages + rhs.readahead_pages,
            temp_pages_written: self.temp_pages_written + rhs.temp_pages_written,
        }
    }
}

impl AddAssign for IoStats {
    fn add_assign(&mut self, rhs: IoStats) {
        *self = *self + rhs;
    }
}

/// Counter delta; counters never decrease, so `later - earlier` is safe.
impl Sub for IoStats {
    type Output = IoStats;

    fn sub(self, rhs: IoStats) -> IoStats {
        IoStats {
            page_reads: self.page_reads - rhs.page_reads,
            page_writes: self.page_writes - rhs.page_writes,
            read_requests: self.read_requests - rhs.read_requests,
            readahead_pages: self.readahead_pages - rhs.readahead_pages,
            temp_pages_written: self.temp_pages_written - rhs.temp_pages_written,
        }
    }
}

/// `key=value` lines.
impl fmt::Display for IoStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in self.pairs() {
            writeln!(f, "{key}={value}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_uses_exact_keys() {
        let stats = IoStats {
            page_reads: 1,
            page_writes: 2,
            read_requests: 3,
            readahead_pages: 4,
            temp_pages_written: 5,
        };
        let json = serde_json::to_value(stats).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        let mut expected: Vec<_> = IoStats::KEYS.iter().map(|s| s.to_string()).collect();
        expected.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, expected);
        assert_eq!(
            stats.to_string(),
            "page_reads=1\npage_writes=2\nread_requests=3\nreadahead_pages=4\ntemp_pages_written=5\n"
        );
        assert_eq!((stats + stats) - stats, stats);
    }
}
