//! Query-plan construction: the alternating partition, the per-support
//! multiplicity plan, the fully indexed canonical plan for both regimes,
//! and the per-message masking permutations.

mod mask;
mod partition;
mod plan;
mod table;

pub use mask::{apply_masks, draw_perms, identity_perms, mask_plan};
pub use partition::{build_partition, enumerate_supports, Partition, SupportPlan};
pub use plan::{build_canonical_plan, reduce_large_demand};
pub use table::{message_label, render_symbol, render_table};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::params::{Params, Regime};

/// The set of message indices whose subpackets appear in one downloaded
/// symbol. Always non-empty, sorted, distinct. Ordered by (size, lex), which
/// is exactly the transmission order of the plan.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn new(mut indices: Vec<usize>) -> Result<Support> {
        indices.sort_unstable();
        let distinct = indices.windows(2).all(|w| w[0] < w[1]);
        if indices.is_empty() || !distinct || indices[0] == 0 {
            return Err(Error::InvalidParams(
                "support must be a non-empty set of indices >= 1".into(),
            ));
        }
        Ok(Support(indices))
    }

    pub fn singleton(i: usize) -> Support {
        Support(vec![i])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// The support with one index removed; errors if that empties it.
    pub fn minus(&self, i: usize) -> Result<Support> {
        let rest: Vec<usize> = self.0.iter().copied().filter(|&x| x != i).collect();
        Support::new(rest)
    }
}

impl Ord for Support {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Support {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.0.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Position of the symbol whose subtraction exposes a demand subpacket:
/// 1-based server index and 1-based position in that server's list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideInfoRef {
    pub server: usize,
    pub symbol: usize,
}

/// One downloaded symbol: the sum over `entries` of subpacket `index` of
/// message `message`, all coefficients 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSpec {
    /// Server this symbol is retrieved from, 1-based.
    pub server: usize,
    pub support: Support,
    /// message index -> subpacket index in `[1:L]`; key set equals the support.
    pub entries: BTreeMap<usize, usize>,
    /// The demand message contained in this symbol, if any.
    pub demand_entry: Option<usize>,
    /// For demand-bearing sums of size >= 2: the interference-only symbol
    /// (at a different server) whose subtraction recovers the demand entry.
    pub side_info: Option<SideInfoRef>,
}

impl SymbolSpec {
    /// Sum size k of this symbol.
    pub fn k(&self) -> usize {
        self.support.len()
    }

    fn check(&self, l: usize) -> Result<()> {
        let keys: Vec<usize> = self.entries.keys().copied().collect();
        if keys != self.support.indices() {
            return Err(Error::Construction {
                support: self.support.to_string(),
                reason: "entry keys differ from support".into(),
            });
        }
        for (&message, &index) in &self.entries {
            if index == 0 || index > l {
                return Err(Error::IndexOutOfRange { message, index, l });
            }
        }
        if let Some(i) = self.demand_entry {
            if !self.support.contains(i) {
                return Err(Error::Construction {
                    support: self.support.to_string(),
                    reason: format!("demand entry {i} not in support"),
                });
            }
        }
        let needs_link = self.demand_entry.is_some() && self.support.len() >= 2;
        if needs_link != self.side_info.is_some() {
            return Err(Error::Construction {
                support: self.support.to_string(),
                reason: "side-information link present/absent incorrectly".into(),
            });
        }
        Ok(())
    }

    fn to_json(&self) -> Value {
        let entries: Map<String, Value> = self
            .entries
            .iter()
            .map(|(m, i)| (m.to_string(), json!(i)))
            .collect();
        json!({
            "support": self.support.indices(),
            "entries": entries,
            "demand_entry": self.demand_entry,
            "side_info": self.side_info.map(|s| json!({"server": s.server, "symbol": s.symbol})),
        })
    }
}

/// Bookkeeping for the two-phase plan used when the demand windows overlap
/// pairwise (2D > K).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LargeDemandPlan {
    /// Messages shared by every demand window: [K-D+1 : D].
    pub common: Vec<usize>,
    /// Number of leading direct-retrieval symbols per server.
    pub phase1_per_server: usize,
    /// The residual instance (2K-2D, K-D) the tail of the plan solves.
    pub reduced_params: Params,
    pub reduced_demand_index: usize,
    /// `relabel[r-1]` = original message index of residual message r.
    pub relabel: Vec<usize>,
}

/// A complete, fully indexed query plan for one demand window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub params: Params,
    pub demand_index: usize,
    /// N per-server symbol lists, in transmission order.
    pub servers: Vec<Vec<SymbolSpec>>,
    /// Present exactly in the 2D > K regime.
    pub large_d: Option<LargeDemandPlan>,
}

impl QueryPlan {
    /// The demanded messages, [j : j+D-1].
    pub fn demand_window(&self) -> Vec<usize> {
        self.params
            .demand_window(self.demand_index)
            .expect("plan holds a validated demand index")
    }

    /// Full invariant check: per-server symbol counts, within-server
    /// distinctness of (message, index) pairs, at most one demand index per
    /// support, per-server per-message subpacket counts, exhaustive demand
    /// coverage, and resolvable side-information links.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let window: BTreeSet<usize> = self.demand_window().into_iter().collect();
        if self.servers.len() != p.n {
            return Err(Error::Construction {
                support: "-".into(),
                reason: format!("expected {} servers, found {}", p.n, self.servers.len()),
            });
        }
        let expected = crate::params::symbols_per_server(p);
        let mut demand_indices: BTreeMap<usize, BTreeSet<usize>> =
            window.iter().map(|&i| (i, BTreeSet::new())).collect();
        for (s, symbols) in self.servers.iter().enumerate() {
            let server = s + 1;
            if crate::ratio::int(symbols.len() as u64) != expected {
                return Err(Error::Construction {
                    support: "-".into(),
                    reason: format!(
                        "server {server} holds {} symbols, expected {expected}",
                        symbols.len()
                    ),
                });
            }
            let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
            let mut per_message: BTreeMap<usize, usize> = BTreeMap::new();
            for spec in symbols {
                spec.check(p.l)?;
                if spec.server != server {
                    return Err(Error::Construction {
                        support: spec.support.to_string(),
                        reason: format!("symbol tagged server {} in list {server}", spec.server),
                    });
                }
                let in_window = spec
                    .support
                    .indices()
                    .iter()
                    .filter(|i| window.contains(i))
                    .count();
                if in_window > 1 {
                    return Err(Error::Construction {
                        support: spec.support.to_string(),
                        reason: "support holds more than one demand index".into(),
                    });
                }
                if let Some(i) = spec.demand_entry {
                    if !window.contains(&i) {
                        return Err(Error::Construction {
                            support: spec.support.to_string(),
                            reason: format!("demand entry {i} outside the window"),
                        });
                    }
                    demand_indices
                        .get_mut(&i)
                        .expect("window key")
                        .insert(spec.entries[&i]);
                } else if in_window != 0 {
                    return Err(Error::Construction {
                        support: spec.support.to_string(),
                        reason: "window message present but not marked as demand".into(),
                    });
                }
                for (&message, &index) in &spec.entries {
                    if !seen.insert((message, index)) {
                        return Err(Error::Construction {
                            support: spec.support.to_string(),
                            reason: format!(
                                "subpacket {index} of message {message} repeats at server {server}"
                            ),
                        });
                    }
                    *per_message.entry(message).or_insert(0) += 1;
                }
                self.check_link(spec)?;
            }
            self.check_per_message_counts(&per_message, server)?;
        }
        // Every demand message must spread over all L subpacket indices.
        for (&i, indices) in &demand_indices {
            if indices.len() != p.l || *indices.iter().next_back().unwrap_or(&0) > p.l {
                return Err(Error::Construction {
                    support: format!("{{{i}}}"),
                    reason: format!(
                        "demand message {i} covers {} of {} subpacket indices",
                        indices.len(),
                        p.l
                    ),
                });
            }
        }
        Ok(())
    }

    /// Per server, every message contributes a fixed number of subpackets:
    /// N^(g-1) for S1 messages and N^f for S2 messages in the small-demand
    /// regime; N for every message in the large-demand regime.
    fn check_per_message_counts(
        &self,
        per_message: &BTreeMap<usize, usize>,
        server: usize,
    ) -> Result<()> {
        let p = &self.params;
        for message in 1..=p.k {
            let count = per_message.get(&message).copied().unwrap_or(0);
            let expected = match p.regime {
                Regime::LargeD => p.n,
                Regime::SmallD => {
                    let within = (message - 1) % p.d + 1;
                    if within <= p.m {
                        p.n.pow(p.g as u32 - 1)
                    } else {
                        p.n.pow(p.f as u32)
                    }
                }
            };
            if count != expected {
                return Err(Error::Construction {
                    support: format!("{{{message}}}"),
                    reason: format!(
                        "message {message} contributes {count} subpackets at server {server}, expected {expected}"
                    ),
                });
            }
        }
        Ok(())
    }

    fn check_link(&self, spec: &SymbolSpec) -> Result<()> {
        let Some(link) = spec.side_info else {
            return Ok(());
        };
        let err = |reason: String| Error::Construction {
            support: spec.support.to_string(),
            reason,
        };
        if link.server == spec.server {
            return Err(err("side information points at the same server".into()));
        }
        let target = self
            .servers
            .get(link.server.wrapping_sub(1))
            .and_then(|list| list.get(link.symbol.wrapping_sub(1)))
            .ok_or_else(|| err(format!("dangling link to {}:{}", link.server, link.symbol)))?;
        let demand = spec.demand_entry.expect("checked by SymbolSpec::check");
        if target.support != spec.support.minus(demand)? {
            return Err(err(format!(
                "linked symbol has support {}, expected the demand-free remainder",
                target.support
            )));
        }
        for (message, index) in &target.entries {
            if spec.entries.get(message) != Some(index) {
                return Err(err(format!(
                    "linked symbol disagrees on message {message} index"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let servers: Vec<Value> = self
            .servers
            .iter()
            .map(|list| Value::Array(list.iter().map(SymbolSpec::to_json).collect()))
            .collect();
        let mut out = json!({
            "params": serde_json::to_value(self.params).expect("params serialize"),
            "demand_index": self.demand_index,
            "servers": servers,
        });
        if let Some(ld) = &self.large_d {
            out["large_d"] = json!({
                "common": ld.common,
                "phase1_per_server": ld.phase1_per_server,
                "reduced_params": serde_json::to_value(ld.reduced_params).expect("params serialize"),
                "reduced_demand_index": ld.reduced_demand_index,
                "relabel": ld.relabel,
            });
        }
        out
    }
}
