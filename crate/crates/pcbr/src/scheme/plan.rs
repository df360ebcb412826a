//! Deterministic construction of the fully indexed query plan.
//!
//! Symbols are laid down support by support in (size, lex) order; each
//! message hands out subpacket indices from a single ascending counter.
//! Interference-only symbols always draw fresh indices. A demand-bearing
//! sum at server n instead clones the indices of one interference-only
//! symbol held by a different server (its side information) and adds a
//! fresh subpacket of the demand message; the pairing enumerates foreign
//! (server, copy) labels in ascending order, which the multiplicity rules
//! make an exact bijection.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::params::{Params, Regime};
use crate::scheme::partition::{build_partition, enumerate_supports};
use crate::scheme::{LargeDemandPlan, QueryPlan, SideInfoRef, Support, SymbolSpec};

/// Builds the canonical (unmasked) plan for demand window j, dispatching on
/// the regime. The result satisfies every `QueryPlan` invariant.
pub fn build_canonical_plan(params: &Params, j: usize) -> Result<QueryPlan> {
    params.demand_window(j)?;
    let plan = match params.regime {
        Regime::SmallD => build_small(params, j)?,
        Regime::LargeD => build_large(params, j)?,
    };
    plan.validate()?;
    Ok(plan)
}

/// Hands out the next subpacket index of each support member, in message
/// order, erroring if a message would exceed L.
fn draw_fresh(
    support: &Support,
    counters: &mut BTreeMap<usize, usize>,
    l: usize,
) -> Result<BTreeMap<usize, usize>> {
    let mut entries = BTreeMap::new();
    for &message in support.indices() {
        let slot = counters
            .get_mut(&message)
            .expect("counter for every message");
        if *slot > l {
            return Err(Error::Construction {
                support: support.to_string(),
                reason: format!("message {message} exhausted its {l} subpacket indices"),
            });
        }
        entries.insert(message, *slot);
        *slot += 1;
    }
    Ok(entries)
}

fn build_small(params: &Params, j: usize) -> Result<QueryPlan> {
    let window: BTreeSet<usize> = params.demand_window(j)?.into_iter().collect();
    let partition = build_partition(params)?;
    let support_plan = enumerate_supports(&partition, params)?;
    let n = params.n;
    let l = params.l;
    let mut counters: BTreeMap<usize, usize> = (1..=params.k).map(|i| (i, 1)).collect();
    let mut servers: Vec<Vec<SymbolSpec>> = vec![Vec::new(); n];
    // Interference-only symbols by support: [server][copy] -> (position, entries).
    type Copies = Vec<Vec<(usize, BTreeMap<usize, usize>)>>;
    let mut sources: BTreeMap<Support, Copies> = BTreeMap::new();

    for (support, &t) in &support_plan.entries {
        let demand: Vec<usize> = support
            .indices()
            .iter()
            .copied()
            .filter(|i| window.contains(i))
            .collect();
        match demand.as_slice() {
            [] => {
                // Pure interference: fresh indices, recorded for later reuse.
                let mut copies: Copies = vec![Vec::new(); n];
                for (srv, list) in servers.iter_mut().enumerate() {
                    for _ in 0..t {
                        let entries = draw_fresh(support, &mut counters, l)?;
                        copies[srv].push((list.len() + 1, entries.clone()));
                        list.push(SymbolSpec {
                            server: srv + 1,
                            support: support.clone(),
                            entries,
                            demand_entry: None,
                            side_info: None,
                        });
                    }
                }
                sources.insert(support.clone(), copies);
            }
            [istar] if support.len() == 1 => {
                // Demand singleton: always a fresh subpacket, nothing to cancel.
                for (srv, list) in servers.iter_mut().enumerate() {
                    for _ in 0..t {
                        let entries = draw_fresh(support, &mut counters, l)?;
                        list.push(SymbolSpec {
                            server: srv + 1,
                            support: support.clone(),
                            entries,
                            demand_entry: Some(*istar),
                            side_info: None,
                        });
                    }
                }
            }
            [istar] => {
                let istar = *istar;
                let rest = support.minus(istar)?;
                let supply = sources.get(&rest).ok_or_else(|| Error::Construction {
                    support: support.to_string(),
                    reason: format!("no interference symbols on {rest} to borrow from"),
                })?;
                let per_server = supply[0].len();
                if (n as u64 - 1) * per_server as u64 != t {
                    return Err(Error::Construction {
                        support: support.to_string(),
                        reason: format!(
                            "need {t} side-information sources, {} available",
                            (n - 1) * per_server
                        ),
                    });
                }
                for (srv, server_list) in servers.iter_mut().enumerate() {
                    // Foreign labels (server, copy), ascending: the c-th sum at
                    // this server clones the c-th label's interference indices.
                    for (other, sources) in supply.iter().enumerate() {
                        if other == srv {
                            continue;
                        }
                        for (position, src_entries) in sources {
                            let mut entries = src_entries.clone();
                            let fresh = draw_fresh(&Support::singleton(istar), &mut counters, l)?;
                            entries.extend(fresh);
                            server_list.push(SymbolSpec {
                                server: srv + 1,
                                support: support.clone(),
                                entries,
                                demand_entry: Some(istar),
                                side_info: Some(SideInfoRef {
                                    server: other + 1,
                                    symbol: *position,
                                }),
                            });
                        }
                    }
                }
            }
            _ => {
                return Err(Error::Construction {
                    support: support.to_string(),
                    reason: "support meets the demand window more than once".into(),
                })
            }
        }
    }

    // Every demand message must have consumed its full index range.
    for &i in &window {
        let used = counters[&i] - 1;
        if used != l {
            return Err(Error::Construction {
                support: format!("{{{i}}}"),
                reason: format!("demand message {i} drew {used} of {l} indices"),
            });
        }
    }
    Ok(QueryPlan {
        params: *params,
        demand_index: j,
        servers,
        large_d: None,
    })
}

/// Splits an overlapping-window instance (2D > K) into the part every
/// window needs and a smaller non-overlapping instance for the rest.
///
/// Returns the common core [K-D+1 : D], the residual parameters
/// (2K-2D, K-D), the relabeling from residual to original message indices,
/// and the residual demand index (equal to j; the residual demand window is
/// contiguous after relabeling, which is asserted).
pub fn reduce_large_demand(
    params: &Params,
    j: usize,
) -> Result<(Vec<usize>, Params, Vec<usize>, usize)> {
    if params.regime != Regime::LargeD {
        return Err(Error::WrongRegime {
            expected: "LARGE_D",
            actual: params.regime.name(),
        });
    }
    let window = params.demand_window(j)?;
    let (k, d) = (params.k, params.d);
    let common: Vec<usize> = (k - d + 1..=d).collect();
    debug_assert_eq!(common.len(), 2 * d - k);
    let reduced = Params::derive_relaxed(params.n, 2 * k - 2 * d, k - d)?;
    debug_assert_eq!(reduced.regime, Regime::SmallD);
    debug_assert_eq!(reduced.g, 2);
    debug_assert_eq!(reduced.l, params.l);
    let relabel: Vec<usize> = (1..=reduced.k)
        .map(|r| if r <= k - d { r } else { r + (2 * d - k) })
        .collect();
    // The residual demand must relabel to the contiguous window [j : j+D̂-1].
    let back = |orig: usize| {
        if orig <= k - d {
            orig
        } else {
            orig - (2 * d - k)
        }
    };
    let residual: Vec<usize> = window
        .iter()
        .copied()
        .filter(|i| *i < k - d + 1 || *i > d)
        .map(back)
        .collect();
    let expected: Vec<usize> = reduced.demand_window(j)?;
    if residual != expected {
        return Err(Error::Construction {
            support: format!("window {j}"),
            reason: format!("residual demand {residual:?} is not the window {expected:?}"),
        });
    }
    Ok((common, reduced, relabel, j))
}

fn build_large(params: &Params, j: usize) -> Result<QueryPlan> {
    let (common, reduced_params, relabel, reduced_j) = reduce_large_demand(params, j)?;
    let reduced = build_small(&reduced_params, reduced_j)?;
    reduced.validate()?;
    let n = params.n;
    let l = params.l;
    let phase1_per_server = common.len() * n;
    let mut servers: Vec<Vec<SymbolSpec>> = vec![Vec::new(); n];

    // Phase 1: every server hands over N fresh subpackets of each common
    // message; across the N servers that covers all L = N^2 of them.
    let mut counters: BTreeMap<usize, usize> = common.iter().map(|&i| (i, 1)).collect();
    for &message in &common {
        for (srv, list) in servers.iter_mut().enumerate() {
            for _ in 0..n {
                let entries = draw_fresh(&Support::singleton(message), &mut counters, l)?;
                list.push(SymbolSpec {
                    server: srv + 1,
                    support: Support::singleton(message),
                    entries,
                    demand_entry: Some(message),
                    side_info: None,
                });
            }
        }
    }

    // Phase 2: the residual plan, relabeled to original message indices.
    // Relabeling is strictly increasing, so supports stay sorted; side
    // information links shift by the phase-1 prefix length.
    for (srv, list) in servers.iter_mut().enumerate() {
        for spec in &reduced.servers[srv] {
            let map = |r: usize| relabel[r - 1];
            let support = Support::new(spec.support.indices().iter().map(|&r| map(r)).collect())?;
            let entries: BTreeMap<usize, usize> =
                spec.entries.iter().map(|(&r, &t)| (map(r), t)).collect();
            list.push(SymbolSpec {
                server: srv + 1,
                support,
                entries,
                demand_entry: spec.demand_entry.map(map),
                side_info: spec.side_info.map(|s| SideInfoRef {
                    server: s.server,
                    symbol: s.symbol + phase1_per_server,
                }),
            });
        }
    }
    Ok(QueryPlan {
        params: *params,
        demand_index: j,
        servers,
        large_d: Some(LargeDemandPlan {
            common,
            phase1_per_server,
            reduced_params,
            reduced_demand_index: reduced_j,
            relabel,
        }),
    })
}
