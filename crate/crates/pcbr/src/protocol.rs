//! The retrieval round itself: servers evaluate their symbol lists over a
//! concrete store, the user decodes by subtracting side information, and an
//! independent Gaussian-elimination oracle certifies that the plan spans
//! every demand subpacket.

use num::rational::BigRational;
use serde_json::{json, Value};
use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{inv_mod, is_prime, mul_mod, FieldElement, MessageStore};
use crate::params::{optimal_rate, Params};
use crate::ratio::{int, pow, ratio_to_json};
use crate::scheme::{build_canonical_plan, mask_plan, QueryPlan};

/// One server's reply: a field value per symbol, in transmission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub server: usize,
    pub values: Vec<FieldElement>,
}

impl Answer {
    pub fn to_json(&self) -> Value {
        json!({
            "server": self.server,
            "values": self.values.iter().map(|v| v.value).collect::<Vec<u64>>(),
        })
    }
}

/// The decoded demand block: message index -> its L subpacket values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub recovered: BTreeMap<usize, Vec<FieldElement>>,
}

impl DecodeResult {
    /// The recovered row of one message, in subpacket order.
    pub fn row(&self, message: usize) -> Option<&[FieldElement]> {
        self.recovered.get(&message).map(Vec::as_slice)
    }
}

fn check_store(store: &MessageStore, params: &Params) -> Result<()> {
    if store.k != params.k || store.l != params.l {
        return Err(Error::StoreMismatch(format!(
            "store is {}x{}, plan needs {}x{}",
            store.k, store.l, params.k, params.l
        )));
    }
    Ok(())
}

/// Evaluates one server's symbols: each value is the F_q sum of the
/// referenced subpackets.
pub fn answer_query(store: &MessageStore, plan: &QueryPlan, server: usize) -> Result<Answer> {
    check_store(store, &plan.params)?;
    let list = plan
        .servers
        .get(server.wrapping_sub(1))
        .ok_or_else(|| Error::StoreMismatch(format!("no server {server} in the plan")))?;
    let mut values = Vec::with_capacity(list.len());
    for spec in list {
        let mut acc = FieldElement::zero(store.q)?;
        for (&message, &index) in &spec.entries {
            acc = acc.add(&store.get(message, index)?)?;
        }
        values.push(acc);
    }
    Ok(Answer { server, values })
}

/// All N answers, in server order.
pub fn answer_all(store: &MessageStore, plan: &QueryPlan) -> Result<Vec<Answer>> {
    (1..=plan.params.n)
        .map(|srv| answer_query(store, plan, srv))
        .collect()
}

/// Recovers every demand subpacket from the answers.
///
/// Demand singletons are read off directly; every demand-bearing sum
/// subtracts its linked side-information value, which cancels the
/// interference part exactly. Works identically for masked and unmasked
/// plans: the subpacket index recorded in the symbol is the position the
/// value is stored at, so the result always lines up with the store's rows.
/// `perms` is the user-side masking record; it is shape-checked and the
/// recovered coverage is verified to be total through it.
pub fn decode(answers: &[Answer], plan: &QueryPlan, perms: &[Vec<usize>]) -> Result<DecodeResult> {
    let p = &plan.params;
    if perms.len() != p.k || perms.iter().any(|perm| perm.len() != p.l) {
        return Err(Error::MalformedPermutation(format!(
            "expected {} permutations of length {}",
            p.k, p.l
        )));
    }
    if answers.len() != p.n {
        return Err(Error::Decode(format!(
            "expected {} answers, got {}",
            p.n,
            answers.len()
        )));
    }
    for (srv, answer) in answers.iter().enumerate() {
        if answer.values.len() != plan.servers[srv].len() {
            return Err(Error::Decode(format!(
                "server {} answered {} values for {} symbols",
                srv + 1,
                answer.values.len(),
                plan.servers[srv].len()
            )));
        }
    }
    let mut recovered: BTreeMap<usize, BTreeMap<usize, FieldElement>> = plan
        .demand_window()
        .into_iter()
        .map(|i| (i, BTreeMap::new()))
        .collect();
    for (srv, list) in plan.servers.iter().enumerate() {
        for (pos, spec) in list.iter().enumerate() {
            let Some(message) = spec.demand_entry else {
                continue;
            };
            let mut value = answers[srv].values[pos];
            if spec.support.len() >= 2 {
                let link = spec.side_info.ok_or_else(|| {
                    Error::Decode(format!(
                        "symbol {} at server {} has no side-information link",
                        pos + 1,
                        srv + 1
                    ))
                })?;
                let side = answers
                    .get(link.server.wrapping_sub(1))
                    .and_then(|a| a.values.get(link.symbol.wrapping_sub(1)))
                    .ok_or_else(|| {
                        Error::Decode(format!(
                            "symbol {} at server {} links to missing {}:{}",
                            pos + 1,
                            srv + 1,
                            link.server,
                            link.symbol
                        ))
                    })?;
                value = value.sub(side)?;
            }
            let index = spec.entries[&message];
            if recovered
                .get_mut(&message)
                .ok_or_else(|| Error::Decode(format!("message {message} is not demanded")))?
                .insert(index, value)
                .is_some()
            {
                return Err(Error::Decode(format!(
                    "subpacket {index} of message {message} decoded twice"
                )));
            }
        }
    }
    let mut rows = BTreeMap::new();
    for (message, by_index) in recovered {
        if by_index.len() != p.l {
            return Err(Error::Decode(format!(
                "message {message}: recovered {} of {} subpackets",
                by_index.len(),
                p.l
            )));
        }
        let row: Vec<FieldElement> = (1..=p.l).map(|t| by_index[&t]).collect();
        rows.insert(message, row);
    }
    Ok(DecodeResult { recovered: rows })
}

/// The plan linearized: one 0/1 row per transmitted symbol (servers in
/// order), one column per (message, subpacket) pair, flattened as
/// (message-1)*L + (index-1).
pub fn coefficient_matrix(plan: &QueryPlan) -> Vec<Vec<u8>> {
    let p = &plan.params;
    let cols = p.k * p.l;
    plan.servers
        .iter()
        .flatten()
        .map(|spec| {
            let mut row = vec![0u8; cols];
            for (&message, &index) in &spec.entries {
                row[(message - 1) * p.l + (index - 1)] = 1;
            }
            row
        })
        .collect()
}

/// target -= factor * source (mod q), touching columns from `from` on.
fn row_subtract(target: &mut [u64], source: &[u64], factor: u64, from: usize, q: u64) {
    for (t, s) in target.iter_mut().zip(source).skip(from) {
        if *s != 0 {
            *t = (*t + q - mul_mod(factor, *s, q)) % q;
        }
    }
}

/// Reduced row echelon form over F_q: pivot rows keyed by pivot column,
/// kept fully reduced (every pivot row has zeros at all other pivot
/// columns and a unit leading entry).
fn rref(rows: Vec<Vec<u64>>, q: u64) -> BTreeMap<usize, Vec<u64>> {
    let mut pivots: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for mut row in rows {
        // Reduce until the row dies (linearly dependent) or yields a pivot.
        while let Some(col) = row.iter().position(|&v| v != 0) {
            if let Some(pivot) = pivots.get(&col) {
                let factor = row[col];
                row_subtract(&mut row, pivot, factor, col, q);
                continue;
            }
            // New pivot: first clear the row at every later pivot column so
            // it is reduced itself, then normalize, then sweep the column
            // out of the existing basis.
            let laters: Vec<usize> = pivots.range(col + 1..).map(|(&c, _)| c).collect();
            for pc in laters {
                let factor = row[pc];
                if factor != 0 {
                    let prow = &pivots[&pc];
                    row_subtract(&mut row, prow, factor, pc, q);
                }
            }
            let inv = inv_mod(row[col], q);
            for v in row.iter_mut().skip(col) {
                *v = mul_mod(*v, inv, q);
            }
            for pivot in pivots.values_mut() {
                let factor = pivot[col];
                if factor != 0 {
                    row_subtract(pivot, &row, factor, col, q);
                }
            }
            pivots.insert(col, row);
            break;
        }
    }
    pivots
}

/// True iff every demand subpacket's unit vector lies in the row space of
/// the coefficient matrix over F_q — the link-free decodability check.
/// With the basis in reduced echelon form, a unit vector e_c is spanned iff
/// the basis has a pivot at c and that row is exactly e_c.
pub fn oracle_decodable(plan: &QueryPlan, q: u64) -> Result<bool> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let p = &plan.params;
    let rows: Vec<Vec<u64>> = coefficient_matrix(plan)
        .into_iter()
        .map(|row| row.into_iter().map(u64::from).collect())
        .collect();
    let basis = rref(rows, q);
    for message in plan.demand_window() {
        for index in 1..=p.l {
            let col = (message - 1) * p.l + (index - 1);
            let Some(row) = basis.get(&col) else {
                return Ok(false);
            };
            let unit = row.iter().enumerate().all(|(c, &v)| (c == col) == (v != 0));
            if !unit {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Outcome of one full simulated retrieval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTripReport {
    pub params: Params,
    pub demand_index: usize,
    pub q: u64,
    pub rate: BigRational,
    pub decode_ok: bool,
    pub oracle: bool,
    pub ok: bool,
}

impl RoundTripReport {
    pub fn to_json(&self) -> Value {
        json!({
            "params": serde_json::to_value(self.params).expect("params serialize"),
            "rate": ratio_to_json(&self.rate),
            "ok": self.ok,
            "oracle": self.oracle,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "rate {}/{}, decode {}, oracle {}",
            self.rate.numer(),
            self.rate.denom(),
            if self.decode_ok { "OK" } else { "FAIL" },
            if self.oracle { "OK" } else { "FAIL" },
        )
    }
}

/// Builds the plan for (N,K,D,j), masks it, draws a random store over F_q,
/// answers, decodes, and cross-checks with the oracle. The store and mask
/// seeds are split deterministically from `seed`. The achieved rate
/// D*L/(N*symbols-per-server) is computed from the plan itself and checked
/// against the closed form before returning.
pub fn run_round_trip(
    n: usize,
    k: usize,
    d: usize,
    j: usize,
    q: u64,
    seed: u64,
) -> Result<RoundTripReport> {
    let params = Params::derive(n, k, d)?;
    let plan = build_canonical_plan(&params, j)?;
    let (decode_ok, masked) = masked_round(&plan, q, seed)?;
    let oracle = oracle_decodable(&masked, q)?;
    let rate = BigRational::new(
        int(d as u64) * pow(n as u64, params.g),
        int(n as u64) * int(masked.servers[0].len() as u64),
    );
    assert_eq!(rate, optimal_rate(&params), "achieved rate must be optimal");
    Ok(RoundTripReport {
        params,
        demand_index: j,
        q,
        rate,
        decode_ok,
        oracle,
        ok: decode_ok && oracle,
    })
}

/// Masks `plan` and plays one store through it, reporting whether decoding
/// reproduced the demand rows; the masked plan is returned for reuse (the
/// oracle is not run here). Store and mask seeds split from `seed` exactly
/// as in [`run_round_trip`].
pub fn masked_round(plan: &QueryPlan, q: u64, seed: u64) -> Result<(bool, QueryPlan)> {
    let params = &plan.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store_seed = rng.next_u64();
    let mask_seed = rng.next_u64();
    let store = MessageStore::generate(store_seed, q, params.k, params.l)?;
    let (masked, perms) = mask_plan(plan, mask_seed)?;
    let answers = answer_all(&store, &masked)?;
    let decoded = decode(&answers, &masked, &perms)?;
    let mut decode_ok = true;
    for message in masked.demand_window() {
        if decoded.row(message) != Some(store.row(message)?.as_slice()) {
            decode_ok = false;
        }
    }
    Ok((decode_ok, masked))
}
