//! Per-message index masking.
//!
//! Before sending a plan, the user relabels each message's subpacket
//! indices by an independent uniform permutation known only to the user.
//! Servers then see index values that are exchangeable regardless of which
//! window is demanded; combined with the demand-independent shape this is
//! what makes the queries uninformative.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scheme::QueryPlan;

/// K identity permutations of `[1:L]`; masking with these is a no-op.
pub fn identity_perms(k: usize, l: usize) -> Vec<Vec<usize>> {
    vec![(1..=l).collect(); k]
}

/// K independent uniform permutations of `[1:L]` from a seeded ChaCha8 stream.
pub fn draw_perms(k: usize, l: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let mut perm: Vec<usize> = (1..=l).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect()
}

fn check_perms(perms: &[Vec<usize>], k: usize, l: usize) -> Result<()> {
    if perms.len() != k {
        return Err(Error::MalformedPermutation(format!(
            "expected {k} per-message permutations, got {}",
            perms.len()
        )));
    }
    for (m, perm) in perms.iter().enumerate() {
        let mut seen = vec![false; l];
        if perm.len() != l {
            return Err(Error::MalformedPermutation(format!(
                "message {}: permutation length {} != L = {l}",
                m + 1,
                perm.len()
            )));
        }
        for &v in perm {
            if v == 0 || v > l || seen[v - 1] {
                return Err(Error::MalformedPermutation(format!(
                    "message {}: not a permutation of 1..={l}",
                    m + 1
                )));
            }
            seen[v - 1] = true;
        }
    }
    Ok(())
}

/// Relabels every symbol's subpacket indices through `perms`
/// (index t of message i becomes `perms[i-1][t-1]`). Supports, demand marks,
/// and side-information links are untouched; all plan invariants carry over,
/// which is re-checked before returning.
pub fn apply_masks(plan: &QueryPlan, perms: &[Vec<usize>]) -> Result<QueryPlan> {
    check_perms(perms, plan.params.k, plan.params.l)?;
    let mut masked = plan.clone();
    for list in &mut masked.servers {
        for spec in list {
            for (&message, index) in spec.entries.iter_mut() {
                *index = perms[message - 1][*index - 1];
            }
        }
    }
    masked.validate()?;
    Ok(masked)
}

/// Draws fresh per-message permutations from `seed` and masks the plan,
/// returning both; the permutations stay user-side for decoding.
pub fn mask_plan(plan: &QueryPlan, seed: u64) -> Result<(QueryPlan, Vec<Vec<usize>>)> {
    let perms = draw_perms(plan.params.k, plan.params.l, seed);
    let masked = apply_masks(plan, &perms)?;
    Ok((masked, perms))
}
