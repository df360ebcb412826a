//! Scheme parameters and the closed-form rate and subpacketization bounds.
//!
//! Everything here is exact: rates are `BigRational`, counts are integers,
//! and the geometric sums (N^x - 1)/(N - 1) are evaluated as explicit sums
//! 1 + N + ... + N^(x-1). Floating point is deliberately absent.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Integer;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::ratio::{format_ratio, geometric_sum, int, pow, ratio_to_json};

/// Which half of the parameter space (by demand size) an instance falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// 2D <= K: the single-phase alternating-block construction applies.
    #[serde(rename = "SMALL_D")]
    SmallD,
    /// 2D > K: every window shares a common core; two-phase construction.
    #[serde(rename = "LARGE_D")]
    LargeD,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::SmallD => "SMALL_D",
            Regime::LargeD => "LARGE_D",
        }
    }
}

/// Derived parameters of one retrieval instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    /// floor(K/D)
    pub f: usize,
    /// ceil(K/D)
    pub g: usize,
    /// K - D(g-1); block size of the first partition class.
    #[serde(rename = "M")]
    pub m: usize,
    /// Number of candidate demand windows, K - D + 1.
    #[serde(rename = "E")]
    pub e: usize,
    /// Subpacketization level N^g used by the scheme.
    #[serde(rename = "L")]
    pub l: usize,
    pub regime: Regime,
}

impl Params {
    /// Derives all fields from (N, K, D), validating 2 <= D <= K-1 and N >= 2.
    pub fn derive(n: usize, k: usize, d: usize) -> Result<Params> {
        if d < 2 {
            return Err(Error::InvalidParams(format!("D must be >= 2 (got {d})")));
        }
        Self::derive_relaxed(n, k, d)
    }

    /// Like [`Params::derive`] but accepts D = 1. The two-phase reduction for
    /// large demands produces sub-instances with D = 1 when K = D + 1, so the
    /// builder must handle them even though the user-facing problem starts at
    /// D = 2.
    pub(crate) fn derive_relaxed(n: usize, k: usize, d: usize) -> Result<Params> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("N must be >= 2 (got {n})")));
        }
        if d < 1 {
            return Err(Error::InvalidParams("D must be >= 1".into()));
        }
        if d > k.saturating_sub(1) {
            return Err(Error::InvalidParams(format!(
                "D must be <= K-1 (got D={d}, K={k})"
            )));
        }
        let f = k / d;
        let g = k.div_ceil(d);
        let m = k - d * (g - 1);
        let e = k - d + 1;
        let l = (n as u128)
            .checked_pow(g as u32)
            .filter(|&v| v <= usize::MAX as u128)
            .ok_or_else(|| {
                Error::InvalidParams(format!("subpacketization N^g = {n}^{g} overflows"))
            })? as usize;
        let regime = if 2 * d > k {
            Regime::LargeD
        } else {
            Regime::SmallD
        };
        let p = Params {
            n,
            k,
            d,
            f,
            g,
            m,
            e,
            l,
            regime,
        };
        debug_assert!(p.g - p.f <= 1);
        debug_assert!(p.m >= 1 && p.m <= p.d);
        debug_assert!((p.m == p.d) == k.is_multiple_of(d));
        Ok(p)
    }

    /// The demand window W_j = [j : j+D-1], 1-based.
    pub fn demand_window(&self, j: usize) -> Result<Vec<usize>> {
        if j == 0 || j > self.e {
            return Err(Error::InvalidDemandIndex { j, e: self.e });
        }
        Ok((j..j + self.d).collect())
    }
}

impl fmt::Display for Params {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "(N={}, K={}, D={})", self.n, self.k, self.d)
    }
}

/// The optimal rate D*N^f / (D*N*(N^f - 1)/(N - 1) + K - D*f), exact.
pub fn optimal_rate(params: &Params) -> BigRational {
    let n = params.n as u64;
    let d = int(params.d as u64);
    let numer = &d * pow(n, params.f);
    let denom =
        &d * int(n) * geometric_sum(n, params.f) + int((params.k - params.d * params.f) as u64);
    BigRational::new(numer, denom)
}

/// Minimum subpacketization compatible with the optimal rate:
/// N^g / gcd(N^g, D*(N^g - 1)/(N - 1) + K - D*g).
pub fn subpack_lower(params: &Params) -> BigInt {
    let n = params.n as u64;
    let l = pow(n, params.g);
    // K - D*g is negative whenever D does not divide K; stay signed.
    let per_server = int(params.d as u64) * geometric_sum(n, params.g) + int(params.k as u64)
        - int((params.d * params.g) as u64);
    let gcd = l.gcd(&per_server);
    l / gcd
}

/// Subpacketization used by the construction, N^g.
pub fn subpack_upper(params: &Params) -> BigInt {
    pow(params.n as u64, params.g)
}

/// True iff gcd(N, K - D(g-1)) = 1, in which case the two subpacketization
/// bounds provably coincide (checked here as well).
pub fn coprimality_tightness(params: &Params) -> bool {
    let tight = int(params.n as u64).gcd(&int(params.m as u64)) == int(1);
    if tight {
        assert_eq!(
            subpack_lower(params),
            subpack_upper(params),
            "coprime N and K-D(g-1) must force matching bounds at {params}"
        );
    }
    tight
}

/// Number of symbols the user retrieves from each server.
///
/// Small-demand regime: M*(N^g - 1)/(N - 1) + (D - M)*N*(N^f - 1)/(N - 1).
/// Large-demand regime: (2D - K)*N + (K - D)*(N + 1).
pub fn symbols_per_server(params: &Params) -> BigInt {
    let n = params.n as u64;
    let count = match params.regime {
        Regime::SmallD => {
            int(params.m as u64) * geometric_sum(n, params.g)
                + int((params.d - params.m) as u64) * int(n) * geometric_sum(n, params.f)
        }
        Regime::LargeD => {
            int((2 * params.d - params.k) as u64) * int(n)
                + int((params.k - params.d) as u64) * int(n + 1)
        }
    };
    // D*L/(N*R) is the download per server forced by the rate; the explicit
    // census must agree with it.
    let forced = BigRational::from(int(params.d as u64) * pow(n, params.g))
        / (BigRational::from(int(n)) * optimal_rate(params));
    assert!(forced.is_integer(), "D*L/(N*R) must be an integer");
    assert_eq!(forced.to_integer(), count, "symbol census mismatch");
    count
}

/// An ordering of the E window indices, used by the converse bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    /// Validates that `ordering` is a bijection on `[1:E]`.
    pub fn new(ordering: Vec<usize>, e: usize) -> Result<Permutation> {
        if ordering.len() != e {
            return Err(Error::MalformedPermutation(format!(
                "expected {} entries, got {}",
                e,
                ordering.len()
            )));
        }
        let seen: BTreeSet<usize> = ordering.iter().copied().collect();
        if seen.len() != e || seen.iter().any(|&v| v == 0 || v > e) {
            return Err(Error::MalformedPermutation(format!(
                "entries must cover 1..={e} exactly once"
            )));
        }
        Ok(Permutation(ordering))
    }

    pub fn identity(e: usize) -> Permutation {
        Permutation((1..=e).collect())
    }

    pub fn ordering(&self) -> &[usize] {
        &self.0
    }
}

/// The window-ordering upper bound on the retrieval rate:
/// D * (sum_j N^-(j-1) * |W_pi(j) \ union of earlier windows|)^-1.
pub fn converse_bound(params: &Params, pi: &Permutation) -> Result<BigRational> {
    if pi.0.len() != params.e {
        return Err(Error::MalformedPermutation(format!(
            "permutation is over {} windows but E = {}",
            pi.0.len(),
            params.e
        )));
    }
    let n = int(params.n as u64);
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    let mut weight = BigRational::from(int(1));
    let inv_n = BigRational::new(int(1), n);
    let mut total = BigRational::from(int(0));
    for &w in &pi.0 {
        let window = params.demand_window(w)?;
        let fresh = window.iter().filter(|i| !covered.contains(i)).count();
        total += &weight * BigRational::from(int(fresh as u64));
        covered.extend(window);
        weight *= &inv_n;
    }
    Ok(BigRational::from(int(params.d as u64)) / total)
}

/// The window ordering that makes the converse bound meet the achievable
/// rate: the f disjoint windows (j-1)D+1 first, then (unless D | K) the
/// final window K-D+1 covering the remainder, then the rest ascending.
pub fn canonical_permutation(params: &Params) -> Permutation {
    let mut ordering: Vec<usize> = (1..=params.f).map(|j| (j - 1) * params.d + 1).collect();
    if !params.k.is_multiple_of(params.d) {
        ordering.push(params.k - params.d + 1);
    }
    let used: BTreeSet<usize> = ordering.iter().copied().collect();
    ordering.extend((1..=params.e).filter(|j| !used.contains(j)));
    let pi = Permutation::new(ordering, params.e).expect("canonical ordering is a permutation");
    debug_assert_eq!(
        converse_bound(params, &pi).unwrap(),
        optimal_rate(params),
        "canonical ordering must attain the achievable rate"
    );
    pi
}

/// One-stop bounds summary, as serialized by the CLI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundsReport {
    pub params: Params,
    pub rate: BigRational,
    pub l_lower: BigInt,
    pub l_upper: BigInt,
    pub tight: bool,
    pub symbols_per_server: BigInt,
}

impl BoundsReport {
    pub fn compute(n: usize, k: usize, d: usize) -> Result<BoundsReport> {
        let params = Params::derive(n, k, d)?;
        Ok(BoundsReport {
            params,
            rate: optimal_rate(&params),
            l_lower: subpack_lower(&params),
            l_upper: subpack_upper(&params),
            tight: coprimality_tightness(&params),
            symbols_per_server: symbols_per_server(&params),
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "N": self.params.n,
            "K": self.params.k,
            "D": self.params.d,
            "f": self.params.f,
            "g": self.params.g,
            "M": self.params.m,
            "E": self.params.e,
            "rate": ratio_to_json(&self.rate),
            "L_lower": crate::ratio::bigint_to_json(&self.l_lower),
            "L_upper": crate::ratio::bigint_to_json(&self.l_upper),
            "tight": self.tight,
            "symbols_per_server": crate::ratio::bigint_to_json(&self.symbols_per_server),
        })
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        format!(
            "N={} K={} D={} ({})\n\
             f={} g={} M={} E={}\n\
             rate          = {}\n\
             L_lower       = {}\n\
             L_upper       = {}\n\
             bounds tight  = {}\n\
             symbols/server = {}",
            p.n,
            p.k,
            p.d,
            p.regime.name(),
            p.f,
            p.g,
            p.m,
            p.e,
            format_ratio(&self.rate),
            self.l_lower,
            self.l_upper,
            if self.tight { "yes" } else { "no" },
            self.symbols_per_server,
        )
    }
}
