//! Brute-force reference scorer. Deliberately naive: quadratic loops over
//! plain tuples, exact rationals straight from num-rational, nothing shared
//! with the library's scoring code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted(u64),
    Rejected,
    HostFault,
}

#[derive(Debug, Clone)]
pub struct OProblem {
    pub pid: String,
    /// bps as numerator / denominator.
    pub bps: (i64, i64),
    pub scoring: bool,
}

#[derive(Debug, Clone)]
pub struct OSub {
    pub uid: String,
    pub pid: String,
    pub outcome: Outcome,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Dynamic points per user who attempted at least one scoring problem.
pub fn dynamic_points(problems: &[OProblem], subs: &[OSub]) -> BTreeMap<String, BigRational> {
    let mut dp: BTreeMap<String, BigRational> = BTreeMap::new();
    for p in problems.iter().filter(|p| p.scoring) {
        let mut attempted = BTreeSet::new();
        let mut best: BTreeMap<&str, u64> = BTreeMap::new();
        for s in subs.iter().filter(|s| s.pid == p.pid) {
            match s.outcome {
                Outcome::HostFault => continue,
                Outcome::Rejected => {
                    attempted.insert(s.uid.as_str());
                }
                Outcome::Accepted(rt) => {
                    attempted.insert(s.uid.as_str());
                    let e = best.entry(s.uid.as_str()).or_insert(rt);
                    if rt < *e {
                        *e = rt;
                    }
                }
            }
        }
        for u in &attempted {
            dp.entry(u.to_string()).or_insert_with(BigRational::zero);
        }
        if best.is_empty() {
            continue;
        }
        let solved = best.len() as i64;
        let ac = rat(solved, attempted.len() as i64);
        let cs = rat(p.bps.0, p.bps.1) * (BigRational::one() - ac);
        for (u, rt) in &best {
            let slower_or_equal = best.values().filter(|other| *rt <= **other).count() as i64;
            let es = rat(slower_or_equal, solved);
            *dp.get_mut(*u).unwrap() += cs.clone() + es;
        }
    }
    dp
}

/// Solved scoring problems per user.
pub fn solved_counts(problems: &[OProblem], subs: &[OSub]) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = BTreeMap::new();
    for p in problems.iter().filter(|p| p.scoring) {
        let solvers: BTreeSet<&str> = subs
            .iter()
            .filter(|s| s.pid == p.pid && matches!(s.outcome, Outcome::Accepted(_)))
            .map(|s| s.uid.as_str())
            .collect();
        for u in solvers {
            *out.entry(u.to_string()).or_default() += 1;
        }
    }
    out
}
