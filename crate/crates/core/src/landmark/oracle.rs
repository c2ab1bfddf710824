use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::LandmarkError;
use crate::ground::{AtomId, GroundProblem, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleVerdict {
    Landmark,
    NotLandmark,
    /// No plan of length ≤ bound exists.
    Inconclusive,
}

/// Breadth-first search to depth `bound`, never entering states rejected by
/// `blocked`. Returns whether a goal state was found.
fn goal_within(
    gp: &GroundProblem,
    bound: usize,
    max_states: usize,
    blocked: &dyn Fn(&State) -> bool,
) -> Result<bool, LandmarkError> {
    if blocked(gp.init()) {
        return Ok(false);
    }
    let mut seen: HashSet<State> = HashSet::new();
    let mut queue: VecDeque<(State, usize)> = VecDeque::new();
    seen.insert(gp.init().clone());
    queue.push_back((gp.init().clone(), 0));
    while let Some((s, d)) = queue.pop_front() {
        if s.contains_all(gp.goal()) {
            return Ok(true);
        }
        if d == bound {
            continue;
        }
        for a in gp.actions() {
            let Some(next) = gp.successor(&s, a.id) else {
                continue;
            };
            if blocked(&next) || seen.contains(&next) {
                continue;
            }
            if seen.len() >= max_states {
                return Err(LandmarkError::BudgetExceeded { limit: max_states });
            }
            seen.insert(next.clone());
            queue.push_back((next, d + 1));
        }
    }
    Ok(false)
}

/// Decides by explicit-state search whether `candidate` is true at some
/// point of every plan of length at most `plan_length_bound`.
pub fn brute_force_landmark_oracle(
    gp: &GroundProblem,
    candidate: AtomId,
    plan_length_bound: usize,
    max_states: usize,
) -> Result<OracleVerdict, LandmarkError> {
    if !goal_within(gp, plan_length_bound, max_states, &|_| false)? {
        return Ok(OracleVerdict::Inconclusive);
    }
    if gp.init().contains(candidate) {
        return Ok(OracleVerdict::Landmark);
    }
    let avoids = goal_within(gp, plan_length_bound, max_states, &|s: &State| s.contains(candidate))?;
    Ok(if avoids {
        OracleVerdict::NotLandmark
    } else {
        OracleVerdict::Landmark
    })
}

/// Number of states reachable from the initial state, or `None` past `limit`.
pub fn count_reachable_states(gp: &GroundProblem, limit: usize) -> Option<usize> {
    let mut seen: HashSet<State> = HashSet::new();
    let mut stack = vec![gp.init().clone()];
    seen.insert(gp.init().clone());
    while let Some(s) = stack.pop() {
        for a in gp.actions() {
            if let Some(next) = gp.successor(&s, a.id) {
                if seen.insert(next.clone()) {
                    if seen.len() > limit {
                        return None;
                    }
                    stack.push(next);
                }
            }
        }
    }
    Some(seen.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{blocks_domain, tower4_problem};

    #[test]
    fn tower4_verdicts() {
        let dom = blocks_domain();
        let p = tower4_problem(&dom);
        let gp = GroundProblem::from_models(dom, p);
        let v = |t: &str| brute_force_landmark_oracle(&gp, gp.parse_atom(t).unwrap(), 8, 100_000).unwrap();
        assert_eq!(v("(clear B)"), OracleVerdict::Landmark);
        assert_eq!(v("(on D C)"), OracleVerdict::Landmark);
        assert_eq!(v("(holding A)"), OracleVerdict::NotLandmark);
        let short = brute_force_landmark_oracle(&gp, gp.parse_atom("(clear B)").unwrap(), 4, 100_000).unwrap();
        assert_eq!(short, OracleVerdict::Inconclusive);
        assert!(matches!(
            brute_force_landmark_oracle(&gp, gp.parse_atom("(clear B)").unwrap(), 8, 3),
            Err(LandmarkError::BudgetExceeded { .. })
        ));
    }
}
