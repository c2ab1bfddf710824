//! Built-in domains and random problem generators.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pddl::{parse_domain, parse_problem, DomainModel, ProblemModel};

pub const BLOCKS_DOMAIN: &str = "(define (domain blocks)
  (:requirements :strips :typing)
  (:types block)
  (:predicates (on ?x - block ?y - block) (on-table ?x - block) (clear ?x - block)
               (holding ?x - block) (hand-empty))
  (:action Pickup
    :parameters (?x - block)
    :precondition (and (clear ?x) (on-table ?x) (hand-empty))
    :effect (and (holding ?x) (not (clear ?x)) (not (on-table ?x)) (not (hand-empty))))
  (:action Putdown
    :parameters (?x - block)
    :precondition (and (holding ?x))
    :effect (and (on-table ?x) (clear ?x) (hand-empty) (not (holding ?x))))
  (:action Stack
    :parameters (?x - block ?y - block)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (on ?x ?y) (clear ?x) (hand-empty) (not (holding ?x)) (not (clear ?y))))
  (:action Unstack
    :parameters (?x - block ?y - block)
    :precondition (and (on ?x ?y) (clear ?x) (hand-empty))
    :effect (and (holding ?x) (clear ?y) (not (on ?x ?y)) (not (clear ?x)) (not (hand-empty)))))
";

pub const LOGISTICS_DOMAIN: &str = "(define (domain logistics)
  (:requirements :strips :typing)
  (:types package truck airplane location city - object
          airport - location)
  (:predicates (obj-at ?p - package ?l - location) (truck-at ?t - truck ?l - location)
               (airplane-at ?a - airplane ?l - airport) (in-truck ?p - package ?t - truck)
               (in-airplane ?p - package ?a - airplane) (in-city ?l - location ?c - city))
  (:action load-truck
    :parameters (?p - package ?t - truck ?l - location)
    :precondition (and (obj-at ?p ?l) (truck-at ?t ?l))
    :effect (and (in-truck ?p ?t) (not (obj-at ?p ?l))))
  (:action unload-truck
    :parameters (?p - package ?t - truck ?l - location)
    :precondition (and (in-truck ?p ?t) (truck-at ?t ?l))
    :effect (and (obj-at ?p ?l) (not (in-truck ?p ?t))))
  (:action load-airplane
    :parameters (?p - package ?a - airplane ?l - airport)
    :precondition (and (obj-at ?p ?l) (airplane-at ?a ?l))
    :effect (and (in-airplane ?p ?a) (not (obj-at ?p ?l))))
  (:action unload-airplane
    :parameters (?p - package ?a - airplane ?l - airport)
    :precondition (and (in-airplane ?p ?a) (airplane-at ?a ?l))
    :effect (and (obj-at ?p ?l) (not (in-airplane ?p ?a))))
  (:action drive-truck
    :parameters (?t - truck ?from - location ?to - location ?c - city)
    :precondition (and (truck-at ?t ?from) (in-city ?from ?c) (in-city ?to ?c))
    :effect (and (truck-at ?t ?to) (not (truck-at ?t ?from))))
  (:action fly-airplane
    :parameters (?a - airplane ?from - airport ?to - airport)
    :precondition (and (airplane-at ?a ?from))
    :effect (and (airplane-at ?a ?to) (not (airplane-at ?a ?from)))))
";

pub fn blocks_domain() -> DomainModel {
    parse_domain(BLOCKS_DOMAIN).expect("built-in blocks domain parses")
}

pub fn logistics_domain() -> DomainModel {
    parse_domain(LOGISTICS_DOMAIN).expect("built-in logistics domain parses")
}

/// Blocks problem from towers listed bottom to top and explicit goal atoms.
pub fn blocks_problem(name: &str, towers: &[&[&str]], goal: &[(&str, &[&str])], dom: &DomainModel) -> ProblemModel {
    let towers: Vec<Vec<String>> = towers
        .iter()
        .map(|t| t.iter().map(|s| s.to_string()).collect())
        .collect();
    let goal: Vec<String> = goal
        .iter()
        .map(|(p, args)| {
            let mut s = format!("({p}");
            for a in args.iter() {
                s.push(' ');
                s.push_str(a);
            }
            s.push(')');
            s
        })
        .collect();
    parse_problem(&blocks_text(name, &towers, &goal), dom).expect("generated blocks problem parses")
}

fn blocks_text(name: &str, towers: &[Vec<String>], goal: &[String]) -> String {
    let mut out = format!("(define (problem {name}) (:domain blocks)\n  (:objects");
    for b in towers.iter().flatten() {
        let _ = write!(out, " {b}");
    }
    if towers.iter().any(|t| !t.is_empty()) {
        out.push_str(" - block");
    }
    out.push_str(")\n  (:init");
    for t in towers {
        for (i, b) in t.iter().enumerate() {
            if i == 0 {
                let _ = write!(out, " (on-table {b})");
            } else {
                let _ = write!(out, " (on {b} {})", t[i - 1]);
            }
        }
        if let Some(top) = t.last() {
            let _ = write!(out, " (clear {top})");
        }
    }
    out.push_str(" (hand-empty))\n  (:goal (and");
    for g in goal {
        let _ = write!(out, " {g}");
    }
    out.push_str(")))\n");
    out
}

/// The worked example: D on C on B on A, goal (clear A).
pub fn tower4_problem(dom: &DomainModel) -> ProblemModel {
    blocks_problem("clear-a", &[&["A", "B", "C", "D"]], &[("clear", &["A"])], dom)
}

/// Uniformly random arrangement of `blocks` into towers (bottom to top).
fn random_towers(blocks: &[String], rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let n = blocks.len();
    if n == 0 {
        return Vec::new();
    }
    // Lah numbers L(n,k) = C(n-1,k-1) n!/k! count arrangements with k towers.
    let mut weights = Vec::with_capacity(n);
    for k in 1..=n {
        let mut w = 1.0f64;
        for i in 0..(k - 1) {
            w *= (n - 1 - i) as f64 / (i + 1) as f64;
        }
        for i in (k + 1)..=n {
            w *= i as f64;
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut k = n;
    for (i, w) in weights.iter().enumerate() {
        if pick < *w {
            k = i + 1;
            break;
        }
        pick -= w;
    }
    let mut order: Vec<String> = blocks.to_vec();
    order.shuffle(rng);
    let mut gaps: Vec<usize> = (1..n).collect();
    gaps.shuffle(rng);
    let mut cuts: Vec<usize> = gaps.into_iter().take(k - 1).collect();
    cuts.sort_unstable();
    let mut towers = Vec::with_capacity(k);
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        towers.push(order[start..c].to_vec());
        start = c;
    }
    towers
}

/// Random blocks problem over `b1..bn`: uniform initial arrangement, goal is
/// the full `on`/`on-table` description of where `moves` random block moves
/// lead from it.
pub fn gen_blocks(n_blocks: usize, moves: usize, seed: u64, dom: &DomainModel) -> ProblemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<String> = (1..=n_blocks).map(|i| format!("b{i}")).collect();
    let init = random_towers(&blocks, &mut rng);
    let mut target = init.clone();
    for _ in 0..moves {
        // (from tower, to tower or None for the table)
        let mut options: Vec<(usize, Option<usize>)> = Vec::new();
        for from in 0..target.len() {
            if target[from].len() > 1 {
                options.push((from, None));
            }
            for to in 0..target.len() {
                if to != from {
                    options.push((from, Some(to)));
                }
            }
        }
        let Some(&(from, to)) = options.choose(&mut rng) else {
            break;
        };
        let b = target[from].pop().expect("towers are never empty");
        match to {
            Some(t) => target[t].push(b),
            None => target.push(vec![b]),
        }
        if target[from].is_empty() {
            target.remove(from);
        }
    }
    let mut goal = Vec::new();
    for t in &target {
        for (i, b) in t.iter().enumerate() {
            if i == 0 {
                goal.push(format!("(on-table {b})"));
            } else {
                goal.push(format!("(on {b} {})", t[i - 1]));
            }
        }
    }
    let name = format!("blocks-{n_blocks}-{seed}");
    parse_problem(&blocks_text(&name, &init, &goal), dom).expect("generated blocks problem parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LogisticsParams {
    pub cities: usize,
    pub locs_per_city: usize,
    pub packages: usize,
    /// Trucks per city.
    pub trucks: usize,
    pub airplanes: usize,
}

impl Default for LogisticsParams {
    fn default() -> Self {
        LogisticsParams {
            cities: 3,
            locs_per_city: 2,
            packages: 1,
            trucks: 1,
            airplanes: 1,
        }
    }
}

struct LogisticsLayout {
    params: LogisticsParams,
    truck_at: Vec<(String, String)>,
    airplane_at: Vec<(String, String)>,
    package_at: Vec<(String, String)>,
    goal: Vec<(String, String)>,
}

fn loc(c: usize, i: usize) -> String {
    format!("l{c}-{i}")
}

fn truck_name(p: &LogisticsParams, c: usize, j: usize) -> String {
    if p.trucks == 1 {
        format!("t{c}")
    } else {
        format!("t{c}-{j}")
    }
}

fn logistics_text(name: &str, lay: &LogisticsLayout) -> String {
    let p = &lay.params;
    let mut out = format!("(define (problem {name}) (:domain logistics)\n  (:objects");
    for c in 0..p.cities {
        let _ = write!(out, " c{c} - city {} - airport", loc(c, 0));
        for i in 1..p.locs_per_city {
            let _ = write!(out, " {} - location", loc(c, i));
        }
        for j in 0..p.trucks {
            let _ = write!(out, " {} - truck", truck_name(p, c, j));
        }
    }
    for a in 0..p.airplanes {
        let _ = write!(out, " a{a} - airplane");
    }
    for k in 0..p.packages {
        let _ = write!(out, " p{k} - package");
    }
    out.push_str(")\n  (:init");
    for c in 0..p.cities {
        for i in 0..p.locs_per_city {
            let _ = write!(out, " (in-city {} c{c})", loc(c, i));
        }
    }
    for (t, l) in &lay.truck_at {
        let _ = write!(out, " (truck-at {t} {l})");
    }
    for (a, l) in &lay.airplane_at {
        let _ = write!(out, " (airplane-at {a} {l})");
    }
    for (pk, l) in &lay.package_at {
        let _ = write!(out, " (obj-at {pk} {l})");
    }
    out.push_str(")\n  (:goal (and");
    for (pk, l) in &lay.goal {
        let _ = write!(out, " (obj-at {pk} {l})");
    }
    out.push_str(")))\n");
    out
}

/// Random logistics problem. Location 0 of every city is its airport.
/// Every count must be at least 1.
pub fn gen_logistics(params: LogisticsParams, seed: u64, dom: &DomainModel) -> ProblemModel {
    let p = params;
    assert!(
        p.cities >= 1 && p.locs_per_city >= 1 && p.packages >= 1 && p.trucks >= 1 && p.airplanes >= 1,
        "logistics parameters must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_loc = |rng: &mut ChaCha8Rng| loc(rng.gen_range(0..p.cities), rng.gen_range(0..p.locs_per_city));
    let mut truck_at = Vec::new();
    for c in 0..p.cities {
        for j in 0..p.trucks {
            truck_at.push((truck_name(&p, c, j), loc(c, rng.gen_range(0..p.locs_per_city))));
        }
    }
    let airplane_at = (0..p.airplanes)
        .map(|a| (format!("a{a}"), loc(rng.gen_range(0..p.cities), 0)))
        .collect();
    let package_at = (0..p.packages)
        .map(|k| (format!("p{k}"), random_loc(&mut rng)))
        .collect();
    let goal = (0..p.packages)
        .map(|k| (format!("p{k}"), random_loc(&mut rng)))
        .collect();
    let lay = LogisticsLayout {
        params: p,
        truck_at,
        airplane_at,
        package_at,
        goal,
    };
    let name = format!(
        "logistics-{}x{}-{}p-{seed}",
        p.cities, p.locs_per_city, p.packages
    );
    parse_problem(&logistics_text(&name, &lay), dom).expect("generated logistics problem parses")
}

/// Package p0 at l2-0 must reach l0-0; airplane a0 starts at l1-0.
pub fn airplane_detour_problem(dom: &DomainModel) -> ProblemModel {
    let params = LogisticsParams::default();
    let lay = LogisticsLayout {
        params,
        truck_at: (0..3).map(|c| (format!("t{c}"), loc(c, 1))).collect(),
        airplane_at: vec![("a0".into(), loc(1, 0))],
        package_at: vec![("p0".into(), loc(2, 0))],
        goal: vec![("p0".into(), loc(0, 0))],
    };
    parse_problem(&logistics_text("airplane-detour", &lay), dom).expect("fixture parses")
}
