use std::fmt::{self, Write};

use super::{ActionSchema, AtomSchema, DomainModel, Name, ProblemModel, Term, TypedVar, ROOT_TYPE};

fn typed_names(out: &mut String, items: &[(Name, Name)], typing: bool) {
    for (i, (n, t)) in items.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if typing {
            let _ = write!(out, "{n} - {t}");
        } else {
            let _ = write!(out, "{n}");
        }
    }
}

fn typed_vars(out: &mut String, vars: &[TypedVar], typing: bool) {
    let pairs: Vec<(Name, Name)> = vars.iter().map(|v| (v.var.clone(), v.ty.clone())).collect();
    typed_names(out, &pairs, typing);
}

fn atom_schema(out: &mut String, a: &AtomSchema, params: &[TypedVar]) {
    let _ = write!(out, "({}", a.predicate);
    for t in &a.args {
        match t {
            Term::Var(i) => {
                let _ = write!(out, " {}", params[*i].var);
            }
            Term::Const(c) => {
                let _ = write!(out, " {c}");
            }
        }
    }
    out.push(')');
}

fn conjunction(out: &mut String, atoms: &[&AtomSchema], negated: &[&AtomSchema], params: &[TypedVar]) {
    out.push_str("(and");
    for a in atoms {
        out.push(' ');
        atom_schema(out, a, params);
    }
    for a in negated {
        out.push_str(" (not ");
        atom_schema(out, a, params);
        out.push(')');
    }
    out.push(')');
}

fn action(out: &mut String, a: &ActionSchema, typing: bool) {
    let _ = write!(out, "  (:action {}\n    :parameters (", a.name);
    typed_vars(out, &a.params, typing);
    out.push_str(")\n    :precondition ");
    let pre: Vec<&AtomSchema> = a.preconditions.iter().collect();
    conjunction(out, &pre, &[], &a.params);
    out.push_str("\n    :effect ");
    let add: Vec<&AtomSchema> = a.add_effects.iter().collect();
    let del: Vec<&AtomSchema> = a.del_effects.iter().collect();
    conjunction(out, &add, &del, &a.params);
    out.push_str(")\n");
}

impl DomainModel {
    fn uses_typing(&self) -> bool {
        self.types.len() > 1
            || self.requirements.iter().any(|r| r.key() == ":typing")
            || self.constants.iter().any(|(_, t)| t.key() != ROOT_TYPE)
    }
}

impl fmt::Display for DomainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let typing = self.uses_typing();
        let mut out = String::new();
        let _ = writeln!(out, "(define (domain {})", self.name);
        if !self.requirements.is_empty() {
            out.push_str("  (:requirements");
            for r in &self.requirements {
                let _ = write!(out, " {r}");
            }
            out.push_str(")\n");
        }
        if self.types.len() > 1 {
            out.push_str("  (:types");
            for t in self.types.iter().skip(1) {
                let parent = t.parent.as_ref().map(Name::as_str).unwrap_or(ROOT_TYPE);
                let _ = write!(out, " {} - {}", t.name, parent);
            }
            out.push_str(")\n");
        }
        if !self.constants.is_empty() {
            out.push_str("  (:constants ");
            typed_names(&mut out, &self.constants, typing);
            out.push_str(")\n");
        }
        out.push_str("  (:predicates");
        for p in &self.predicates {
            let _ = write!(out, " ({}", p.name);
            if !p.params.is_empty() {
                out.push(' ');
                typed_vars(&mut out, &p.params, typing);
            }
            out.push(')');
        }
        out.push_str(")\n");
        for a in &self.action_schemas {
            action(&mut out, a, typing);
        }
        out.push_str(")\n");
        f.write_str(&out)
    }
}

impl ProblemModel {
    /// Renders the problem as PDDL; `dom` decides whether types are printed.
    pub fn to_pddl(&self, dom: &DomainModel) -> String {
        let typing = dom.uses_typing();
        let mut out = String::new();
        let _ = writeln!(out, "(define (problem {})", self.name);
        let _ = writeln!(out, "  (:domain {})", self.domain_ref);
        out.push_str("  (:objects ");
        typed_names(&mut out, &self.objects, typing);
        out.push_str(")\n  (:init");
        for a in &self.init {
            let _ = write!(out, "\n    {a}");
        }
        out.push_str(")\n  (:goal (and");
        for a in &self.goal {
            let _ = write!(out, "\n    {a}");
        }
        out.push_str(")))\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::pddl::{parse_domain, parse_problem};

    #[test]
    fn typed_domain_round_trips() {
        let text = "(define (domain Log) (:requirements :strips :typing)
            (:types truck airplane - vehicle package location - object airport - location)
            (:constants hub - airport)
            (:predicates (at ?v - vehicle ?l - location) (in ?p - package ?v - vehicle))
            (:action Load :parameters (?p - package ?v - vehicle ?l - location)
              :precondition (and (at ?v ?l))
              :effect (and (in ?p ?v) (not (at ?v hub)))))";
        let dom = parse_domain(text).unwrap();
        let printed = dom.to_string();
        let again = parse_domain(&printed).unwrap();
        assert_eq!(dom, again);
        assert!(printed.contains("(:action Load"));

        let prob = parse_problem(
            "(define (problem P1) (:domain log) (:objects T1 - truck l1 - location p - package)
               (:init (at T1 l1)) (:goal (and (in p T1))))",
            &dom,
        )
        .unwrap();
        let printed = prob.to_pddl(&dom);
        assert_eq!(parse_problem(&printed, &dom).unwrap(), prob);
        assert!(printed.contains("(at T1 l1)"));
    }
}
