use std::collections::HashMap;

use super::domain::{expect_list, expect_symbol, open_definition, requirements_section, syntax, typed_list, unsupported};
use super::sexpr::{self, SExpr};
use super::{Atom, DomainModel, Name, PddlError, ProblemModel, ROOT_TYPE};

struct Objects<'a> {
    dom: &'a DomainModel,
    by_key: HashMap<String, (Name, Name)>,
}

impl Objects<'_> {
    fn ground_atom(&self, e: &SExpr) -> Result<Atom, PddlError> {
        let pos = e.pos();
        let items = expect_list(e, "a ground atom")?;
        let head = expect_symbol(items.first(), pos, "a predicate name")?;
        let pred = self
            .dom
            .predicate(head)
            .ok_or_else(|| PddlError::UndeclaredPredicate {
                name: head.to_string(),
                line: pos.line,
                col: pos.col,
            })?;
        let args = &items[1..];
        if args.len() != pred.params.len() {
            return Err(PddlError::Arity {
                name: pred.name.to_string(),
                expected: pred.params.len(),
                found: args.len(),
                line: pos.line,
                col: pos.col,
            });
        }
        let mut names = Vec::with_capacity(args.len());
        for (arg, param) in args.iter().zip(&pred.params) {
            let text = expect_symbol(Some(arg), arg.pos(), "an object name")?;
            let (obj, ty) =
                self.by_key
                    .get(&text.to_ascii_lowercase())
                    .ok_or_else(|| PddlError::UnknownObject {
                        name: text.to_string(),
                        line: arg.pos().line,
                        col: arg.pos().col,
                    })?;
            if !self.dom.is_subtype(ty, &param.ty) {
                return Err(PddlError::IllTyped {
                    msg: format!(
                        "`{obj}` has type `{ty}` but `{}` expects `{}` for {}",
                        pred.name, param.ty, param.var
                    ),
                    line: arg.pos().line,
                    col: arg.pos().col,
                });
            }
            names.push(obj.clone());
        }
        Ok(Atom {
            predicate: pred.name.clone(),
            args: names,
        })
    }

    fn goal(&self, e: &SExpr, out: &mut Vec<Atom>) -> Result<(), PddlError> {
        let items = expect_list(e, "a goal")?;
        if items.is_empty() {
            return Ok(());
        }
        match e.head_keyword().as_deref() {
            Some("and") => {
                for sub in &items[1..] {
                    self.goal(sub, out)?;
                }
                Ok(())
            }
            Some("not") => Err(unsupported(e.pos(), ":negative-preconditions")),
            Some("or") | Some("imply") => Err(unsupported(e.pos(), ":disjunctive-preconditions")),
            Some("exists") => Err(unsupported(e.pos(), ":existential-preconditions")),
            Some("forall") => Err(unsupported(e.pos(), ":universal-preconditions")),
            Some("=") => Err(unsupported(e.pos(), ":equality")),
            _ => {
                let atom = self.ground_atom(e)?;
                if !out.contains(&atom) {
                    out.push(atom);
                }
                Ok(())
            }
        }
    }
}

/// Parses a problem against an already parsed domain.
pub fn parse_problem(text: &str, dom: &DomainModel) -> Result<ProblemModel, PddlError> {
    let root = sexpr::parse_one(text)?;
    let (name, sections) = open_definition(&root, "problem")?;

    let mut domain_ref = None;
    let mut object_sections = Vec::new();
    let mut init_section = None;
    let mut goal_section = None;
    for section in sections {
        let items = expect_list(section, "a section")?;
        let kw = expect_symbol(items.first(), section.pos(), "a section keyword")?.to_ascii_lowercase();
        let body = &items[1..];
        match kw.as_str() {
            ":domain" => {
                domain_ref = Some(Name::new(expect_symbol(body.first(), section.pos(), "a domain name")?))
            }
            ":requirements" => {
                requirements_section(body)?;
            }
            ":objects" => object_sections.push(body),
            ":init" => init_section = Some(body),
            ":goal" => {
                if body.len() != 1 {
                    return Err(syntax(section.pos(), ":goal takes exactly one formula"));
                }
                goal_section = Some(&body[0]);
            }
            ":metric" => return Err(unsupported(section.pos(), ":fluents")),
            ":constraints" => return Err(unsupported(section.pos(), ":constraints")),
            _ => return Err(syntax(section.pos(), format!("unknown problem section `{kw}`"))),
        }
    }

    let domain_ref = domain_ref.ok_or_else(|| syntax(root.pos(), "missing (:domain NAME)"))?;
    if domain_ref != dom.name {
        return Err(PddlError::DomainMismatch {
            expected: dom.name.to_string(),
            found: domain_ref.to_string(),
        });
    }

    let mut objects = Objects {
        dom,
        by_key: HashMap::new(),
    };
    for (c, ty) in &dom.constants {
        objects
            .by_key
            .insert(c.key().to_string(), (c.clone(), ty.clone()));
    }
    let mut declared = Vec::new();
    for body in object_sections {
        for (obj, ty, pos) in typed_list(body)? {
            let ty = match ty {
                Some(t) => {
                    let idx = dom.type_index(t.key()).ok_or_else(|| PddlError::UndeclaredType {
                        name: t.to_string(),
                        line: pos.line,
                        col: pos.col,
                    })?;
                    dom.types[idx].name.clone()
                }
                None => Name::new(ROOT_TYPE),
            };
            if objects
                .by_key
                .insert(obj.key().to_string(), (obj.clone(), ty.clone()))
                .is_some()
            {
                return Err(PddlError::Duplicate {
                    what: "object",
                    name: obj.to_string(),
                    line: pos.line,
                    col: pos.col,
                });
            }
            declared.push((obj, ty));
        }
    }

    let mut init = Vec::new();
    for e in init_section.unwrap_or(&[]) {
        if e.head_keyword().as_deref() == Some("=") {
            return Err(unsupported(e.pos(), ":fluents"));
        }
        let atom = objects.ground_atom(e)?;
        if !init.contains(&atom) {
            init.push(atom);
        }
    }
    let mut goal = Vec::new();
    if let Some(g) = goal_section {
        objects.goal(g, &mut goal)?;
    }

    Ok(ProblemModel {
        name,
        domain_ref,
        objects: declared,
        init,
        goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_domain;

    const DOMAIN: &str = "(define (domain d) (:requirements :strips :typing)
        (:types block - object)
        (:predicates (on ?x - block ?y - block) (clear ?x - block) (flag)))";

    #[test]
    fn goal_subset_of_init_is_valid() {
        let dom = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects a b - block)
               (:init (on a b) (clear a)) (:goal (and (clear a))))",
            &dom,
        )
        .unwrap();
        assert_eq!(p.init.len(), 2);
        assert_eq!(p.goal.len(), 1);
        assert!(p.goal.iter().all(|g| p.init.contains(g)));
    }

    #[test]
    fn undeclared_object_type() {
        let dom = parse_domain(DOMAIN).unwrap();
        let err = parse_problem(
            "(define (problem p) (:domain d) (:objects a - brick) (:init) (:goal (flag)))",
            &dom,
        )
        .unwrap_err();
        assert!(matches!(err, PddlError::UndeclaredType { .. }));
    }

    #[test]
    fn unknown_object_and_domain_mismatch() {
        let dom = parse_domain(DOMAIN).unwrap();
        let err = parse_problem(
            "(define (problem p) (:domain d) (:objects a - block) (:init (clear z)) (:goal (flag)))",
            &dom,
        )
        .unwrap_err();
        assert!(matches!(err, PddlError::UnknownObject { .. }));
        let err = parse_problem("(define (problem p) (:domain other) (:goal (flag)))", &dom).unwrap_err();
        assert!(matches!(err, PddlError::DomainMismatch { .. }));
    }

    #[test]
    fn ill_typed_atom() {
        let dom = parse_domain(
            "(define (domain d) (:requirements :typing) (:types block place)
             (:predicates (clear ?x - block)))",
        )
        .unwrap();
        let err = parse_problem(
            "(define (problem p) (:domain d) (:objects t - place) (:init (clear t)) (:goal (and)))",
            &dom,
        )
        .unwrap_err();
        assert!(matches!(err, PddlError::IllTyped { .. }));
    }
}
