use std::collections::HashMap;

use super::sexpr::{self, Pos, SExpr};
use super::{
    ActionSchema, AtomSchema, DomainModel, Name, PddlError, PredicateSchema, Term, TypeDecl,
    TypedVar, ROOT_TYPE,
};

const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips", ":typing"];

pub(super) fn syntax(pos: Pos, msg: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    }
}

pub(super) fn unsupported(pos: Pos, keyword: &str) -> PddlError {
    PddlError::UnsupportedRequirement {
        keyword: keyword.to_string(),
        line: pos.line,
        col: pos.col,
    }
}

pub(super) fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    e.as_list()
        .ok_or_else(|| syntax(e.pos(), format!("expected a list for {what}")))
}

pub(super) fn expect_symbol<'a>(e: Option<&'a SExpr>, at: Pos, what: &str) -> Result<&'a str, PddlError> {
    match e {
        Some(SExpr::Atom { text, .. }) => Ok(text),
        Some(other) => Err(syntax(other.pos(), format!("expected {what}"))),
        None => Err(syntax(at, format!("missing {what}"))),
    }
}

/// Checks `(define (<kind> NAME) ...)` and returns the name plus the section list.
pub(super) fn open_definition<'a>(
    root: &'a SExpr,
    kind: &str,
) -> Result<(Name, &'a [SExpr]), PddlError> {
    let items = expect_list(root, "a definition")?;
    let define = expect_symbol(items.first(), root.pos(), "`define`")?;
    if !define.eq_ignore_ascii_case("define") {
        return Err(syntax(items[0].pos(), "expected `define`"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(root.pos(), format!("missing ({kind} NAME) header")))?;
    let header_items = expect_list(header, "the definition header")?;
    let k = expect_symbol(header_items.first(), header.pos(), kind)?;
    if !k.eq_ignore_ascii_case(kind) {
        return Err(syntax(header.pos(), format!("expected ({kind} NAME)")));
    }
    let name = expect_symbol(header_items.get(1), header.pos(), "a name")?;
    if header_items.len() > 2 {
        return Err(syntax(header_items[2].pos(), "unexpected token in header"));
    }
    Ok((Name::new(name), &items[2..]))
}

/// Parses `a b - t c` style lists. Entries without a type get `None`.
pub(super) fn typed_list(items: &[SExpr]) -> Result<Vec<(Name, Option<Name>, Pos)>, PddlError> {
    let mut out: Vec<(Name, Option<Name>, Pos)> = Vec::new();
    let mut pending = 0usize;
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        match item {
            SExpr::Atom { text, pos } if text == "-" => {
                let ty = match items.get(i + 1) {
                    Some(SExpr::Atom { text, .. }) => Name::new(text),
                    Some(SExpr::List { pos, .. }) => {
                        return Err(syntax(*pos, "`either` types are not supported"))
                    }
                    None => return Err(syntax(*pos, "missing type after `-`")),
                };
                if pending == 0 {
                    return Err(syntax(*pos, "`-` without preceding names"));
                }
                let n = out.len();
                for entry in &mut out[n - pending..] {
                    entry.1 = Some(ty.clone());
                }
                pending = 0;
                i += 2;
            }
            SExpr::Atom { text, pos } => {
                out.push((Name::new(text), None, *pos));
                pending += 1;
                i += 1;
            }
            SExpr::List { pos, .. } => return Err(syntax(*pos, "unexpected list in typed list")),
        }
    }
    Ok(out)
}

fn check_requirements(items: &[SExpr]) -> Result<Vec<Name>, PddlError> {
    let mut reqs = Vec::new();
    for item in items {
        let (text, pos) = match item {
            SExpr::Atom { text, pos } => (text, *pos),
            SExpr::List { pos, .. } => return Err(syntax(*pos, "requirement must be a keyword")),
        };
        let key = text.to_ascii_lowercase();
        if !SUPPORTED_REQUIREMENTS.contains(&key.as_str()) {
            return Err(unsupported(pos, text));
        }
        reqs.push(Name::new(text));
    }
    Ok(reqs)
}

pub(super) fn requirements_section(items: &[SExpr]) -> Result<Vec<Name>, PddlError> {
    check_requirements(items)
}

struct TypeTable {
    decls: Vec<TypeDecl>,
    index: HashMap<String, usize>,
}

impl TypeTable {
    fn new() -> Self {
        let root = Name::new(ROOT_TYPE);
        let mut index = HashMap::new();
        index.insert(root.key().to_string(), 0);
        TypeTable {
            decls: vec![TypeDecl {
                name: root,
                parent: None,
            }],
            index,
        }
    }

    fn declare(&mut self, name: Name, parent: Option<Name>, pos: Pos) -> Result<(), PddlError> {
        if name.key() == ROOT_TYPE {
            return Ok(());
        }
        let parent = parent.unwrap_or_else(|| Name::new(ROOT_TYPE));
        if let Some(&i) = self.index.get(name.key()) {
            let existing = &mut self.decls[i];
            match &existing.parent {
                // implicitly declared as a parent earlier; refine it
                Some(p) if p.key() == ROOT_TYPE => existing.parent = Some(parent.clone()),
                Some(p) if *p == parent => {}
                _ => {
                    return Err(PddlError::Duplicate {
                        what: "type",
                        name: name.to_string(),
                        line: pos.line,
                        col: pos.col,
                    })
                }
            }
        } else {
            self.index.insert(name.key().to_string(), self.decls.len());
            self.decls.push(TypeDecl {
                name,
                parent: Some(parent.clone()),
            });
        }
        // parents may be used before they are declared; they become subtypes of the root
        if !self.index.contains_key(parent.key()) {
            self.index.insert(parent.key().to_string(), self.decls.len());
            self.decls.push(TypeDecl {
                name: parent,
                parent: Some(Name::new(ROOT_TYPE)),
            });
        }
        Ok(())
    }

    fn resolve(&self, name: &Name, pos: Pos) -> Result<Name, PddlError> {
        self.index
            .get(name.key())
            .map(|&i| self.decls[i].name.clone())
            .ok_or_else(|| PddlError::UndeclaredType {
                name: name.to_string(),
                line: pos.line,
                col: pos.col,
            })
    }

    fn check_acyclic(&self) -> Result<(), PddlError> {
        for decl in &self.decls {
            let mut current = decl.parent.clone();
            let mut steps = 0;
            while let Some(p) = current {
                steps += 1;
                if steps > self.decls.len() {
                    return Err(PddlError::CyclicTypes {
                        name: decl.name.to_string(),
                    });
                }
                current = self.decls[self.index[p.key()]].parent.clone();
            }
        }
        Ok(())
    }
}

struct Context<'a> {
    types: &'a TypeTable,
    constants: &'a HashMap<String, Name>,
    predicates: &'a HashMap<String, PredicateSchema>,
}

impl Context<'_> {
    fn atom(&self, e: &SExpr, params: &[TypedVar]) -> Result<AtomSchema, PddlError> {
        let items = expect_list(e, "an atom")?;
        let head = expect_symbol(items.first(), e.pos(), "a predicate name")?;
        let pred = self
            .predicates
            .get(&head.to_ascii_lowercase())
            .ok_or_else(|| PddlError::UndeclaredPredicate {
                name: head.to_string(),
                line: e.pos().line,
                col: e.pos().col,
            })?;
        let args = &items[1..];
        if args.len() != pred.params.len() {
            return Err(PddlError::Arity {
                name: pred.name.to_string(),
                expected: pred.params.len(),
                found: args.len(),
                line: e.pos().line,
                col: e.pos().col,
            });
        }
        let mut terms = Vec::with_capacity(args.len());
        for arg in args {
            let text = expect_symbol(Some(arg), arg.pos(), "a term")?;
            let pos = arg.pos();
            if text.starts_with('?') {
                let key = text.to_ascii_lowercase();
                let idx = params
                    .iter()
                    .position(|p| p.var.key() == key)
                    .ok_or_else(|| PddlError::UnboundVariable {
                        name: text.to_string(),
                        line: pos.line,
                        col: pos.col,
                    })?;
                terms.push(Term::Var(idx));
            } else {
                let c = self
                    .constants
                    .get(&text.to_ascii_lowercase())
                    .ok_or_else(|| PddlError::UnknownObject {
                        name: text.to_string(),
                        line: pos.line,
                        col: pos.col,
                    })?;
                terms.push(Term::Const(c.clone()));
            }
        }
        Ok(AtomSchema {
            predicate: pred.name.clone(),
            args: terms,
        })
    }

    fn condition(
        &self,
        e: &SExpr,
        params: &[TypedVar],
        out: &mut Vec<AtomSchema>,
    ) -> Result<(), PddlError> {
        let items = expect_list(e, "a condition")?;
        if items.is_empty() {
            return Ok(());
        }
        match e.head_keyword().as_deref() {
            Some("and") => {
                for sub in &items[1..] {
                    self.condition(sub, params, out)?;
                }
                Ok(())
            }
            Some("not") => Err(unsupported(e.pos(), ":negative-preconditions")),
            Some("or") | Some("imply") => Err(unsupported(e.pos(), ":disjunctive-preconditions")),
            Some("exists") => Err(unsupported(e.pos(), ":existential-preconditions")),
            Some("forall") => Err(unsupported(e.pos(), ":universal-preconditions")),
            Some("=") => Err(unsupported(e.pos(), ":equality")),
            Some("<") | Some(">") | Some("<=") | Some(">=") => {
                Err(unsupported(e.pos(), ":fluents"))
            }
            _ => {
                out.push(self.atom(e, params)?);
                Ok(())
            }
        }
    }

    fn effect(
        &self,
        e: &SExpr,
        params: &[TypedVar],
        add: &mut Vec<AtomSchema>,
        del: &mut Vec<AtomSchema>,
    ) -> Result<(), PddlError> {
        let items = expect_list(e, "an effect")?;
        if items.is_empty() {
            return Ok(());
        }
        match e.head_keyword().as_deref() {
            Some("and") => {
                for sub in &items[1..] {
                    self.effect(sub, params, add, del)?;
                }
                Ok(())
            }
            Some("not") => {
                if items.len() != 2 {
                    return Err(syntax(e.pos(), "`not` takes exactly one atom"));
                }
                del.push(self.atom(&items[1], params)?);
                Ok(())
            }
            Some("when") => Err(unsupported(e.pos(), ":conditional-effects")),
            Some("forall") => Err(unsupported(e.pos(), ":conditional-effects")),
            Some("increase") | Some("decrease") | Some("assign") | Some("scale-up")
            | Some("scale-down") => Err(unsupported(e.pos(), ":fluents")),
            _ => {
                add.push(self.atom(e, params)?);
                Ok(())
            }
        }
    }
}

fn typed_vars(items: &[SExpr], types: &TypeTable) -> Result<Vec<TypedVar>, PddlError> {
    let mut out: Vec<TypedVar> = Vec::new();
    for (name, ty, pos) in typed_list(items)? {
        if !name.as_str().starts_with('?') {
            return Err(syntax(pos, format!("expected a variable, found `{name}`")));
        }
        if out.iter().any(|v| v.var == name) {
            return Err(PddlError::Duplicate {
                what: "parameter",
                name: name.to_string(),
                line: pos.line,
                col: pos.col,
            });
        }
        let ty = match ty {
            Some(t) => types.resolve(&t, pos)?,
            None => Name::new(ROOT_TYPE),
        };
        out.push(TypedVar { var: name, ty });
    }
    Ok(out)
}

fn section_items(section: &SExpr) -> Result<(String, &[SExpr]), PddlError> {
    let items = expect_list(section, "a section")?;
    let kw = expect_symbol(items.first(), section.pos(), "a section keyword")?;
    Ok((kw.to_ascii_lowercase(), &items[1..]))
}

/// Parses a domain definition in the `:strips` + `:typing` fragment.
pub fn parse_domain(text: &str) -> Result<DomainModel, PddlError> {
    let root = sexpr::parse_one(text)?;
    let (name, sections) = open_definition(&root, "domain")?;

    let mut requirements = Vec::new();
    let mut type_sections = Vec::new();
    let mut constant_sections = Vec::new();
    let mut predicate_sections = Vec::new();
    let mut action_sections = Vec::new();
    for section in sections {
        let (kw, body) = section_items(section)?;
        match kw.as_str() {
            ":requirements" => requirements.extend(check_requirements(body)?),
            ":types" => type_sections.push(body),
            ":constants" => constant_sections.push(body),
            ":predicates" => predicate_sections.push(body),
            ":action" => action_sections.push((section.pos(), body)),
            ":functions" => return Err(unsupported(section.pos(), ":fluents")),
            ":derived" => return Err(unsupported(section.pos(), ":derived-predicates")),
            ":durative-action" => return Err(unsupported(section.pos(), ":durative-actions")),
            ":constraints" => return Err(unsupported(section.pos(), ":constraints")),
            _ => return Err(syntax(section.pos(), format!("unknown domain section `{kw}`"))),
        }
    }

    let mut types = TypeTable::new();
    for body in type_sections {
        for (t, parent, pos) in typed_list(body)? {
            types.declare(t, parent, pos)?;
        }
    }
    types.check_acyclic()?;

    let mut constants: Vec<(Name, Name)> = Vec::new();
    let mut constant_index = HashMap::new();
    for body in constant_sections {
        for (c, ty, pos) in typed_list(body)? {
            let ty = match ty {
                Some(t) => types.resolve(&t, pos)?,
                None => Name::new(ROOT_TYPE),
            };
            if constant_index.insert(c.key().to_string(), c.clone()).is_some() {
                return Err(PddlError::Duplicate {
                    what: "constant",
                    name: c.to_string(),
                    line: pos.line,
                    col: pos.col,
                });
            }
            constants.push((c, ty));
        }
    }

    let mut predicates = Vec::new();
    let mut predicate_index = HashMap::new();
    for body in predicate_sections {
        for decl in body {
            let items = expect_list(decl, "a predicate declaration")?;
            let pname = expect_symbol(items.first(), decl.pos(), "a predicate name")?;
            let schema = PredicateSchema {
                name: Name::new(pname),
                params: typed_vars(&items[1..], &types)?,
            };
            if predicate_index
                .insert(schema.name.key().to_string(), schema.clone())
                .is_some()
            {
                return Err(PddlError::Duplicate {
                    what: "predicate",
                    name: pname.to_string(),
                    line: decl.pos().line,
                    col: decl.pos().col,
                });
            }
            predicates.push(schema);
        }
    }

    let ctx = Context {
        types: &types,
        constants: &constant_index,
        predicates: &predicate_index,
    };
    let mut action_schemas: Vec<ActionSchema> = Vec::new();
    for (pos, body) in action_sections {
        let aname = expect_symbol(body.first(), pos, "an action name")?;
        let name = Name::new(aname);
        if action_schemas.iter().any(|a| a.name == name) {
            return Err(PddlError::Duplicate {
                what: "action",
                name: aname.to_string(),
                line: pos.line,
                col: pos.col,
            });
        }
        let mut params = Vec::new();
        let mut pre_expr = None;
        let mut eff_expr = None;
        let mut i = 1;
        while i < body.len() {
            let key = expect_symbol(body.get(i), pos, "an action keyword")?.to_ascii_lowercase();
            let value = body
                .get(i + 1)
                .ok_or_else(|| syntax(body[i].pos(), format!("missing value for {key}")))?;
            match key.as_str() {
                ":parameters" => params = typed_vars(expect_list(value, ":parameters")?, ctx.types)?,
                ":precondition" => pre_expr = Some(value),
                ":effect" => eff_expr = Some(value),
                _ => return Err(syntax(body[i].pos(), format!("unknown action keyword `{key}`"))),
            }
            i += 2;
        }
        let mut preconditions = Vec::new();
        if let Some(e) = pre_expr {
            ctx.condition(e, &params, &mut preconditions)?;
        }
        let mut add_effects = Vec::new();
        let mut del_effects = Vec::new();
        if let Some(e) = eff_expr {
            ctx.effect(e, &params, &mut add_effects, &mut del_effects)?;
        }
        action_schemas.push(ActionSchema {
            name,
            params,
            preconditions,
            add_effects,
            del_effects,
        });
    }

    Ok(DomainModel::assemble(
        name,
        requirements,
        types.decls,
        constants,
        predicates,
        action_schemas,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLOCKS: &str = r#"
(define (domain blocks)
  (:requirements :strips)
  (:predicates (on ?x ?y) (on-table ?x) (clear ?x) (holding ?x) (hand-empty))
  (:action Pickup :parameters (?x)
    :precondition (and (clear ?x) (on-table ?x) (hand-empty))
    :effect (and (holding ?x) (not (clear ?x)) (not (on-table ?x)) (not (hand-empty))))
  (:action Putdown :parameters (?x)
    :precondition (holding ?x)
    :effect (and (clear ?x) (on-table ?x) (hand-empty) (not (holding ?x))))
  (:action Stack :parameters (?x ?y)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (on ?x ?y) (clear ?x) (hand-empty) (not (holding ?x)) (not (clear ?y))))
  (:action Unstack :parameters (?x ?y)
    :precondition (and (on ?x ?y) (clear ?x) (hand-empty))
    :effect (and (holding ?x) (clear ?y) (not (on ?x ?y)) (not (clear ?x)) (not (hand-empty)))))
"#;

    #[test]
    fn blocks_domain_has_four_actions() {
        let d = parse_domain(BLOCKS).unwrap();
        assert_eq!(d.action_schemas.len(), 4);
        assert_eq!(d.action("unstack").unwrap().name.as_str(), "Unstack");
        assert_eq!(d.predicates.len(), 5);
        let unstack = d.action("UNSTACK").unwrap();
        assert_eq!(unstack.preconditions.len(), 3);
        assert_eq!(unstack.del_effects.len(), 3);
    }

    #[test]
    fn deterministic() {
        assert_eq!(parse_domain(BLOCKS).unwrap(), parse_domain(BLOCKS).unwrap());
    }

    #[test]
    fn empty_action_list_is_fine() {
        let d = parse_domain("(define (domain empty) (:requirements :strips) (:predicates (p)))")
            .unwrap();
        assert!(d.action_schemas.is_empty());
    }

    #[test]
    fn rejects_fluents_requirement() {
        let err = parse_domain("(define (domain z) (:requirements :strips :fluents))").unwrap_err();
        match err {
            PddlError::UnsupportedRequirement { keyword, line, col } => {
                assert_eq!(keyword, ":fluents");
                assert_eq!((line, col), (1, 43));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_preconditions_in_body() {
        let text = "(define (domain n) (:predicates (p ?x))
            (:action a :parameters (?x) :precondition (not (p ?x)) :effect (p ?x)))";
        assert!(matches!(
            parse_domain(text),
            Err(PddlError::UnsupportedRequirement { ref keyword, .. }) if keyword == ":negative-preconditions"
        ));
    }

    #[test]
    fn undeclared_types_and_predicates() {
        let text = "(define (domain t) (:requirements :typing) (:types a - object)
            (:predicates (p ?x - b)))";
        assert!(matches!(parse_domain(text), Err(PddlError::UndeclaredType { .. })));
        let text = "(define (domain t) (:predicates (p ?x))
            (:action a :parameters (?x) :precondition (q ?x) :effect (p ?x)))";
        assert!(matches!(parse_domain(text), Err(PddlError::UndeclaredPredicate { .. })));
    }

    #[test]
    fn implicit_parent_types() {
        let text = "(define (domain t) (:requirements :typing)
            (:types truck airplane - vehicle vehicle package - object))";
        let d = parse_domain(text).unwrap();
        assert!(d.is_subtype(&Name::new("truck"), &Name::new("vehicle")));
        assert!(d.is_subtype(&Name::new("truck"), &Name::new("object")));
        assert!(!d.is_subtype(&Name::new("package"), &Name::new("vehicle")));
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let text = "(define (domain t) (:predicates (p ?x))
            (:action a :parameters () :precondition (p ?y) :effect ()))";
        assert!(matches!(parse_domain(text), Err(PddlError::UnboundVariable { .. })));
    }
}
