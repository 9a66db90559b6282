use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::sexpr::{read_all, SExpr, Span};
use super::PddlError;

const SUPPORTED_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":non-deterministic",
    ":negative-preconditions",
    ":equality",
];

fn syntax(span: Span, message: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        span,
        message: message.into(),
    }
}

fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    e.list()
        .ok_or_else(|| syntax(e.span(), format!("expected {what}, found a symbol")))
}

fn expect_symbol<'a>(e: &'a SExpr, what: &str) -> Result<&'a str, PddlError> {
    e.symbol()
        .ok_or_else(|| syntax(e.span(), format!("expected {what}, found a list")))
}

/// Parse `a b - t c - u d` into typed names; untyped names get `object`.
fn typed_names(items: &[SExpr]) -> Result<Vec<(TypedName, Span)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Span)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let sym = expect_symbol(&items[i], "a name")?;
        if sym == "-" {
            let ty_expr = items
                .get(i + 1)
                .ok_or_else(|| syntax(items[i].span(), "missing type after '-'"))?;
            if ty_expr.head() == Some("either") {
                return Err(PddlError::Unsupported {
                    feature: "either types".into(),
                    span: ty_expr.span(),
                });
            }
            let ty = expect_symbol(ty_expr, "a type name")?;
            for (name, span) in pending.drain(..) {
                out.push((
                    TypedName {
                        name,
                        ty: ty.to_string(),
                    },
                    span,
                ));
            }
            i += 2;
        } else {
            pending.push((sym.to_string(), items[i].span()));
            i += 1;
        }
    }
    for (name, span) in pending {
        out.push((
            TypedName {
                name,
                ty: "object".into(),
            },
            span,
        ));
    }
    Ok(out)
}

fn find_define<'a>(text: &'a str, kind: &str) -> Result<(Vec<SExpr>, Span), PddlError> {
    let top = read_all(text)?;
    let first = top
        .into_iter()
        .next()
        .ok_or_else(|| syntax(Span { line: 1, col: 1 }, "empty input"))?;
    let span = first.span();
    let items = expect_list(&first, "(define ...)")?.to_vec();
    if items.first().and_then(SExpr::symbol) != Some("define") {
        return Err(syntax(span, "expected (define ...)"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(span, format!("missing ({kind} NAME)")))?;
    if header.head() != Some(kind) {
        return Err(syntax(header.span(), format!("expected ({kind} NAME)")));
    }
    Ok((items, span))
}

struct DomainScope<'a> {
    domain: &'a Domain,
}

impl DomainScope<'_> {
    fn check_type(&self, ty: &str, span: Span) -> Result<(), PddlError> {
        if self.domain.has_type(ty) {
            Ok(())
        } else {
            Err(PddlError::UndeclaredType {
                name: ty.to_string(),
                span,
            })
        }
    }

    /// Check an atom against its predicate signature. `vars` maps parameter
    /// names to types.
    fn check_atom(
        &self,
        atom: &AtomExpr,
        vars: &HashMap<String, String>,
        span: Span,
    ) -> Result<(), PddlError> {
        if atom.is_equality() {
            if atom.args.len() != 2 {
                return Err(PddlError::ArityMismatch {
                    predicate: "=".into(),
                    expected: 2,
                    found: atom.args.len(),
                    span,
                });
            }
        } else {
            let decl = self
                .domain
                .predicate(&atom.predicate)
                .ok_or_else(|| PddlError::UndeclaredPredicate {
                    name: atom.predicate.clone(),
                    span,
                })?;
            if decl.params.len() != atom.args.len() {
                return Err(PddlError::ArityMismatch {
                    predicate: atom.predicate.clone(),
                    expected: decl.params.len(),
                    found: atom.args.len(),
                    span,
                });
            }
            for (arg, param) in atom.args.iter().zip(&decl.params) {
                let arg_ty = match arg {
                    Term::Var(v) => vars.get(v).cloned().ok_or_else(|| PddlError::UnboundVariable {
                        name: v.clone(),
                        span,
                    })?,
                    Term::Const(c) => self
                        .domain
                        .constants
                        .iter()
                        .find(|k| &k.name == c)
                        .map(|k| k.ty.clone())
                        .ok_or_else(|| PddlError::UndeclaredObject {
                            name: c.clone(),
                            span,
                        })?,
                };
                if !self.domain.is_subtype(&arg_ty, &param.ty) {
                    return Err(PddlError::TypeMismatch {
                        message: format!(
                            "{} has type {arg_ty}, {} expects {}",
                            arg.as_str(),
                            atom.predicate,
                            param.ty
                        ),
                        span,
                    });
                }
            }
            return Ok(());
        }
        for arg in &atom.args {
            if let Term::Var(v) = arg {
                if !vars.contains_key(v) {
                    return Err(PddlError::UnboundVariable {
                        name: v.clone(),
                        span,
                    });
                }
            }
        }
        Ok(())
    }
}

fn parse_atom(e: &SExpr) -> Result<AtomExpr, PddlError> {
    let items = expect_list(e, "an atom")?;
    let head = items
        .first()
        .ok_or_else(|| syntax(e.span(), "empty atom"))?;
    let predicate = expect_symbol(head, "a predicate name")?.to_string();
    let args = items[1..]
        .iter()
        .map(|a| {
            let s = expect_symbol(a, "a term")?;
            Ok(if s.starts_with('?') {
                Term::Var(s.to_string())
            } else {
                Term::Const(s.to_string())
            })
        })
        .collect::<Result<_, PddlError>>()?;
    Ok(AtomExpr { predicate, args })
}

fn parse_literal(e: &SExpr) -> Result<(Literal, Span), PddlError> {
    if e.head() == Some("not") {
        let items = e.list().unwrap_or_default();
        if items.len() != 2 {
            return Err(syntax(e.span(), "(not ...) takes one argument"));
        }
        return Ok((
            Literal {
                atom: parse_atom(&items[1])?,
                positive: false,
            },
            e.span(),
        ));
    }
    Ok((
        Literal {
            atom: parse_atom(e)?,
            positive: true,
        },
        e.span(),
    ))
}

fn unsupported_head(e: &SExpr) -> Option<&'static str> {
    match e.head()? {
        "or" => Some("disjunctive conditions"),
        "imply" => Some("implications"),
        "forall" => Some("universal quantification"),
        "exists" => Some("existential quantification"),
        "when" => Some("conditional effects"),
        "increase" | "decrease" | "assign" | "scale-up" | "scale-down" => Some("numeric fluents"),
        _ => None,
    }
}

fn parse_condition(e: &SExpr) -> Result<Vec<(Literal, Span)>, PddlError> {
    if let Some(feature) = unsupported_head(e) {
        return Err(PddlError::Unsupported {
            feature: feature.into(),
            span: e.span(),
        });
    }
    match e.head() {
        Some("and") => {
            let mut out = Vec::new();
            for c in &e.list().unwrap_or_default()[1..] {
                out.extend(parse_condition(c)?);
            }
            Ok(out)
        }
        None if e.list().is_some_and(|l| l.is_empty()) => Ok(Vec::new()),
        _ => Ok(vec![parse_literal(e)?]),
    }
}

/// Effects flatten to a list of outcomes: `and` takes the cross product of
/// its parts, `oneof` (nested or not) takes the union.
fn parse_effect(e: &SExpr) -> Result<Vec<(Outcome, Vec<Span>)>, PddlError> {
    if let Some(feature) = unsupported_head(e) {
        return Err(PddlError::Unsupported {
            feature: feature.into(),
            span: e.span(),
        });
    }
    match e.head() {
        Some("and") => {
            let mut acc = vec![(Outcome { add: vec![], del: vec![] }, Vec::new())];
            for part in &e.list().unwrap_or_default()[1..] {
                let options = parse_effect(part)?;
                let mut next = Vec::with_capacity(acc.len() * options.len());
                for (base, spans) in &acc {
                    for (opt, ospans) in &options {
                        let mut o = base.clone();
                        o.add.extend(opt.add.iter().cloned());
                        o.del.extend(opt.del.iter().cloned());
                        let mut s = spans.clone();
                        s.extend(ospans.iter().copied());
                        next.push((o, s));
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
        Some("oneof") => {
            let items = &e.list().unwrap_or_default()[1..];
            if items.is_empty() {
                return Err(syntax(e.span(), "oneof needs at least one outcome"));
            }
            let mut out = Vec::new();
            for part in items {
                out.extend(parse_effect(part)?);
            }
            Ok(out)
        }
        None if e.list().is_some_and(|l| l.is_empty()) => {
            Ok(vec![(Outcome { add: vec![], del: vec![] }, Vec::new())])
        }
        _ => {
            let (lit, span) = parse_literal(e)?;
            let o = if lit.positive {
                Outcome {
                    add: vec![lit.atom],
                    del: vec![],
                }
            } else {
                Outcome {
                    add: vec![],
                    del: vec![lit.atom],
                }
            };
            Ok(vec![(o, vec![span])])
        }
    }
}

fn parse_action(items: &[SExpr], span: Span, domain: &Domain) -> Result<ActionSchema, PddlError> {
    let name = expect_symbol(
        items.get(1).ok_or_else(|| syntax(span, "action needs a name"))?,
        "an action name",
    )?
    .to_string();
    let mut parameters = Vec::new();
    let mut precondition = Vec::new();
    let mut outcomes = vec![(Outcome { add: vec![], del: vec![] }, Vec::new())];
    let scope = DomainScope { domain };
    let mut i = 2;
    let mut param_spans = Vec::new();
    while i < items.len() {
        let key = expect_symbol(&items[i], "an action keyword")?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| syntax(items[i].span(), format!("missing value for {key}")))?;
        match key {
            ":parameters" => {
                for (tn, s) in typed_names(expect_list(value, "a parameter list")?)? {
                    if !tn.name.starts_with('?') {
                        return Err(syntax(s, format!("parameter {} must start with '?'", tn.name)));
                    }
                    scope.check_type(&tn.ty, s)?;
                    parameters.push(tn);
                    param_spans.push(s);
                }
            }
            ":precondition" => precondition = parse_condition(value)?,
            ":effect" => outcomes = parse_effect(value)?,
            other => {
                return Err(PddlError::Unsupported {
                    feature: format!("action field {other}"),
                    span: items[i].span(),
                })
            }
        }
        i += 2;
    }
    let vars: HashMap<String, String> = parameters
        .iter()
        .map(|p| (p.name.clone(), p.ty.clone()))
        .collect();
    for (lit, s) in &precondition {
        scope.check_atom(&lit.atom, &vars, *s)?;
    }
    for (o, spans) in &outcomes {
        for (atom, s) in o.add.iter().chain(&o.del).zip(spans.iter()) {
            if atom.is_equality() {
                return Err(PddlError::Unsupported {
                    feature: "equality in effects".into(),
                    span: *s,
                });
            }
            scope.check_atom(atom, &vars, *s)?;
        }
    }
    Ok(ActionSchema {
        name,
        parameters,
        precondition: precondition.into_iter().map(|(l, _)| l).collect(),
        outcomes: outcomes.into_iter().map(|(o, _)| o).collect(),
    })
}

pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let (items, _) = find_define(text, "domain")?;
    let header = items[1].list().unwrap_or_default();
    let name = expect_symbol(
        header.get(1).ok_or_else(|| syntax(items[1].span(), "domain needs a name"))?,
        "a domain name",
    )?
    .to_string();
    let mut domain = Domain {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    let mut pending_actions = Vec::new();
    let mut type_spans = Vec::new();
    let mut const_spans = Vec::new();
    let mut pred_spans = Vec::new();
    for section in &items[2..] {
        let parts = expect_list(section, "a domain section")?;
        let key = parts
            .first()
            .and_then(SExpr::symbol)
            .ok_or_else(|| syntax(section.span(), "expected a section keyword"))?;
        match key {
            ":requirements" => {
                for r in &parts[1..] {
                    let r = expect_symbol(r, "a requirement")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(PddlError::Unsupported {
                            feature: format!("requirement {r}"),
                            span: section.span(),
                        });
                    }
                    domain.requirements.push(r.to_string());
                }
            }
            ":types" => {
                for (tn, s) in typed_names(&parts[1..])? {
                    domain.types.push(TypeDecl {
                        name: tn.name,
                        parent: tn.ty,
                    });
                    type_spans.push(s);
                }
            }
            ":constants" => {
                for (tn, s) in typed_names(&parts[1..])? {
                    domain.constants.push(tn);
                    const_spans.push(s);
                }
            }
            ":predicates" => {
                for p in &parts[1..] {
                    let pl = expect_list(p, "a predicate declaration")?;
                    let pname = expect_symbol(
                        pl.first().ok_or_else(|| syntax(p.span(), "empty predicate"))?,
                        "a predicate name",
                    )?;
                    let params = typed_names(&pl[1..])?;
                    domain.predicates.push(PredicateDecl {
                        name: pname.to_string(),
                        params: params.iter().map(|(t, _)| t.clone()).collect(),
                    });
                    pred_spans.push((p.span(), params.into_iter().map(|(_, s)| s).collect::<Vec<_>>()));
                }
            }
            ":action" => pending_actions.push(section),
            ":functions" => {
                return Err(PddlError::Unsupported {
                    feature: "numeric fluents".into(),
                    span: section.span(),
                })
            }
            ":durative-action" => {
                return Err(PddlError::Unsupported {
                    feature: "durative actions".into(),
                    span: section.span(),
                })
            }
            ":derived" => {
                return Err(PddlError::Unsupported {
                    feature: "derived predicates".into(),
                    span: section.span(),
                })
            }
            other => {
                return Err(PddlError::Unsupported {
                    feature: format!("domain section {other}"),
                    span: section.span(),
                })
            }
        }
    }

    let scope = DomainScope { domain: &domain };
    for (t, s) in domain.types.iter().zip(&type_spans) {
        scope.check_type(&t.parent, *s)?;
    }
    for (c, s) in domain.constants.iter().zip(&const_spans) {
        scope.check_type(&c.ty, *s)?;
    }
    let mut names = HashSet::new();
    for (p, (span, param_spans)) in domain.predicates.iter().zip(&pred_spans) {
        if !names.insert(p.name.clone()) {
            return Err(PddlError::Duplicate {
                name: p.name.clone(),
                span: *span,
            });
        }
        for (param, s) in p.params.iter().zip(param_spans) {
            scope.check_type(&param.ty, *s)?;
        }
    }

    let mut action_names = HashSet::new();
    for section in pending_actions {
        let a = parse_action(section.list().unwrap_or_default(), section.span(), &domain)?;
        if !action_names.insert(a.name.clone()) {
            return Err(PddlError::Duplicate {
                name: a.name,
                span: section.span(),
            });
        }
        domain.actions.push(a);
    }
    Ok(domain)
}

fn parse_ground_atom(e: &SExpr) -> Result<GroundAtom, PddlError> {
    let a = parse_atom(e)?;
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c.clone()),
            Term::Var(v) => Err(PddlError::UnboundVariable {
                name: v.clone(),
                span: e.span(),
            }),
        })
        .collect::<Result<_, _>>()?;
    Ok(GroundAtom {
        predicate: a.predicate,
        args,
    })
}

pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, PddlError> {
    let (items, _) = find_define(text, "problem")?;
    let header = items[1].list().unwrap_or_default();
    let name = expect_symbol(
        header.get(1).ok_or_else(|| syntax(items[1].span(), "problem needs a name"))?,
        "a problem name",
    )?
    .to_string();
    let mut problem = Problem {
        name,
        domain: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: None,
    };
    let mut init_spans = Vec::new();
    let mut goal_spans = Vec::new();
    for section in &items[2..] {
        let parts = expect_list(section, "a problem section")?;
        let key = parts
            .first()
            .and_then(SExpr::symbol)
            .ok_or_else(|| syntax(section.span(), "expected a section keyword"))?;
        match key {
            ":domain" => {
                let d = expect_symbol(
                    parts.get(1).ok_or_else(|| syntax(section.span(), "missing domain name"))?,
                    "a domain name",
                )?;
                if d != domain.name {
                    return Err(PddlError::DomainMismatch {
                        expected: domain.name.clone(),
                        found: d.to_string(),
                    });
                }
                problem.domain = d.to_string();
            }
            ":objects" => {
                for (tn, s) in typed_names(&parts[1..])? {
                    if !domain.has_type(&tn.ty) {
                        return Err(PddlError::UndeclaredType { name: tn.ty, span: s });
                    }
                    problem.objects.push(tn);
                }
            }
            ":init" => {
                for a in &parts[1..] {
                    problem.init.push(parse_ground_atom(a)?);
                    init_spans.push(a.span());
                }
            }
            ":goal" => {
                let g = parts.get(1).ok_or_else(|| syntax(section.span(), "empty goal"))?;
                let lits = parse_condition(g)?;
                let mut goal = Vec::new();
                for (l, s) in lits {
                    let atom = GroundAtom {
                        predicate: l.atom.predicate.clone(),
                        args: l
                            .atom
                            .args
                            .iter()
                            .map(|t| match t {
                                Term::Const(c) => Ok(c.clone()),
                                Term::Var(v) => Err(PddlError::UnboundVariable {
                                    name: v.clone(),
                                    span: s,
                                }),
                            })
                            .collect::<Result<_, _>>()?,
                    };
                    goal.push(GroundLiteral {
                        atom,
                        positive: l.positive,
                    });
                    goal_spans.push(s);
                }
                problem.goal = Some(goal);
            }
            other => {
                return Err(PddlError::Unsupported {
                    feature: format!("problem section {other}"),
                    span: section.span(),
                })
            }
        }
    }
    if problem.domain.is_empty() {
        return Err(syntax(items[0].span(), "problem is missing (:domain NAME)"));
    }

    let object_types: HashMap<&str, &str> = problem
        .objects
        .iter()
        .chain(&domain.constants)
        .map(|o| (o.name.as_str(), o.ty.as_str()))
        .collect();
    let check = |a: &GroundAtom, span: Span| -> Result<(), PddlError> {
        let decl = domain
            .predicate(&a.predicate)
            .ok_or_else(|| PddlError::UndeclaredPredicate {
                name: a.predicate.clone(),
                span,
            })?;
        if decl.params.len() != a.args.len() {
            return Err(PddlError::ArityMismatch {
                predicate: a.predicate.clone(),
                expected: decl.params.len(),
                found: a.args.len(),
                span,
            });
        }
        for (arg, p) in a.args.iter().zip(&decl.params) {
            let ty = object_types
                .get(arg.as_str())
                .ok_or_else(|| PddlError::UndeclaredObject {
                    name: arg.clone(),
                    span,
                })?;
            if !domain.is_subtype(ty, &p.ty) {
                return Err(PddlError::TypeMismatch {
                    message: format!("{arg} has type {ty}, {} expects {}", a.predicate, p.ty),
                    span,
                });
            }
        }
        Ok(())
    };
    for (a, s) in problem.init.iter().zip(&init_spans) {
        check(a, *s)?;
    }
    if let Some(goal) = &problem.goal {
        for (l, s) in goal.iter().zip(&goal_spans) {
            if l.atom.predicate == "=" {
                continue;
            }
            check(&l.atom, *s)?;
        }
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MOVE: &str = "(define (domain nav)
      (:requirements :strips :typing)
      (:types loc)
      (:predicates (at ?l - loc))
      (:action move :parameters (?from ?to - loc)
        :precondition (at ?from)
        :effect (and (at ?to) (not (at ?from)))))";

    #[test]
    fn parses_deterministic_move() {
        let d = parse_domain(MOVE).unwrap();
        assert_eq!(d.actions.len(), 1);
        let a = &d.actions[0];
        assert_eq!(a.outcomes.len(), 1);
        assert_eq!(a.parameters.len(), 2);
        assert_eq!(a.outcomes[0].add[0].to_string(), "(at ?to)");
        assert_eq!(a.outcomes[0].del[0].to_string(), "(at ?from)");
    }

    #[test]
    fn oneof_yields_three_outcomes() {
        let d = parse_domain(
            "(define (domain g) (:requirements :strips :typing :non-deterministic)
              (:types grape)
              (:predicates (ripe ?g - grape) (unripe ?g - grape) (unknown ?g - grape) (checked ?g - grape))
              (:action check-grape :parameters (?g - grape)
                :precondition (not (checked ?g))
                :effect (and (checked ?g) (oneof (ripe ?g) (unripe ?g) (unknown ?g)))))",
        )
        .unwrap();
        let a = d.action("check-grape").unwrap();
        assert_eq!(a.outcomes.len(), 3);
        assert!(a.outcomes.iter().all(|o| o.add.len() == 2));
        assert_eq!(a.outcome_labels(), vec!["ripe", "unripe", "unknown"]);
    }

    #[test]
    fn nested_oneof_is_flattened() {
        let d = parse_domain(
            "(define (domain n) (:predicates (p) (q) (r))
              (:action a :parameters () :precondition (and)
                :effect (oneof (p) (oneof (q) (r)))))",
        )
        .unwrap();
        assert_eq!(d.actions[0].outcomes.len(), 3);
    }

    #[test]
    fn rejects_unsupported_features_by_name() {
        let err = parse_domain("(define (domain x) (:requirements :strips :conditional-effects))")
            .unwrap_err();
        assert!(err.to_string().contains(":conditional-effects"), "{err}");
        let err = parse_domain(
            "(define (domain x) (:predicates (p) (q))
              (:action a :parameters () :precondition (p) :effect (when (p) (q))))",
        )
        .unwrap_err();
        assert!(matches!(err, PddlError::Unsupported { ref feature, .. } if feature == "conditional effects"));
    }

    #[test]
    fn reports_undeclared_and_arity_errors() {
        let err = parse_domain(
            "(define (domain x) (:predicates (p ?a))
              (:action a :parameters (?a) :precondition (q ?a) :effect (p ?a)))",
        )
        .unwrap_err();
        assert!(matches!(err, PddlError::UndeclaredPredicate { ref name, .. } if name == "q"));
        let err = parse_domain(
            "(define (domain x) (:predicates (p ?a))
              (:action a :parameters (?a) :precondition (p ?a ?a) :effect (p ?a)))",
        )
        .unwrap_err();
        assert!(matches!(err, PddlError::ArityMismatch { expected: 1, found: 2, .. }));
    }

    #[test]
    fn problem_with_undeclared_object_type_is_rejected() {
        let d = parse_domain(MOVE).unwrap();
        let err = parse_problem(
            "(define (problem p) (:domain nav) (:objects l0 - room) (:init))",
            &d,
        )
        .unwrap_err();
        match err {
            PddlError::UndeclaredType { name, span } => {
                assert_eq!(name, "room");
                assert_eq!(span.line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn problem_goal_is_optional() {
        let d = parse_domain(MOVE).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain nav) (:objects l0 l1 - loc) (:init (at l0)))",
            &d,
        )
        .unwrap();
        assert!(p.goal.is_none());
        assert_eq!(p.init, vec![GroundAtom::new("at", &["l0"])]);
    }

    #[test]
    fn canonical_print_reparses_identically() {
        let d = parse_domain(MOVE).unwrap();
        let again = parse_domain(&d.to_string()).unwrap();
        assert_eq!(d, again);
    }
}
