//! Epsilon-term handling: elimination into choice-conditioned free
//! variables (with committed sharing or per-occurrence freshness),
//! reconstruction by rewriting and beta-reduction, and quantifier
//! elimination with subterm statistics.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::calculus::ProofState;
use crate::choice::{check_cc, CcEntry, ChoiceCondition};
use crate::syntax::{
    apply_subst, apply_subst_term, free_symbols, free_symbols_term, fresh_name, Class, Formula,
    Sort, Substitution, Symbol, Term,
};

#[derive(Debug, Error)]
pub enum EpsilonError {
    #[error("formula contains an unbound bound atom `{0}`")]
    UnboundAtom(Symbol),
    #[error("variable {var} is applied to {got} arguments but its entry binds {want}")]
    PartialApplication { var: Symbol, got: usize, want: usize },
    #[error("choice condition is cyclic at {0}; reconstruction would not terminate")]
    CyclicCc(Symbol),
    #[error("expected a homogeneous prenex quantifier block over a quantifier-free body")]
    NotHomogeneous,
}

/// The outcome of one elimination pass: the epsilon-free formula, the
/// choice-condition entries created for it, and the P edges they brought.
#[derive(Clone, Debug)]
pub struct ElimResult {
    pub formula: Formula,
    pub cc_delta: ChoiceCondition,
    pub p_delta: BTreeSet<(Symbol, Symbol)>,
}

struct Eliminator {
    st: ProofState,
    created: Vec<Symbol>,
    p_delta: BTreeSet<(Symbol, Symbol)>,
    share: bool,
}

impl Eliminator {
    fn formula(&mut self, f: &Formula, binders: &mut Vec<Symbol>) -> Formula {
        match f {
            Formula::Pred(p, args) => Formula::Pred(
                p.clone(),
                args.iter().map(|t| self.term(t, binders)).collect(),
            ),
            Formula::Eq(a, b) => Formula::Eq(self.term(a, binders), self.term(b, binders)),
            Formula::Not(a) => Formula::not(self.formula(a, binders)),
            Formula::And(a, b) => {
                Formula::and(self.formula(a, binders), self.formula(b, binders))
            }
            Formula::Or(a, b) => {
                Formula::or(self.formula(a, binders), self.formula(b, binders))
            }
            Formula::Implies(a, b) => {
                Formula::implies(self.formula(a, binders), self.formula(b, binders))
            }
            Formula::Forall(x, a) => {
                binders.push(x.clone());
                let a2 = self.formula(a, binders);
                binders.pop();
                Formula::forall(x.clone(), a2)
            }
            Formula::Exists(x, a) => {
                binders.push(x.clone());
                let a2 = self.formula(a, binders);
                binders.pop();
                Formula::exists(x.clone(), a2)
            }
        }
    }

    fn term(&mut self, t: &Term, binders: &mut Vec<Symbol>) -> Term {
        match t {
            Term::Sym(s) => Term::Sym(s.clone()),
            Term::App(h, args) => Term::App(
                h.clone(),
                args.iter().map(|a| self.term(a, binders)).collect(),
            ),
            Term::Eps(x, body) => {
                // Innermost first: clean the body before lifting this term.
                binders.push(x.clone());
                let body2 = self.formula(body, binders);
                binders.pop();
                let eps = Term::Eps(x.clone(), Box::new(body2.clone()));
                // Capture list: enclosing binders free in the term, ordered
                // by first occurrence in the term itself. Stack order would
                // vary between occurrences of alpha-equal subterms and
                // defeat entry sharing.
                let mut prefix = Vec::new();
                for name in occurrence_ordered_atoms(&eps) {
                    if let Some(v) = binders.iter().rev().find(|v| v.name == name) {
                        prefix.push(v.clone());
                    }
                }
                let entry = CcEntry::new(prefix.clone(), x.clone(), body2);
                let var = self.var_for(entry, &x.name, prefix.len());
                if prefix.is_empty() {
                    Term::Sym(var)
                } else {
                    Term::App(var, prefix.into_iter().map(Term::Sym).collect())
                }
            }
        }
    }

    fn var_for(&mut self, entry: CcEntry, base: &str, arity: usize) -> Symbol {
        if self.share {
            for (y, e) in self.st.cc.entries.iter() {
                if e.alpha_equal_entry(&entry) {
                    return y.clone();
                }
            }
        }
        let var = self.st.fresh_var(base, Sort::fun_chain(arity));
        for dep in entry.free_dependencies() {
            self.st
                .vc
                .add_p(dep.clone(), var.clone())
                .expect("elimination edge classes");
            self.p_delta.insert((dep, var.clone()));
        }
        self.st.cc.insert(var.clone(), entry);
        self.created.push(var.clone());
        var
    }
}

fn eliminate_with(f: &Formula, st: ProofState, share: bool) -> (ElimResult, ProofState) {
    let mut el = Eliminator { st, created: Vec::new(), p_delta: BTreeSet::new(), share };
    el.st.register_formula(f);
    let mut binders = Vec::new();
    let out = el.formula(f, &mut binders);
    let mut cc_delta = ChoiceCondition::empty();
    for var in &el.created {
        cc_delta.insert(var.clone(), el.st.cc.get(var).expect("created entry").clone());
    }
    debug_assert!(check_cc(&el.st.cc, &el.st.vc).is_ok());
    (ElimResult { formula: out, cc_delta, p_delta: el.p_delta }, el.st)
}

/// Replaces every epsilon term by a choice-conditioned free variable
/// applied to the enclosing binders it depends on. Alpha-equal lifted
/// entries share one variable (committed choice).
pub fn eliminate(f: &Formula, st: ProofState) -> (Formula, ProofState) {
    let (res, st) = eliminate_with(f, st, true);
    (res.formula, st)
}

/// Like [`eliminate`], but every occurrence gets its own fresh variable,
/// even when the lifted entries are alpha-equal.
pub fn eliminate_fresh(f: &Formula, st: ProofState) -> (Formula, ProofState) {
    let (res, st) = eliminate_with(f, st, false);
    (res.formula, st)
}

/// [`eliminate`] with a delta report of the entries and P edges created.
pub fn eliminate_traced(f: &Formula, st: ProofState) -> (ElimResult, ProofState) {
    eliminate_with(f, st, true)
}

fn collect_names_term(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Sym(s) => {
            out.insert(s.name.clone());
        }
        Term::App(h, args) => {
            out.insert(h.name.clone());
            for a in args {
                collect_names_term(a, out);
            }
        }
        Term::Eps(x, b) => {
            out.insert(x.name.clone());
            collect_names(b, out);
        }
    }
}

fn collect_names(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Pred(p, args) => {
            out.insert(p.name.clone());
            for a in args {
                collect_names_term(a, out);
            }
        }
        Formula::Eq(a, b) => {
            collect_names_term(a, out);
            collect_names_term(b, out);
        }
        Formula::Not(a) => collect_names(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_names(a, out);
            collect_names(b, out);
        }
        Formula::Forall(x, a) | Formula::Exists(x, a) => {
            out.insert(x.name.clone());
            collect_names(a, out);
        }
    }
}

/// Names of the bound atoms occurring free in `t`, ordered by first
/// occurrence in a left-to-right walk. Shadowed occurrences do not count.
fn occurrence_ordered_atoms(t: &Term) -> Vec<String> {
    let mut out = Vec::new();
    let mut scope = Vec::new();
    ordered_atoms_term(t, &mut scope, &mut out);
    out
}

fn ordered_atoms_term(t: &Term, scope: &mut Vec<String>, out: &mut Vec<String>) {
    match t {
        Term::Sym(s) => {
            if s.class == Class::BoundAtom
                && !scope.iter().any(|n| n == &s.name)
                && !out.iter().any(|n| n == &s.name)
            {
                out.push(s.name.clone());
            }
        }
        Term::App(_, args) => {
            for a in args {
                ordered_atoms_term(a, scope, out);
            }
        }
        Term::Eps(x, b) => {
            scope.push(x.name.clone());
            ordered_atoms_formula(b, scope, out);
            scope.pop();
        }
    }
}

fn ordered_atoms_formula(f: &Formula, scope: &mut Vec<String>, out: &mut Vec<String>) {
    match f {
        Formula::Pred(_, args) => {
            for a in args {
                ordered_atoms_term(a, scope, out);
            }
        }
        Formula::Eq(a, b) => {
            ordered_atoms_term(a, scope, out);
            ordered_atoms_term(b, scope, out);
        }
        Formula::Not(a) => ordered_atoms_formula(a, scope, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            ordered_atoms_formula(a, scope, out);
            ordered_atoms_formula(b, scope, out);
        }
        Formula::Forall(x, a) | Formula::Exists(x, a) => {
            scope.push(x.name.clone());
            ordered_atoms_formula(a, scope, out);
            scope.pop();
        }
    }
}

/// Rewrites every choice-condition variable back to its epsilon term,
/// beta-reducing applications against the entry's lambda prefix. The
/// choice condition must be well-formed (acyclic dependencies); a cycle is
/// reported rather than looped on.
pub fn reconstruct(f: &Formula, cc: &ChoiceCondition) -> Result<Formula, EpsilonError> {
    let mut visiting = BTreeSet::new();
    rec_formula(f, cc, &mut visiting)
}

fn rec_formula(
    f: &Formula,
    cc: &ChoiceCondition,
    visiting: &mut BTreeSet<Symbol>,
) -> Result<Formula, EpsilonError> {
    Ok(match f {
        Formula::Pred(p, args) => Formula::Pred(
            p.clone(),
            args.iter()
                .map(|t| rec_term(t, cc, visiting))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Eq(a, b) => {
            Formula::Eq(rec_term(a, cc, visiting)?, rec_term(b, cc, visiting)?)
        }
        Formula::Not(a) => Formula::not(rec_formula(a, cc, visiting)?),
        Formula::And(a, b) => {
            Formula::and(rec_formula(a, cc, visiting)?, rec_formula(b, cc, visiting)?)
        }
        Formula::Or(a, b) => {
            Formula::or(rec_formula(a, cc, visiting)?, rec_formula(b, cc, visiting)?)
        }
        Formula::Implies(a, b) => {
            Formula::implies(rec_formula(a, cc, visiting)?, rec_formula(b, cc, visiting)?)
        }
        Formula::Forall(x, a) => Formula::forall(x.clone(), rec_formula(a, cc, visiting)?),
        Formula::Exists(x, a) => Formula::exists(x.clone(), rec_formula(a, cc, visiting)?),
    })
}

fn rec_term(
    t: &Term,
    cc: &ChoiceCondition,
    visiting: &mut BTreeSet<Symbol>,
) -> Result<Term, EpsilonError> {
    match t {
        Term::Sym(s) if s.class == Class::FreeVar && cc.get(s).is_some() => {
            expand(s, &[], cc, visiting)
        }
        Term::Sym(s) => Ok(Term::Sym(s.clone())),
        Term::App(h, args) => {
            let args2: Vec<Term> = args
                .iter()
                .map(|a| rec_term(a, cc, visiting))
                .collect::<Result<_, _>>()?;
            if h.class == Class::FreeVar && cc.get(h).is_some() {
                expand(h, &args2, cc, visiting)
            } else {
                Ok(Term::App(h.clone(), args2))
            }
        }
        Term::Eps(x, b) => Ok(Term::Eps(x.clone(), Box::new(rec_formula(b, cc, visiting)?))),
    }
}

fn expand(
    y: &Symbol,
    args: &[Term],
    cc: &ChoiceCondition,
    visiting: &mut BTreeSet<Symbol>,
) -> Result<Term, EpsilonError> {
    let entry = cc.get(y).expect("caller checked membership");
    if args.len() != entry.prefix.len() {
        return Err(EpsilonError::PartialApplication {
            var: y.clone(),
            got: args.len(),
            want: entry.prefix.len(),
        });
    }
    if !visiting.insert(y.clone()) {
        return Err(EpsilonError::CyclicCc(y.clone()));
    }
    // The entry binder must not capture atoms free in the arguments.
    let mut avoid: BTreeSet<String> = BTreeSet::new();
    collect_names(&entry.body, &mut avoid);
    for a in args {
        for s in free_symbols_term(a, &[Class::BoundAtom]) {
            avoid.insert(s.name);
        }
    }
    let arg_atoms: BTreeSet<String> = args
        .iter()
        .flat_map(|a| free_symbols_term(a, &[Class::BoundAtom]))
        .map(|s| s.name)
        .collect();
    let (bound, body) = if arg_atoms.contains(&entry.bound.name) {
        let fresh = Symbol::bound_atom(fresh_name(&entry.bound.name, &avoid));
        let rename =
            Substitution::raw(vec![(entry.bound.clone(), Term::Sym(fresh.clone()))]);
        (fresh, apply_subst(&entry.body, &rename))
    } else {
        (entry.bound.clone(), entry.body.clone())
    };
    let pairs: Vec<(Symbol, Term)> = entry
        .prefix
        .iter()
        .cloned()
        .zip(args.iter().cloned())
        .collect();
    let instantiated = apply_subst(&body, &Substitution::raw(pairs));
    let expanded = rec_formula(&instantiated, cc, visiting)?;
    visiting.remove(y);
    Ok(Term::Eps(bound, Box::new(expanded)))
}

// ---------------------------------------------------------------------------
// Quantifier elimination
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Eq, PartialEq)]
pub enum QelimMode {
    InsideOut,
}

#[derive(Clone, Debug, Eq, PartialEq)]
pub struct SubtermStat {
    pub name: String,
    pub depth: u64,
    pub binders: u64,
}

/// Nesting depth and binder count of the whole result and of the epsilon
/// term standing in for each eliminated quantifier, outermost first.
#[derive(Clone, Debug, Eq, PartialEq)]
pub struct EpsStats {
    pub whole_depth: u64,
    pub whole_binders: u64,
    pub subterms: Vec<SubtermStat>,
}

struct Qelim {
    // One row per eliminated quantifier in elimination (innermost-first)
    // order; later substitutions keep the terms current.
    rows: Vec<(Symbol, Term)>,
}

impl Qelim {
    fn run(&mut self, f: &Formula) -> Formula {
        match f {
            Formula::Pred(_, _) | Formula::Eq(_, _) => f.clone(),
            Formula::Not(a) => Formula::not(self.run(a)),
            Formula::And(a, b) => Formula::and(self.run(a), self.run(b)),
            Formula::Or(a, b) => Formula::or(self.run(a), self.run(b)),
            Formula::Implies(a, b) => Formula::implies(self.run(a), self.run(b)),
            Formula::Forall(x, a) => {
                let a2 = self.run(a);
                let eps = Term::Eps(x.clone(), Box::new(Formula::not(a2.clone())));
                self.record(x, &eps);
                apply_subst(&a2, &Substitution::raw(vec![(x.clone(), eps)]))
            }
            Formula::Exists(x, a) => {
                let a2 = self.run(a);
                let eps = Term::Eps(x.clone(), Box::new(a2.clone()));
                self.record(x, &eps);
                apply_subst(&a2, &Substitution::raw(vec![(x.clone(), eps)]))
            }
        }
    }

    fn record(&mut self, x: &Symbol, eps: &Term) {
        let s = Substitution::raw(vec![(x.clone(), eps.clone())]);
        for (_, t) in self.rows.iter_mut() {
            *t = apply_subst_term(t, &s);
        }
        self.rows.push((x.clone(), eps.clone()));
    }
}

type StatMemo = HashMap<Term, (u64, u64)>;

fn term_stats(t: &Term, memo: &mut StatMemo) -> (u64, u64) {
    if let Some(&cached) = memo.get(t) {
        return cached;
    }
    let out = match t {
        Term::Sym(_) => (0, 0),
        Term::App(_, args) => {
            let mut depth = 0;
            let mut binders = 0;
            for a in args {
                let (d, b) = term_stats(a, memo);
                depth = depth.max(d);
                binders += b;
            }
            (depth, binders)
        }
        Term::Eps(_, body) => {
            let (d, b) = formula_stats(body, memo);
            (d + 1, b + 1)
        }
    };
    memo.insert(t.clone(), out);
    out
}

fn formula_stats(f: &Formula, memo: &mut StatMemo) -> (u64, u64) {
    match f {
        Formula::Pred(_, args) => {
            let mut depth = 0;
            let mut binders = 0;
            for a in args {
                let (d, b) = term_stats(a, memo);
                depth = depth.max(d);
                binders += b;
            }
            (depth, binders)
        }
        Formula::Eq(a, b) => {
            let (da, ba) = term_stats(a, memo);
            let (db, bb) = term_stats(b, memo);
            (da.max(db), ba + bb)
        }
        Formula::Not(a) => formula_stats(a, memo),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let (da, ba) = formula_stats(a, memo);
            let (db, bb) = formula_stats(b, memo);
            (da.max(db), ba + bb)
        }
        Formula::Forall(_, a) | Formula::Exists(_, a) => formula_stats(a, memo),
    }
}

/// Eliminates every quantifier innermost-first: `ex x. A` becomes
/// `A{x <- eps x. A}` and `all x. A` becomes `A{x <- eps x. ~A}`. Returns
/// the quantifier-free formula and exact size statistics for the whole
/// result and for each quantifier's epsilon term (outermost first).
pub fn qelim(f: &Formula, mode: QelimMode) -> Result<(Formula, EpsStats), EpsilonError> {
    let QelimMode::InsideOut = mode;
    if let Some(a) = free_symbols(f, &[Class::BoundAtom]).into_iter().next() {
        return Err(EpsilonError::UnboundAtom(a));
    }
    let mut q = Qelim { rows: Vec::new() };
    let out = q.run(f);
    let mut memo = StatMemo::new();
    let (whole_depth, whole_binders) = formula_stats(&out, &mut memo);
    let subterms = q
        .rows
        .iter()
        .rev()
        .map(|(sym, t)| {
            let (depth, binders) = term_stats(t, &mut memo);
            SubtermStat { name: sym.name.clone(), depth, binders }
        })
        .collect();
    Ok((out, EpsStats { whole_depth, whole_binders, subterms }))
}

fn ordinal(k: usize) -> String {
    let suffix = match (k % 10, k % 100) {
        (1, 11) | (2, 12) | (3, 13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{k}{suffix}")
}

fn quantifier_free(f: &Formula) -> bool {
    match f {
        Formula::Pred(_, _) | Formula::Eq(_, _) => true,
        Formula::Not(a) => quantifier_free(a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            quantifier_free(a) && quantifier_free(b)
        }
        Formula::Forall(_, _) | Formula::Exists(_, _) => false,
    }
}

/// Eliminates a homogeneous prenex block in one parallel step: the block's
/// variables are chosen as one tuple through projection constants
/// `1st..kth` applied to a single epsilon term. With one quantifier this
/// coincides with [`qelim`].
pub fn qelim_parallel_homogeneous(f: &Formula) -> Result<Formula, EpsilonError> {
    if let Some(a) = free_symbols(f, &[Class::BoundAtom]).into_iter().next() {
        return Err(EpsilonError::UnboundAtom(a));
    }
    let universal = matches!(f, Formula::Forall(_, _));
    let mut prefix = Vec::new();
    let mut cur = f;
    loop {
        match (universal, cur) {
            (true, Formula::Forall(x, a)) => {
                prefix.push(x.clone());
                cur = a;
            }
            (false, Formula::Exists(x, a)) => {
                prefix.push(x.clone());
                cur = a;
            }
            _ => break,
        }
    }
    if prefix.is_empty() || !quantifier_free(cur) {
        return Err(EpsilonError::NotHomogeneous);
    }
    let body = cur.clone();
    if prefix.len() == 1 {
        let x = &prefix[0];
        let eps_body = if universal { Formula::not(body.clone()) } else { body.clone() };
        let eps = Term::Eps(x.clone(), Box::new(eps_body));
        return Ok(apply_subst(&body, &Substitution::raw(vec![(x.clone(), eps)])));
    }
    let mut names = BTreeSet::new();
    collect_names(&body, &mut names);
    let v = Symbol::bound_atom(fresh_name("v", &names));
    let projections: Vec<Symbol> = (1..=prefix.len())
        .map(|k| Symbol::with_sort(Class::Constant, ordinal(k), Sort::fun_chain(1)))
        .collect();
    let project = |target: Term| -> Substitution {
        let pairs: Vec<(Symbol, Term)> = prefix
            .iter()
            .zip(&projections)
            .map(|(x, p)| (x.clone(), Term::App(p.clone(), vec![target.clone()])))
            .collect();
        Substitution::raw(pairs)
    };
    let inner = apply_subst(&body, &project(Term::Sym(v.clone())));
    let eps_body = if universal { Formula::not(inner) } else { inner };
    let tuple = Term::Eps(v, Box::new(eps_body));
    Ok(apply_subst(&body, &project(tuple)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_equal, parse_formula, Signature};

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.declare_pred("P", 4);
        s.declare_pred("Q", 1);
        s.declare_pred("R", 2);
        s.declare_pred("Father", 2);
        s
    }

    fn st() -> ProofState {
        ProofState::new(sig())
    }

    #[test]
    fn single_eps_becomes_choice_variable() {
        let f = parse_formula("C = eps x. (x = x)", &sig()).unwrap();
        let (res, st) = eliminate_traced(&f, st());
        assert_eq!(res.formula.to_string(), "C = ?x_0");
        assert_eq!(res.cc_delta.len(), 1);
        assert!(res.p_delta.is_empty());
        let entry = st.cc.get(&Symbol::free_var("x_0")).unwrap();
        assert!(entry.prefix.is_empty());
        assert_eq!(entry.body.to_string(), "x = x");
    }

    #[test]
    fn committed_sharing_identifies_alpha_equal_terms() {
        let f = parse_formula("~(eps x. (x = x) = eps y. (y = y))", &sig()).unwrap();
        let (out, st) = eliminate(&f, st());
        assert_eq!(out.to_string(), "~(?x_0 = ?x_0)");
        assert_eq!(st.cc.len(), 1);
    }

    #[test]
    fn fresh_elimination_keeps_occurrences_apart() {
        let f = parse_formula("~(eps x. (x = x) = eps y. (y = y))", &sig()).unwrap();
        let (out, st) = eliminate_fresh(&f, st());
        assert_eq!(out.to_string(), "~(?x_0 = ?y_1)");
        assert_eq!(st.cc.len(), 2);
        let a = st.cc.get(&Symbol::free_var("x_0")).unwrap();
        let b = st.cc.get(&Symbol::free_var("y_1")).unwrap();
        assert!(a.alpha_equal_entry(b));
    }

    #[test]
    fn subordinate_occurrence_gets_lambda_prefix() {
        let f = parse_formula("all b. R(b, eps y. R(b, y))", &sig()).unwrap();
        let (out, st) = eliminate(&f, st());
        assert_eq!(out.to_string(), "all b. R(b, ?y_0(b))");
        let entry = st.cc.get(&Symbol::free_var("y_0")).unwrap();
        assert_eq!(entry.prefix.len(), 1);
        assert_eq!(entry.prefix[0].name, "b");
        assert_eq!(entry.body.to_string(), "R(b, y)");
    }

    #[test]
    fn canossa_fresh_readings() {
        let f = parse_formula(
            "HG = eps z. Father(z, Jesus) & Joseph = eps z. Father(z, Jesus)",
            &sig(),
        )
        .unwrap();
        let (out, st) = eliminate_fresh(&f, st());
        assert_eq!(out.to_string(), "HG = ?z_0 & Joseph = ?z_1");
        let a = st.cc.get(&Symbol::free_var("z_0")).unwrap();
        let b = st.cc.get(&Symbol::free_var("z_1")).unwrap();
        assert!(a.alpha_equal_entry(b));
        assert_eq!(a.body.to_string(), "Father(z, Jesus)");
    }

    #[test]
    fn reconstruct_round_trips() {
        for text in [
            "C = eps x. (x = x)",
            "~(eps x. (x = x) = eps y. (y = y))",
            "all b. R(b, eps y. R(b, y))",
            "Q(C) -> ex w. R(w, eps u. R(w, u))",
        ] {
            let f = parse_formula(text, &sig()).unwrap();
            let (out, st) = eliminate(&f, st());
            let back = reconstruct(&out, &st.cc).unwrap();
            assert!(alpha_equal(&back, &f), "{text}: got {back}");
            let (out2, st2) = eliminate_fresh(&f, st);
            let back2 = reconstruct(&out2, &st2.cc).unwrap();
            assert!(alpha_equal(&back2, &f), "{text} (fresh): got {back2}");
        }
    }

    #[test]
    fn reconstruct_single_entry_example() {
        let f = parse_formula("C = eps x. (x = x)", &sig()).unwrap();
        let (_, st) = eliminate(&f, st());
        let var = parse_formula("?x_0 = ?x_0", &sig()).unwrap();
        let back = reconstruct(&var, &st.cc).unwrap();
        assert_eq!(back.to_string(), "eps x. (x = x) = eps x. (x = x)");
    }

    #[test]
    fn reconstruct_rejects_partial_application() {
        let f = parse_formula("all b. R(b, eps y. R(b, y))", &sig()).unwrap();
        let (_, st) = eliminate(&f, st());
        let bad = parse_formula("?y_0 = C", &sig()).unwrap();
        match reconstruct(&bad, &st.cc) {
            Err(EpsilonError::PartialApplication { got: 0, want: 1, .. }) => {}
            other => panic!("expected partial application error, got {other:?}"),
        }
    }

    #[test]
    fn reconstruct_detects_cycles() {
        let mut cc = ChoiceCondition::empty();
        let x = Symbol::free_var("x");
        let body = parse_formula("z = ?x", &sig()).unwrap();
        cc.insert(x.clone(), CcEntry::lambda_free(Symbol::bound_atom("z"), body));
        let f = parse_formula("?x = C", &sig()).unwrap();
        match reconstruct(&f, &cc) {
            Err(EpsilonError::CyclicCc(y)) => assert_eq!(y, x),
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn qelim_single_exists() {
        let f = parse_formula("ex x. Q(x)", &sig()).unwrap();
        let (out, stats) = qelim(&f, QelimMode::InsideOut).unwrap();
        assert_eq!(out.to_string(), "Q(eps x. Q(x))");
        assert_eq!(stats.whole_depth, 1);
        assert_eq!(stats.whole_binders, 1);
        assert_eq!(stats.subterms.len(), 1);
        assert_eq!(stats.subterms[0].name, "x");
        assert_eq!((stats.subterms[0].depth, stats.subterms[0].binders), (1, 1));
    }

    #[test]
    fn qelim_two_alternations() {
        let f = parse_formula("ex y. all z. R(y, z)", &sig()).unwrap();
        let (out, stats) = qelim(&f, QelimMode::InsideOut).unwrap();
        assert_eq!(stats.whole_depth, 3);
        assert_eq!(stats.whole_binders, 5);
        assert_eq!(stats.subterms.len(), 2);
        assert_eq!(stats.subterms[0].name, "y");
        assert_eq!((stats.subterms[0].depth, stats.subterms[0].binders), (2, 2));
        assert_eq!(stats.subterms[1].name, "z");
        assert_eq!((stats.subterms[1].depth, stats.subterms[1].binders), (3, 3));
        // The y term is the two-step eps; the z term repeats it inside.
        assert_eq!(
            out.to_string(),
            "R(eps y. R(y, eps z. (~R(y, z))), \
             eps z. (~R(eps y. R(y, eps z. (~R(y, z))), z)))"
        );
    }

    #[test]
    fn qelim_rejects_unbound_atoms() {
        let f = parse_formula("Q(stray)", &sig()).unwrap();
        assert!(matches!(
            qelim(&f, QelimMode::InsideOut),
            Err(EpsilonError::UnboundAtom(_))
        ));
    }

    #[test]
    fn qelim_preserves_closedness() {
        let f = parse_formula("ex w. all x. ex y. all z. P(w, x, y, z)", &sig()).unwrap();
        let (out, _) = qelim(&f, QelimMode::InsideOut).unwrap();
        for class in [Class::FreeVar, Class::FreeAtom, Class::BoundAtom] {
            assert!(free_symbols(&out, &[class]).is_empty(), "{class:?}");
        }
    }

    #[test]
    fn parallel_block_uses_projections() {
        let f = parse_formula("all w. all x. all y. all z. P(w, x, y, z)", &sig()).unwrap();
        let out = qelim_parallel_homogeneous(&f).unwrap();
        match &out {
            Formula::Pred(p, args) => {
                assert_eq!(p.name, "P");
                assert_eq!(args.len(), 4);
                let expected = ["1st", "2nd", "3rd", "4th"];
                let mut tuple = None;
                for (i, arg) in args.iter().enumerate() {
                    match arg {
                        Term::App(h, inner) => {
                            assert_eq!(h.name, expected[i]);
                            assert_eq!(inner.len(), 1);
                            match tuple {
                                None => tuple = Some(inner[0].clone()),
                                Some(ref t) => assert_eq!(&inner[0], t),
                            }
                        }
                        other => panic!("expected a projection, got {other}"),
                    }
                }
                match tuple.unwrap() {
                    Term::Eps(v, body) => {
                        assert_eq!(v.name, "v");
                        assert!(matches!(*body, Formula::Not(_)));
                    }
                    other => panic!("expected an eps tuple, got {other}"),
                }
            }
            other => panic!("expected a predicate, got {other}"),
        }
    }

    #[test]
    fn parallel_single_quantifier_matches_qelim() {
        let f = parse_formula("ex x. Q(x)", &sig()).unwrap();
        let par = qelim_parallel_homogeneous(&f).unwrap();
        let (seq, _) = qelim(&f, QelimMode::InsideOut).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn parallel_existential_block_keeps_positive_body() {
        let f = parse_formula("ex x. ex y. R(x, y)", &sig()).unwrap();
        let out = qelim_parallel_homogeneous(&f).unwrap();
        match &out {
            Formula::Pred(_, args) => match &args[0] {
                Term::App(_, inner) => match &inner[0] {
                    Term::Eps(_, body) => {
                        assert!(matches!(**body, Formula::Pred(_, _)))
                    }
                    other => panic!("{other}"),
                },
                other => panic!("{other}"),
            },
            other => panic!("{other}"),
        }
    }

    #[test]
    fn parallel_rejects_mixed_prefix() {
        let f = parse_formula("all x. ex y. R(x, y)", &sig()).unwrap();
        assert!(matches!(
            qelim_parallel_homogeneous(&f),
            Err(EpsilonError::NotHomogeneous)
        ));
        let g = parse_formula("Q(C)", &sig()).unwrap();
        assert!(matches!(
            qelim_parallel_homogeneous(&g),
            Err(EpsilonError::NotHomogeneous)
        ));
    }
}
