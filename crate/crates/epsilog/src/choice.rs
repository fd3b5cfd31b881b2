//! Choice conditions: the finite map C from free variables to (possibly
//! lambda-prefixed) epsilon expressions that records which choices a proof
//! has committed to, together with the Q_C obligation formulas that license
//! instantiating such variables.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::syntax::{
    alpha_equal, apply_subst, free_symbols, free_symbols_term, fresh_name, Class, Formula,
    Sequent, Sort, Substitution, Symbol, Term,
};
use crate::varcond::VarCond;

/// One choice-condition entry `\v0. ... \v_{l-1}. eps v_l. B`.
///
/// The lambda prefix is stored structurally; `bound` is the epsilon-bound
/// atom and `body` may mention the prefix atoms and `bound` free.
#[derive(Clone, Debug, Eq, PartialEq)]
pub struct CcEntry {
    pub prefix: Vec<Symbol>,
    pub bound: Symbol,
    pub body: Formula,
}

impl CcEntry {
    pub fn new(prefix: Vec<Symbol>, bound: Symbol, body: Formula) -> CcEntry {
        CcEntry { prefix, bound, body }
    }

    pub fn lambda_free(bound: Symbol, body: Formula) -> CcEntry {
        CcEntry { prefix: Vec::new(), bound, body }
    }

    /// Binder telescope as a single formula, used for alpha-comparison of
    /// whole entries. The connective is irrelevant; only binding structure
    /// and the body matter.
    pub(crate) fn closure(&self) -> Formula {
        let mut f = Formula::exists(self.bound.clone(), self.body.clone());
        for v in self.prefix.iter().rev() {
            f = Formula::exists(v.clone(), f);
        }
        f
    }

    pub fn alpha_equal_entry(&self, other: &CcEntry) -> bool {
        self.prefix.len() == other.prefix.len() && alpha_equal(&self.closure(), &other.closure())
    }

    /// Free variables and atoms of the entry.
    pub fn free_dependencies(&self) -> std::collections::BTreeSet<Symbol> {
        free_symbols(&self.body, &[Class::FreeVar, Class::FreeAtom])
    }

    /// Applies a substitution on free variables or atoms to the body,
    /// renaming the structural binders first if a replacement term carries a
    /// clashing free bound atom.
    pub fn apply_subst_entry(&self, s: &Substitution) -> CcEntry {
        let mut clash = std::collections::BTreeSet::new();
        for (_, t) in s.iter() {
            for sym in free_symbols_term(t, &[Class::BoundAtom]) {
                clash.insert(sym.name);
            }
        }
        let mut entry = self.clone();
        if !clash.is_empty() {
            let mut avoid = clash.clone();
            for sym in free_symbols(&entry.body, &[Class::FreeVar, Class::FreeAtom, Class::BoundAtom])
            {
                avoid.insert(sym.name);
            }
            let mut renames = Vec::new();
            for v in entry.prefix.iter_mut().chain(std::iter::once(&mut entry.bound)) {
                if clash.contains(&v.name) {
                    let fresh = Symbol::with_sort(
                        Class::BoundAtom,
                        fresh_name(&v.name, &avoid),
                        v.sort.clone(),
                    );
                    avoid.insert(fresh.name.clone());
                    renames.push((v.clone(), Term::Sym(fresh.clone())));
                    *v = fresh;
                }
            }
            if !renames.is_empty() {
                entry.body = apply_subst(&entry.body, &Substitution::raw(renames));
            }
        }
        entry.body = apply_subst(&entry.body, s);
        entry
    }
}

/// A choice condition C.
#[derive(Clone, Debug, Default, Eq, PartialEq)]
pub struct ChoiceCondition {
    pub entries: BTreeMap<Symbol, CcEntry>,
}

#[derive(Debug, Error)]
pub enum CcError {
    #[error("variable-condition is inconsistent")]
    InconsistentVc,
    #[error("item 1 violated at {var}: {why}")]
    Item1 { var: Symbol, why: String },
    #[error("item 2 violated at {var}: bound atom {atom} is free in the entry")]
    Item2 { var: Symbol, atom: Symbol },
    #[error("item 3 violated at {var}: {sym} is not a proper P-predecessor")]
    Item3 { var: Symbol, sym: Symbol },
    #[error("{0} is not in the domain of the choice condition")]
    NotInDomain(Symbol),
    #[error("substitution is not admissible for this variable-condition")]
    NotPnSubstitution,
}

impl ChoiceCondition {
    pub fn empty() -> ChoiceCondition {
        ChoiceCondition::default()
    }

    pub fn get(&self, y: &Symbol) -> Option<&CcEntry> {
        self.entries.get(y)
    }

    pub fn insert(&mut self, y: Symbol, entry: CcEntry) {
        self.entries.insert(y, entry);
    }

    pub fn dom(&self) -> impl Iterator<Item = &Symbol> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per entry: `?y := \v0. ... eps v. <formula>`. The epsilon
    /// part prints through the term printer so the line parses back.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (y, e) in &self.entries {
            out.push_str(&format!("{y} := "));
            for v in &e.prefix {
                out.push_str(&format!("\\{}. ", v.name));
            }
            let eps = Term::Eps(e.bound.clone(), Box::new(e.body.clone()));
            out.push_str(&format!("{eps}\n"));
        }
        out
    }
}

/// Checks well-formedness of a choice condition against a variable-condition:
/// the variable-condition is consistent, every entry respects the class and
/// sort discipline with distinct binders and no stray bound atoms, and every
/// free variable or atom of an entry is a proper P-predecessor of the
/// entry's variable.
pub fn check_cc(cc: &ChoiceCondition, vc: &VarCond) -> Result<(), CcError> {
    if !vc.is_consistent() {
        return Err(CcError::InconsistentVc);
    }
    for (y, e) in &cc.entries {
        if y.class != Class::FreeVar {
            return Err(CcError::Item1 {
                var: y.clone(),
                why: "domain symbol is not a free variable".to_string(),
            });
        }
        if y.sort != Sort::fun_chain(e.prefix.len()) {
            return Err(CcError::Item1 {
                var: y.clone(),
                why: format!(
                    "sort {:?} does not match a lambda prefix of length {}",
                    y.sort,
                    e.prefix.len()
                ),
            });
        }
        let mut names = std::collections::BTreeSet::new();
        for v in e.prefix.iter().chain(std::iter::once(&e.bound)) {
            if v.class != Class::BoundAtom {
                return Err(CcError::Item1 {
                    var: y.clone(),
                    why: format!("binder {v} is not a bound atom"),
                });
            }
            if !names.insert(v.name.clone()) {
                return Err(CcError::Item1 {
                    var: y.clone(),
                    why: format!("binder {v} repeats in the prefix"),
                });
            }
        }
        for atom in free_symbols(&e.body, &[Class::BoundAtom]) {
            if !names.contains(&atom.name) {
                return Err(CcError::Item2 { var: y.clone(), atom });
            }
        }
        for z in e.free_dependencies() {
            if !vc.p_reaches(&z, y) {
                return Err(CcError::Item3 { var: y.clone(), sym: z });
            }
        }
    }
    Ok(())
}

/// Boolean convenience wrapper around [`check_cc`].
pub fn is_cc(cc: &ChoiceCondition, vc: &VarCond) -> bool {
    check_cc(cc, vc).is_ok()
}

/// The single-formula obligation sequent for a choice-condition variable:
/// `all v0. ... all v_{l-1}. (ex v_l. B -> B{v_l <- y(v0)...(v_{l-1})})`.
pub fn q_formula(cc: &ChoiceCondition, y: &Symbol) -> Result<Sequent, CcError> {
    let e = cc.get(y).ok_or_else(|| CcError::NotInDomain(y.clone()))?;
    let applied = if e.prefix.is_empty() {
        Term::Sym(y.clone())
    } else {
        Term::App(y.clone(), e.prefix.iter().cloned().map(Term::Sym).collect())
    };
    let instantiated = apply_subst(
        &e.body,
        &Substitution::raw(vec![(e.bound.clone(), applied)]),
    );
    let mut f = Formula::implies(
        Formula::exists(e.bound.clone(), e.body.clone()),
        instantiated,
    );
    for v in e.prefix.iter().rev() {
        f = Formula::forall(v.clone(), f);
    }
    Ok(Sequent::single(f))
}

/// The extended sigma-update: entries for instantiated variables are removed
/// first, then the substitution is applied to the remaining bodies, and the
/// variable-condition receives its sigma-update.
pub fn extended_sigma_update(
    cc: &ChoiceCondition,
    vc: &VarCond,
    s: &Substitution,
) -> Result<(ChoiceCondition, VarCond), CcError> {
    if !vc.is_pn_substitution(s) {
        return Err(CcError::NotPnSubstitution);
    }
    let mut out = ChoiceCondition::empty();
    for (y, e) in &cc.entries {
        if s.contains(y) {
            continue;
        }
        out.insert(y.clone(), e.apply_subst_entry(s));
    }
    Ok((out, vc.sigma_update(s)))
}

/// True iff `ext` is an extended extension of `base`: every base entry is
/// kept (up to alpha-equality), both sides are well-formed choice conditions
/// for their own variable-conditions, and the variable-condition grows
/// edge-wise.
pub fn is_extended_extension(
    base: (&ChoiceCondition, &VarCond),
    ext: (&ChoiceCondition, &VarCond),
) -> bool {
    let (cc0, vc0) = base;
    let (cc1, vc1) = ext;
    if !is_cc(cc0, vc0) || !is_cc(cc1, vc1) {
        return false;
    }
    if !vc0.is_extension(vc1) {
        return false;
    }
    cc0.entries.iter().all(|(y, e)| match cc1.get(y) {
        Some(e2) => e.alpha_equal_entry(e2),
        None => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_formula, Signature};
    use std::collections::BTreeSet;

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.declare_pred("P", 1);
        s.declare_pred("F", 2);
        s.declare_const("c", 0);
        s
    }

    fn entry(bound: &str, body: &str) -> CcEntry {
        CcEntry::lambda_free(
            Symbol::bound_atom(bound),
            parse_formula(body, &sig()).unwrap(),
        )
    }

    #[test]
    fn empty_cc_with_consistent_vc_checks() {
        assert!(is_cc(&ChoiceCondition::empty(), &VarCond::empty()));
    }

    #[test]
    fn vicious_circle_fails_for_every_vc() {
        // ?x chosen in terms of ?y and vice versa: item 3 forces both
        // ?y P+ ?x and ?x P+ ?y, which no consistent P can provide.
        let mut cc = ChoiceCondition::empty();
        cc.insert(Symbol::free_var("x"), entry("x", "x = ?y"));
        cc.insert(Symbol::free_var("y"), entry("y", "~(?x = y)"));
        assert!(!is_cc(&cc, &VarCond::empty()));
        let mut vc = VarCond::empty();
        vc.add_p(Symbol::free_var("y"), Symbol::free_var("x")).unwrap();
        assert!(!is_cc(&cc, &vc));
        vc.add_p(Symbol::free_var("x"), Symbol::free_var("y")).unwrap();
        // Now both edges exist but P has a cycle.
        assert!(!is_cc(&cc, &vc));
        assert!(matches!(check_cc(&cc, &vc), Err(CcError::InconsistentVc)));
    }

    #[test]
    fn dependency_via_transitive_p_is_accepted() {
        let mut cc = ChoiceCondition::empty();
        cc.insert(Symbol::free_var("x"), entry("x", "x = ?y"));
        let mut vc = VarCond::empty();
        vc.add_p(Symbol::free_var("y"), Symbol::free_var("z")).unwrap();
        vc.add_p(Symbol::free_var("z"), Symbol::free_var("x")).unwrap();
        assert!(is_cc(&cc, &vc));
    }

    #[test]
    fn stray_bound_atom_is_item_2() {
        let mut cc = ChoiceCondition::empty();
        cc.insert(Symbol::free_var("x"), entry("x", "P(w)"));
        match check_cc(&cc, &VarCond::empty()) {
            Err(CcError::Item2 { atom, .. }) => assert_eq!(atom.name, "w"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn q_formula_for_lambda_free_entry() {
        let mut cc = ChoiceCondition::empty();
        cc.insert(Symbol::free_var("x"), entry("x", "~(?y = x)"));
        let q = q_formula(&cc, &Symbol::free_var("x")).unwrap();
        assert_eq!(q.formulas.len(), 1);
        assert_eq!(q.formulas[0].to_string(), "ex x. ~(?y = x) -> ~(?y = ?x)");
    }

    #[test]
    fn q_formula_with_prefix_quantifies_and_applies() {
        let v0 = Symbol::bound_atom("v0");
        let v1 = Symbol::bound_atom("v1");
        let body = parse_formula("F(v0, v1)", &sig()).unwrap();
        let mut cc = ChoiceCondition::empty();
        let y = Symbol::with_sort(Class::FreeVar, "y", Sort::fun_chain(1));
        cc.insert(y.clone(), CcEntry::new(vec![v0], v1, body));
        let q = q_formula(&cc, &y).unwrap();
        assert_eq!(
            q.formulas[0].to_string(),
            "all v0. (ex v1. F(v0, v1) -> F(v0, ?y(v0)))"
        );
    }

    #[test]
    fn extended_sigma_update_drops_domain_then_substitutes() {
        let mut cc = ChoiceCondition::empty();
        cc.insert(Symbol::free_var("x"), entry("x", "x = ?y"));
        cc.insert(Symbol::free_var("y"), entry("y", "P(y)"));
        let mut vc = VarCond::empty();
        vc.add_p(Symbol::free_var("y"), Symbol::free_var("x")).unwrap();
        let s = Substitution::var_subst(vec![(
            Symbol::free_var("y"),
            Term::Sym(Symbol::constant("c")),
        )])
        .unwrap();
        let (cc2, vc2) = extended_sigma_update(&cc, &vc, &s).unwrap();
        assert_eq!(cc2.len(), 1);
        let e = cc2.get(&Symbol::free_var("x")).unwrap();
        assert_eq!(e.body.to_string(), "x = c");
        assert!(is_cc(&cc2, &vc2));
    }

    #[test]
    fn extended_sigma_update_rejects_inadmissible() {
        let mut vc = VarCond::empty();
        vc.add_n(Symbol::free_var("y"), Symbol::free_atom("a")).unwrap();
        let s = Substitution::var_subst(vec![(
            Symbol::free_var("y"),
            Term::Sym(Symbol::free_atom("a")),
        )])
        .unwrap();
        assert!(extended_sigma_update(&ChoiceCondition::empty(), &vc, &s).is_err());
    }

    #[test]
    fn extension_checks() {
        let mut cc = ChoiceCondition::empty();
        cc.insert(Symbol::free_var("x"), entry("x", "P(x)"));
        let vc = VarCond::empty();
        assert!(is_extended_extension((&cc, &vc), (&cc, &vc)));
        let mut bigger = cc.clone();
        bigger.insert(Symbol::free_var("z"), entry("z", "P(z)"));
        assert!(is_extended_extension((&cc, &vc), (&bigger, &vc)));
        assert!(!is_extended_extension((&bigger, &vc), (&cc, &vc)));
    }

    #[test]
    fn entry_alpha_equality_identifies_renamed_binders() {
        let a = entry("x", "P(x)");
        let b = entry("z", "P(z)");
        assert!(a.alpha_equal_entry(&b));
        let c = entry("x", "~P(x)");
        assert!(!a.alpha_equal_entry(&c));
    }

    #[test]
    fn dump_format() {
        let mut cc = ChoiceCondition::empty();
        cc.insert(Symbol::free_var("z_0"), entry("z", "F(z, Jesus)"));
        assert_eq!(cc.dump(), "?z_0 := eps z. F(z, Jesus)\n");
        let v0 = Symbol::bound_atom("v0");
        let g = Symbol::with_sort(Class::FreeVar, "g", Sort::fun_chain(1));
        let body = parse_formula("F(v0, g0)", &sig()).unwrap();
        let mut cc2 = ChoiceCondition::empty();
        cc2.insert(g, CcEntry::new(vec![v0], Symbol::bound_atom("g0"), body));
        assert_eq!(cc2.dump(), "?g := \\v0. eps g0. F(v0, g0)\n");
    }

    #[test]
    fn entry_subst_renames_clashing_structural_binders() {
        // Replacement carries a free v0; the entry's own prefix atom v0 must
        // not capture it.
        let v0 = Symbol::bound_atom("v0");
        let y = Symbol::with_sort(Class::FreeVar, "y", Sort::fun_chain(1));
        let body = parse_formula("F(v0, ?u)", &sig()).unwrap();
        let e = CcEntry::new(vec![v0.clone()], Symbol::bound_atom("w"), body);
        let s = Substitution::var_subst(vec![(Symbol::free_var("u"), Term::Sym(v0.clone()))])
            .unwrap();
        let e2 = e.apply_subst_entry(&s);
        assert_ne!(e2.prefix[0].name, "v0");
        let frees: BTreeSet<_> = free_symbols(&e2.body, &[Class::BoundAtom])
            .into_iter()
            .map(|s| s.name)
            .collect();
        assert!(frees.contains("v0"));
        assert_eq!(y.sort, Sort::fun_chain(1));
    }
}
