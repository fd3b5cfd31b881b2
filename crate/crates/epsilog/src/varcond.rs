//! Variable-conditions: the positive/negative edge pair (P, N) that governs
//! which substitutions for free variables are admissible.
//!
//! P edges run from a free variable or free atom to a free variable and mean
//! "must be chosen before". N edges run from a free variable to a free atom
//! and record that the atom was minted after the variable, so the variable
//! must never come to depend on it. Consistency asks that every cycle in the
//! union carries more than one N edge; equivalently, P is acyclic and no N
//! edge can be closed into a cycle through P alone.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::syntax::{free_symbols_term, Class, Substitution, Symbol};

#[derive(Debug, Error)]
pub enum VarCondError {
    #[error("P edge ({0}, {1}) must run from a free variable or atom to a free variable")]
    BadPEdge(Symbol, Symbol),
    #[error("N edge ({0}, {1}) must run from a free variable to a free atom")]
    BadNEdge(Symbol, Symbol),
}

/// A variable-condition (P, N) over free variables and free atoms.
#[derive(Clone, Debug, Default, Eq, PartialEq)]
pub struct VarCond {
    pub p: BTreeSet<(Symbol, Symbol)>,
    pub n: BTreeSet<(Symbol, Symbol)>,
}

fn check_edges(
    p: &BTreeSet<(Symbol, Symbol)>,
    n: &BTreeSet<(Symbol, Symbol)>,
) -> Result<(), VarCondError> {
    for (u, v) in p {
        let src_ok = matches!(u.class, Class::FreeVar | Class::FreeAtom);
        if !src_ok || v.class != Class::FreeVar {
            return Err(VarCondError::BadPEdge(u.clone(), v.clone()));
        }
    }
    for (x, a) in n {
        if x.class != Class::FreeVar || a.class != Class::FreeAtom {
            return Err(VarCondError::BadNEdge(x.clone(), a.clone()));
        }
    }
    Ok(())
}

impl VarCond {
    pub fn empty() -> VarCond {
        VarCond::default()
    }

    pub fn new(
        p: BTreeSet<(Symbol, Symbol)>,
        n: BTreeSet<(Symbol, Symbol)>,
    ) -> Result<VarCond, VarCondError> {
        check_edges(&p, &n)?;
        Ok(VarCond { p, n })
    }

    pub fn add_p(&mut self, from: Symbol, to: Symbol) -> Result<(), VarCondError> {
        let src_ok = matches!(from.class, Class::FreeVar | Class::FreeAtom);
        if !src_ok || to.class != Class::FreeVar {
            return Err(VarCondError::BadPEdge(from, to));
        }
        self.p.insert((from, to));
        Ok(())
    }

    pub fn add_n(&mut self, from: Symbol, to: Symbol) -> Result<(), VarCondError> {
        if from.class != Class::FreeVar || to.class != Class::FreeAtom {
            return Err(VarCondError::BadNEdge(from, to));
        }
        self.n.insert((from, to));
        Ok(())
    }

    fn p_adjacency(&self) -> BTreeMap<&Symbol, Vec<&Symbol>> {
        let mut adj: BTreeMap<&Symbol, Vec<&Symbol>> = BTreeMap::new();
        for (u, v) in &self.p {
            adj.entry(u).or_default().push(v);
        }
        adj
    }

    fn p_is_acyclic(&self) -> bool {
        // Iterative three-color DFS over the P edges.
        let adj = self.p_adjacency();
        let mut color: BTreeMap<&Symbol, u8> = BTreeMap::new();
        for start in adj.keys() {
            if color.get(*start).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(&Symbol, usize)> = vec![(start, 0)];
            color.insert(start, 1);
            while let Some((node, idx)) = stack.pop() {
                let next = adj.get(node).map(|v| v.as_slice()).unwrap_or(&[]);
                if idx < next.len() {
                    stack.push((node, idx + 1));
                    let child = next[idx];
                    match color.get(child).copied().unwrap_or(0) {
                        0 => {
                            color.insert(child, 1);
                            stack.push((child, 0));
                        }
                        1 => return false,
                        _ => {}
                    }
                } else {
                    color.insert(node, 2);
                }
            }
        }
        true
    }

    /// Nodes P-reachable from `from` in one or more steps.
    fn p_reachable_from(&self, from: &Symbol) -> BTreeSet<Symbol> {
        let adj = self.p_adjacency();
        let mut seen: BTreeSet<Symbol> = BTreeSet::new();
        let mut stack: Vec<&Symbol> = match adj.get(from) {
            Some(vs) => vs.clone(),
            None => Vec::new(),
        };
        while let Some(node) = stack.pop() {
            if seen.insert(node.clone()) {
                if let Some(vs) = adj.get(node) {
                    stack.extend(vs.iter().copied());
                }
            }
        }
        seen
    }

    /// True iff `to` is P-reachable from `from` in one or more steps.
    pub fn p_reaches(&self, from: &Symbol, to: &Symbol) -> bool {
        self.p_reachable_from(from).contains(to)
    }

    /// The image of `seeds` under the reflexive-transitive closure of P.
    pub fn p_closure_image(&self, seeds: &BTreeSet<Symbol>) -> BTreeSet<Symbol> {
        let mut out = seeds.clone();
        for s in seeds {
            out.extend(self.p_reachable_from(s));
        }
        out
    }

    /// The preimage of `targets` under the reflexive-transitive closure of P.
    pub fn p_closure_preimage(&self, targets: &BTreeSet<Symbol>) -> BTreeSet<Symbol> {
        let mut radj: BTreeMap<&Symbol, Vec<&Symbol>> = BTreeMap::new();
        for (u, v) in &self.p {
            radj.entry(v).or_default().push(u);
        }
        let mut out = targets.clone();
        let mut stack: Vec<Symbol> = targets.iter().cloned().collect();
        while let Some(node) = stack.pop() {
            if let Some(us) = radj.get(&node) {
                for u in us {
                    if out.insert((*u).clone()) {
                        stack.push((*u).clone());
                    }
                }
            }
        }
        out
    }

    /// True iff every cycle in P together with N passes through more than
    /// one N edge: P alone is acyclic and no N edge (x, a) admits a P path
    /// from a back to x.
    pub fn is_consistent(&self) -> bool {
        if !self.p_is_acyclic() {
            return false;
        }
        for (x, a) in &self.n {
            if self.p_reachable_from(a).contains(x) {
                return false;
            }
        }
        true
    }

    /// The sigma-update: P is extended by an edge (z, x) for every x in the
    /// domain and every free variable or atom z of the replacement for x; N
    /// is unchanged. Defined for substitutions on free variables.
    pub fn sigma_update(&self, subst: &Substitution) -> VarCond {
        let mut out = self.clone();
        for (x, t) in subst.iter() {
            debug_assert_eq!(x.class, Class::FreeVar, "sigma-update needs a variable domain");
            for z in free_symbols_term(t, &[Class::FreeVar, Class::FreeAtom]) {
                out.p.insert((z, x.clone()));
            }
        }
        out
    }

    /// True iff the sigma-update of this variable-condition stays
    /// consistent, i.e. the substitution is admissible here. False for
    /// substitutions on free atoms, whose admissibility is the N-coverage
    /// side condition instead.
    pub fn is_pn_substitution(&self, subst: &Substitution) -> bool {
        if subst.dom().any(|x| x.class != Class::FreeVar) {
            return false;
        }
        self.sigma_update(subst).is_consistent()
    }

    /// True iff `ext` weakly extends `self`: every P edge is in the
    /// transitive closure of the extension's P, and every N edge is kept.
    pub fn is_weak_extension(&self, ext: &VarCond) -> bool {
        for (u, v) in &self.p {
            if !ext.p_reachable_from(u).contains(v) {
                return false;
            }
        }
        self.n.iter().all(|e| ext.n.contains(e))
    }

    /// True iff `ext` extends `self` edge-wise: P and N are both supersets.
    pub fn is_extension(&self, ext: &VarCond) -> bool {
        self.p.is_subset(&ext.p) && self.n.is_subset(&ext.n)
    }

    /// Graphviz rendering: P edges solid, N edges dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph varcond {\n");
        let mut nodes: BTreeSet<&Symbol> = BTreeSet::new();
        for (u, v) in self.p.iter().chain(self.n.iter()) {
            nodes.insert(u);
            nodes.insert(v);
        }
        for node in nodes {
            out.push_str(&format!("  \"{node}\";\n"));
        }
        for (u, v) in &self.p {
            out.push_str(&format!("  \"{u}\" -> \"{v}\" [style=solid];\n"));
        }
        for (u, v) in &self.n {
            out.push_str(&format!("  \"{u}\" -> \"{v}\" [style=dashed];\n"));
        }
        out.push_str("}\n");
        out
    }
}
