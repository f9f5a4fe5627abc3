//! Causal DAGs, triplet classification, and an exact d-separation engine.
//!
//! A [`CausalDag`] is a directed acyclic graph over named nodes. The module
//! answers conditional-independence queries implied by the graph structure:
//! [`CausalDag::d_separated`] runs a reachability procedure over
//! (node, travel direction) states, and [`oracle`] holds a slow
//! path-enumeration reference implementation used to cross-check it.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Largest node count accepted by [`CausalDag::implied_independencies`],
/// which enumerates all pairs and all conditioning subsets.
pub const MAX_ENUMERATION_NODES: usize = 12;

/// Directed acyclic graph over named nodes.
///
/// Nodes are fixed at construction and held in lexicographic order; edges are
/// added afterwards and every insertion re-checks acyclicity. Values are
/// immutable once built up and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl CausalDag {
    /// Creates a graph with the given node set and no edges.
    ///
    /// Duplicate names collapse to one node (set semantics).
    pub fn new<I, S>(nodes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = nodes.into_iter().map(Into::into).collect();
        let names: Vec<String> = set.into_iter().collect();
        let n = names.len();
        CausalDag {
            names,
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        }
    }

    /// Node names in lexicographic order.
    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    /// Edges as `(from, to)` name pairs, ordered by node index.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (u, ch) in self.children.iter().enumerate() {
            for &v in ch {
                out.push((self.names[u].as_str(), self.names[v].as_str()));
            }
        }
        out.sort();
        out
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .map_err(|_| Error::UnknownNode(name.to_string()))
    }

    fn has_edge(&self, from: usize, to: usize) -> bool {
        self.children[from].contains(&to)
    }

    /// True when `to` is reachable from `from` along directed edges.
    fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.children[u] {
                if v == to {
                    return true;
                }
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }

    /// Adds the directed edge `from -> to`.
    ///
    /// Re-adding an existing edge is a no-op. Fails with [`Error::Cycle`]
    /// when the edge would close a directed cycle (self-loops included) and
    /// with [`Error::UnknownNode`] when an endpoint was never declared.
    pub fn add_edge(&mut self, from: &str, to: &str) -> Result<()> {
        let u = self.index_of(from)?;
        let v = self.index_of(to)?;
        if self.has_edge(u, v) {
            return Ok(());
        }
        // u == v is the length-one cycle.
        if self.reaches(v, u) {
            return Err(Error::Cycle {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        self.children[u].push(v);
        self.children[u].sort_unstable();
        self.parents[v].push(u);
        self.parents[v].sort_unstable();
        Ok(())
    }

    /// Convenience constructor: nodes plus a list of edges.
    pub fn with_edges<I, S>(nodes: I, edges: &[(&str, &str)]) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut dag = CausalDag::new(nodes);
        for (from, to) in edges {
            dag.add_edge(from, to)?;
        }
        Ok(dag)
    }

    /// Parent names of `node`, lexicographically ordered.
    pub fn parents_of(&self, node: &str) -> Result<Vec<&str>> {
        let i = self.index_of(node)?;
        Ok(self.parents[i]
            .iter()
            .map(|&p| self.names[p].as_str())
            .collect())
    }

    /// Child names of `node`, lexicographically ordered.
    pub fn children_of(&self, node: &str) -> Result<Vec<&str>> {
        let i = self.index_of(node)?;
        Ok(self.children[i]
            .iter()
            .map(|&c| self.names[c].as_str())
            .collect())
    }

    /// Classifies the path triple `a - b - c` by the orientation of its two
    /// edges. Requires adjacency between `a`,`b` and between `b`,`c`.
    pub fn classify_triplet(&self, a: &str, b: &str, c: &str) -> Result<TripletKind> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        let ic = self.index_of(c)?;
        if ia == ib || ib == ic || ia == ic {
            return Err(Error::InvalidQuery(
                "triplet nodes must be distinct".to_string(),
            ));
        }
        let ab = if self.has_edge(ia, ib) {
            true // a -> b
        } else if self.has_edge(ib, ia) {
            false // b -> a
        } else {
            return Err(Error::NotAdjacent {
                a: a.to_string(),
                b: b.to_string(),
            });
        };
        let bc = if self.has_edge(ib, ic) {
            true // b -> c
        } else if self.has_edge(ic, ib) {
            false // c -> b
        } else {
            return Err(Error::NotAdjacent {
                a: b.to_string(),
                b: c.to_string(),
            });
        };
        Ok(match (ab, bc) {
            (true, true) | (false, false) => TripletKind::Chain,
            (false, true) => TripletKind::Fork,
            (true, false) => TripletKind::Collider,
        })
    }

    /// Decides whether `x` and `y` are d-separated given the conditioning set.
    ///
    /// A path is blocked when some non-collider on it is conditioned on, or
    /// when some collider on it has neither itself nor any descendant in the
    /// conditioning set. `x` and `y` are d-separated when every undirected
    /// path between them is blocked.
    ///
    /// The implementation walks (node, travel direction) states breadth-first
    /// and applies the activation rules locally, so it never materializes
    /// paths. [`oracle::d_separated_by_paths`] is the independent reference.
    pub fn d_separated<S: AsRef<str>>(&self, x: &str, y: &str, given: &[S]) -> Result<bool> {
        let sx = self.index_of(x)?;
        let sy = self.index_of(y)?;
        let mut observed = vec![false; self.names.len()];
        for g in given {
            observed[self.index_of(g.as_ref())?] = true;
        }
        if sx == sy {
            return Err(Error::InvalidQuery("x and y must differ".to_string()));
        }
        if observed[sx] || observed[sy] {
            return Err(Error::InvalidQuery(
                "x and y must not appear in the conditioning set".to_string(),
            ));
        }
        Ok(!self.reachable_via_active_trail(sx, sy, &observed))
    }

    /// Core reachability procedure. `observed` marks the conditioning set.
    fn reachable_via_active_trail(&self, from: usize, target: usize, observed: &[bool]) -> bool {
        let n = self.names.len();
        // Collider activation: a collider passes the trail through when it or
        // one of its descendants is observed, i.e. when it is an ancestor of
        // (or member of) the conditioning set.
        let mut anc_of_observed = observed.to_vec();
        let mut stack: Vec<usize> = (0..n).filter(|&i| observed[i]).collect();
        while let Some(u) = stack.pop() {
            for &p in &self.parents[u] {
                if !anc_of_observed[p] {
                    anc_of_observed[p] = true;
                    stack.push(p);
                }
            }
        }

        // State (node, arrived-from-parent?). Starting at `from` we may leave
        // in any direction, which matches arriving from a child.
        let mut visited = vec![false; 2 * n];
        let mut queue: Vec<(usize, bool)> = vec![(from, false)];
        visited[2 * from] = true;
        while let Some((v, from_parent)) = queue.pop() {
            if v == target {
                return true;
            }
            let push =
                |state: (usize, bool), visited: &mut Vec<bool>, queue: &mut Vec<(usize, bool)>| {
                    let slot = 2 * state.0 + state.1 as usize;
                    if !visited[slot] {
                        visited[slot] = true;
                        queue.push(state);
                    }
                };
            if from_parent {
                // v sits mid-trail as a chain (continue to children) or as a
                // collider (bounce back to parents).
                if !observed[v] {
                    for &c in &self.children[v] {
                        push((c, true), &mut visited, &mut queue);
                    }
                }
                if anc_of_observed[v] {
                    for &p in &self.parents[v] {
                        push((p, false), &mut visited, &mut queue);
                    }
                }
            } else {
                // Arrived against an edge (or at the start): v is a chain or
                // fork center, open only while unobserved.
                if !observed[v] {
                    for &c in &self.children[v] {
                        push((c, true), &mut visited, &mut queue);
                    }
                    for &p in &self.parents[v] {
                        push((p, false), &mut visited, &mut queue);
                    }
                }
            }
        }
        false
    }

    /// Enumerates every conditional independence the graph implies:
    /// all statements `(x, y, Z)` with `x < y` lexicographically, `Z` ranging
    /// over subsets of the remaining nodes, for which d-separation holds.
    ///
    /// The underlying relation is symmetric in `x` and `y`, so the canonical
    /// `x < y` form carries the full set. Output ordering is deterministic.
    pub fn implied_independencies(&self) -> Result<Vec<IndependenceStatement>> {
        let n = self.names.len();
        if n > MAX_ENUMERATION_NODES {
            return Err(Error::TooLarge {
                size: n,
                bound: MAX_ENUMERATION_NODES,
            });
        }
        let mut out = Vec::new();
        for xi in 0..n {
            for yi in (xi + 1)..n {
                let rest: Vec<usize> = (0..n).filter(|&k| k != xi && k != yi).collect();
                for mask in 0u32..(1 << rest.len()) {
                    let given: Vec<String> = rest
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask >> b & 1 == 1)
                        .map(|(_, &k)| self.names[k].clone())
                        .collect();
                    if self.d_separated(&self.names[xi], &self.names[yi], &given)? {
                        out.push(IndependenceStatement {
                            x: self.names[xi].clone(),
                            y: self.names[yi].clone(),
                            given,
                        });
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Parses the edge-list exchange format: one `from -> to` per line.
    ///
    /// Node names match `[A-Za-z0-9_]+`. A line holding a single name
    /// declares an isolated node. Blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<CausalDag> {
        let mut nodes: BTreeSet<String> = BTreeSet::new();
        let mut edges: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((from, to)) = line.split_once("->") {
                let from = parse_node_name(from.trim(), lineno)?;
                let to = parse_node_name(to.trim(), lineno)?;
                nodes.insert(from.clone());
                nodes.insert(to.clone());
                edges.push((from, to));
            } else {
                let name = parse_node_name(line, lineno)?;
                nodes.insert(name);
            }
        }
        let mut dag = CausalDag::new(nodes);
        for (from, to) in &edges {
            dag.add_edge(from, to)?;
        }
        Ok(dag)
    }

    /// Renders the graph in the edge-list exchange format.
    pub fn to_edge_list(&self) -> String {
        let mut lines: Vec<String> = self
            .edges()
            .iter()
            .map(|(f, t)| format!("{f} -> {t}"))
            .collect();
        let connected: BTreeSet<&str> = self.edges().iter().flat_map(|&(f, t)| [f, t]).collect();
        for name in &self.names {
            if !connected.contains(name.as_str()) {
                lines.push(name.clone());
            }
        }
        lines.join("\n") + "\n"
    }
}

fn parse_node_name(s: &str, lineno: usize) -> Result<String> {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        Ok(s.to_string())
    } else {
        Err(Error::Parse(format!(
            "line {}: invalid node name `{s}`",
            lineno + 1
        )))
    }
}

/// Shape of a path triple `a - b - c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripletKind {
    /// `a -> b -> c` or `c -> b -> a`.
    Chain,
    /// `a <- b -> c`: `b` is a common cause.
    Fork,
    /// `a -> b <- c`: `b` is a common effect.
    Collider,
}

/// A conditional independence implied by a graph: `x` independent of `y`
/// given the set `given`. Canonical form has `x < y` and `given` sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndependenceStatement {
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
}

impl fmt::Display for IndependenceStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.given.is_empty() {
            write!(f, "{} _||_ {}", self.x, self.y)
        } else {
            write!(f, "{} _||_ {} | {}", self.x, self.y, self.given.join(","))
        }
    }
}

/// Standard node names used by the canonical graphs.
pub mod roles {
    /// Sensitive attribute.
    pub const SENSITIVE: &str = "A";
    /// True label.
    pub const TRUTH: &str = "Y";
    /// Predicted label.
    pub const PREDICTION: &str = "Yhat";
    /// Correction gate.
    pub const CORRECTION: &str = "C";
    /// Exogenous noise feeding the correction gate.
    pub const CORRECTION_NOISE: &str = "U_C";
}

/// The catalog of data-generating structures analyzed by this crate, one per
/// fairness metric plus the correction mechanism.
///
/// Each graph collapses any indirect unblocked path to a single direct edge,
/// the minimal unblocked path; the analysis only depends on the path being
/// unblocked, not on its length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalKind {
    /// `A -> Y <- Yhat`: collider at the true label.
    Dp,
    /// `A -> Y -> Yhat`: chain with the true label in the middle.
    EoChainAy,
    /// `Yhat -> Y -> A`: the reversed chain.
    EoChainYa,
    /// `A <- Y -> Yhat`: the true label as common cause.
    EoFork,
    /// `A -> Yhat -> Y`: chain with the prediction in the middle.
    PpChainAy,
    /// `Y -> Yhat -> A`: the reversed chain.
    PpChainYa,
    /// `A <- Yhat -> Y`: the prediction as common cause.
    PpFork,
    /// The gated structure: `A -> C <- U_C`, `A -> Y -> Yhat`, `C -> Yhat`,
    /// `A -> Yhat` (the fallback's potential dependence on `A`).
    Correction,
}

impl CanonicalKind {
    pub const ALL: [CanonicalKind; 8] = [
        CanonicalKind::Dp,
        CanonicalKind::EoChainAy,
        CanonicalKind::EoChainYa,
        CanonicalKind::EoFork,
        CanonicalKind::PpChainAy,
        CanonicalKind::PpChainYa,
        CanonicalKind::PpFork,
        CanonicalKind::Correction,
    ];

    /// The seven single-metric graphs, excluding the correction structure.
    pub const METRIC_GRAPHS: [CanonicalKind; 7] = [
        CanonicalKind::Dp,
        CanonicalKind::EoChainAy,
        CanonicalKind::EoChainYa,
        CanonicalKind::EoFork,
        CanonicalKind::PpChainAy,
        CanonicalKind::PpChainYa,
        CanonicalKind::PpFork,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalKind::Dp => "dp",
            CanonicalKind::EoChainAy => "eo_chain_ay",
            CanonicalKind::EoChainYa => "eo_chain_ya",
            CanonicalKind::EoFork => "eo_fork",
            CanonicalKind::PpChainAy => "pp_chain_ay",
            CanonicalKind::PpChainYa => "pp_chain_ya",
            CanonicalKind::PpFork => "pp_fork",
            CanonicalKind::Correction => "correction",
        }
    }
}

impl std::str::FromStr for CanonicalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CanonicalKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown canonical graph `{s}`")))
    }
}

/// Builds one of the canonical graphs over the standard role names.
pub fn canonical_graph(kind: CanonicalKind) -> CausalDag {
    use roles::*;
    let fairness_nodes = [SENSITIVE, TRUTH, PREDICTION];
    let build = |nodes: &[&str], edges: &[(&str, &str)]| {
        CausalDag::with_edges(nodes.iter().copied(), edges)
            .expect("canonical graphs are acyclic by construction")
    };
    match kind {
        CanonicalKind::Dp => build(&fairness_nodes, &[(SENSITIVE, TRUTH), (PREDICTION, TRUTH)]),
        CanonicalKind::EoChainAy => {
            build(&fairness_nodes, &[(SENSITIVE, TRUTH), (TRUTH, PREDICTION)])
        }
        CanonicalKind::EoChainYa => {
            build(&fairness_nodes, &[(PREDICTION, TRUTH), (TRUTH, SENSITIVE)])
        }
        CanonicalKind::EoFork => build(&fairness_nodes, &[(TRUTH, SENSITIVE), (TRUTH, PREDICTION)]),
        CanonicalKind::PpChainAy => build(
            &fairness_nodes,
            &[(SENSITIVE, PREDICTION), (PREDICTION, TRUTH)],
        ),
        CanonicalKind::PpChainYa => build(
            &fairness_nodes,
            &[(TRUTH, PREDICTION), (PREDICTION, SENSITIVE)],
        ),
        CanonicalKind::PpFork => build(
            &fairness_nodes,
            &[(PREDICTION, SENSITIVE), (PREDICTION, TRUTH)],
        ),
        CanonicalKind::Correction => build(
            &[SENSITIVE, TRUTH, PREDICTION, CORRECTION, CORRECTION_NOISE],
            &[
                (SENSITIVE, CORRECTION),
                (CORRECTION_NOISE, CORRECTION),
                (SENSITIVE, TRUTH),
                (TRUTH, PREDICTION),
                (CORRECTION, PREDICTION),
                (SENSITIVE, PREDICTION),
            ],
        ),
    }
}

/// Slow reference implementation of d-separation by exhaustive path
/// enumeration. Exponential in graph size; intended for verification and for
/// small graphs.
pub mod oracle {
    use super::CausalDag;
    use crate::error::{Error, Result};

    /// Decides d-separation by enumerating every simple undirected path from
    /// `x` to `y` and testing each interior triplet against the blocking
    /// rules: a non-collider blocks when observed, a collider blocks when
    /// neither it nor any descendant is observed.
    pub fn d_separated_by_paths<S: AsRef<str>>(
        dag: &CausalDag,
        x: &str,
        y: &str,
        given: &[S],
    ) -> Result<bool> {
        let n = dag.nodes().len();
        if n > 64 {
            return Err(Error::TooLarge { size: n, bound: 64 });
        }
        let idx = |name: &str| -> Result<usize> {
            dag.nodes()
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| Error::UnknownNode(name.to_string()))
        };
        let sx = idx(x)?;
        let sy = idx(y)?;
        if sx == sy {
            return Err(Error::InvalidQuery("x and y must differ".to_string()));
        }
        let mut observed = 0u64;
        for g in given {
            observed |= 1 << idx(g.as_ref())?;
        }
        if observed >> sx & 1 == 1 || observed >> sy & 1 == 1 {
            return Err(Error::InvalidQuery(
                "x and y must not appear in the conditioning set".to_string(),
            ));
        }

        // Descendant closure per node (including the node itself).
        let mut desc: Vec<u64> = (0..n).map(|i| 1u64 << i).collect();
        // Repeated relaxation; cheap at oracle scale.
        let mut changed = true;
        while changed {
            changed = false;
            for u in 0..n {
                let mut m = desc[u];
                for &c in &dag.children[u] {
                    m |= desc[c];
                }
                if m != desc[u] {
                    desc[u] = m;
                    changed = true;
                }
            }
        }

        let mut path = vec![sx];
        let mut active_path_found = false;
        search(
            dag,
            sy,
            observed,
            &desc,
            &mut path,
            1u64 << sx,
            &mut active_path_found,
        );
        Ok(!active_path_found)
    }

    fn search(
        dag: &CausalDag,
        target: usize,
        observed: u64,
        desc: &[u64],
        path: &mut Vec<usize>,
        on_path: u64,
        found: &mut bool,
    ) {
        if *found {
            return;
        }
        let last = *path.last().unwrap();
        if last == target {
            if path_is_active(dag, observed, desc, path) {
                *found = true;
            }
            return;
        }
        let neighbors: Vec<usize> = dag.children[last]
            .iter()
            .chain(dag.parents[last].iter())
            .copied()
            .collect();
        for next in neighbors {
            if on_path >> next & 1 == 1 {
                continue;
            }
            path.push(next);
            search(
                dag,
                target,
                observed,
                desc,
                path,
                on_path | 1 << next,
                found,
            );
            path.pop();
        }
    }

    fn path_is_active(dag: &CausalDag, observed: u64, desc: &[u64], path: &[usize]) -> bool {
        for w in path.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let collider = dag.has_edge(a, b) && dag.has_edge(c, b);
            let blocked = if collider {
                desc[b] & observed == 0
            } else {
                observed >> b & 1 == 1
            };
            if blocked {
                return false;
            }
        }
        true
    }
}
