//! Envy graphs: plain, reduced and enhanced.
//!
//! Traversals visit nodes and successors in ascending index order, so every
//! cycle and path returned is a deterministic function of the allocation.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::fairness::{leading_agents, two_thirds, BundleValues};
use crate::instance::{Agent, Instance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Plain,
    Reduced,
    Enhanced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Envy,
    Red,
}

impl EdgeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Envy => "envy",
            EdgeLabel::Red => "red",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvyGraph {
    kind: GraphKind,
    out: Vec<Vec<(Agent, EdgeLabel)>>,
    indeg: Vec<usize>,
}

impl EnvyGraph {
    pub fn build(inst: &Instance, x: &Allocation, kind: GraphKind) -> Self {
        let n = inst.num_agents();
        let vals = BundleValues::new(inst, x);
        let two_thirds = two_thirds();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a == b || vals.own(a) >= vals.of(a, b) {
                    continue;
                }
                // Drop envy of a big bundle toward a singleton that is already 2/3-matched.
                let dropped = kind != GraphKind::Plain
                    && x.len(a) > 1
                    && x.len(b) == 1
                    && *vals.own(a) >= vals.of(a, b).scale(&two_thirds);
                if !dropped {
                    edges.push((a, b, EdgeLabel::Envy));
                }
            }
        }
        let mut g = EnvyGraph::from_edges(n, kind, edges);
        if kind == GraphKind::Enhanced {
            let mut red = Vec::new();
            for s in g.sources() {
                if x.len(s) <= 1 {
                    continue;
                }
                for a in 0..n {
                    if a != s && x.len(a) == 1 && *vals.of(a, s) >= vals.own(a).scale(&two_thirds) {
                        red.push((a, s, EdgeLabel::Red));
                    }
                }
            }
            let mut all = g.edges();
            all.extend(red);
            g = EnvyGraph::from_edges(n, kind, all);
        }
        g
    }

    pub fn from_edges(n: usize, kind: GraphKind, edges: impl IntoIterator<Item = (Agent, Agent, EdgeLabel)>) -> Self {
        let mut out = vec![Vec::new(); n];
        let mut indeg = vec![0; n];
        let uniq: BTreeSet<(Agent, Agent, EdgeLabel)> = edges.into_iter().collect();
        for (a, b, l) in uniq {
            out[a].push((b, l));
            indeg[b] += 1;
        }
        for row in &mut out {
            row.sort();
        }
        EnvyGraph { kind, out, indeg }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn num_nodes(&self) -> usize {
        self.out.len()
    }

    pub fn edges(&self) -> Vec<(Agent, Agent, EdgeLabel)> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.iter().map(move |&(b, l)| (a, b, l)))
            .collect()
    }

    pub fn label(&self, a: Agent, b: Agent) -> Option<EdgeLabel> {
        self.out[a].iter().find(|(c, _)| *c == b).map(|(_, l)| *l)
    }

    pub fn has_edge(&self, a: Agent, b: Agent) -> bool {
        self.label(a, b).is_some()
    }

    pub fn successors(&self, a: Agent) -> impl Iterator<Item = Agent> + '_ {
        self.out[a].iter().map(|(b, _)| *b)
    }

    pub fn in_degree(&self, a: Agent) -> usize {
        self.indeg[a]
    }

    pub fn is_source(&self, a: Agent) -> bool {
        self.indeg[a] == 0
    }

    pub fn sources(&self) -> Vec<Agent> {
        (0..self.num_nodes()).filter(|&a| self.is_source(a)).collect()
    }

    /// First cycle met by a DFS from nodes in ascending order.
    pub fn find_cycle(&self) -> Option<Vec<Agent>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let n = self.num_nodes();
        let mut mark = vec![Mark::New; n];
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // (node, next successor position)
            let mut stack: Vec<(Agent, usize)> = vec![(root, 0)];
            mark[root] = Mark::Open;
            while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
                if let Some(&(w, _)) = self.out[v].get(*pos) {
                    *pos += 1;
                    match mark[w] {
                        Mark::New => {
                            mark[w] = Mark::Open;
                            stack.push((w, 0));
                        }
                        Mark::Open => {
                            let start = stack.iter().position(|(u, _)| *u == w).expect("open node on stack");
                            return Some(stack[start..].iter().map(|(u, _)| *u).collect());
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[v] = Mark::Done;
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn is_acyclic(&self) -> bool {
        self.find_cycle().is_none()
    }

    /// Shortest path by BFS; ties go to lower indices.
    pub fn find_path(&self, from: Agent, to: Agent) -> Option<Vec<Agent>> {
        self.find_path_within(from, to, |_| true)
    }

    pub fn find_path_within(&self, from: Agent, to: Agent, allowed: impl Fn(Agent) -> bool) -> Option<Vec<Agent>> {
        if !allowed(from) || !allowed(to) {
            return None;
        }
        let n = self.num_nodes();
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for w in self.successors(v) {
                if !seen[w] && allowed(w) {
                    seen[w] = true;
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Nodes reachable from `from`, including itself, in BFS order.
    pub fn reachable(&self, from: Agent) -> Vec<Agent> {
        let mut seen = vec![false; self.num_nodes()];
        let mut order = vec![from];
        seen[from] = true;
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            i += 1;
            for w in self.successors(v) {
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                }
            }
        }
        order
    }

    pub fn is_path(&self, pi: &[Agent]) -> bool {
        let distinct: BTreeSet<_> = pi.iter().collect();
        !pi.is_empty()
            && distinct.len() == pi.len()
            && pi.iter().all(|&a| a < self.num_nodes())
            && pi.windows(2).all(|w| self.has_edge(w[0], w[1]))
    }

    pub fn is_cycle(&self, c: &[Agent]) -> bool {
        self.is_path(c) && self.has_edge(c[c.len() - 1], c[0])
    }

    /// Graphviz rendering with nodes named `t:j`.
    pub fn to_dot(&self, inst: &Instance) -> String {
        let mut s = String::from("digraph envy {\n");
        for a in 0..self.num_nodes() {
            let _ = writeln!(s, "  \"{}\";", inst.agent_id(a));
        }
        for (a, b, l) in self.edges() {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [label={}];",
                inst.agent_id(a),
                inst.agent_id(b),
                l.as_str()
            );
        }
        s.push_str("}\n");
        s
    }
}

/// A path from `from` to `to` through leading agents only.
pub fn leading_path(inst: &Instance, x: &Allocation, g: &EnvyGraph, from: Agent, to: Agent) -> Result<Vec<Agent>> {
    let leaders = leading_agents(inst, x)?;
    let mut allowed = vec![false; inst.num_agents()];
    for &l in &leaders {
        allowed[l] = true;
    }
    if !allowed[from] || !allowed[to] {
        return Err(Error::contract("leading path endpoints must be leading agents"));
    }
    g.find_path_within(from, to, |a| allowed[a])
        .ok_or_else(|| Error::invariant(format!("no leading path from {from} to {to}")))
}
