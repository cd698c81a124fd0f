//! Boykov-Kolmogorov augmenting-path max-flow.
//!
//! Two search trees grow from the terminals until they touch; the path is
//! augmented, and the nodes cut off by saturated edges are re-adopted or
//! freed. Terminal edges are stored per node as a single residual value
//! (`tr_cap > 0`: towards the source, `< 0`: towards the sink).

use std::collections::VecDeque;

const NONE: usize = usize::MAX;
const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;
const INFINITE_D: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    first: usize,
    /// Arc towards the parent, or NONE (free) / TERMINAL / ORPHAN.
    parent: usize,
    ts: u64,
    dist: u32,
    is_sink: bool,
    active: bool,
    tr_cap: f64,
}

#[derive(Clone, Debug)]
struct Arc {
    head: usize,
    next: usize,
    r_cap: f64,
}

#[inline]
fn sister(a: usize) -> usize {
    a ^ 1
}

#[derive(Clone, Debug)]
pub struct FlowGraph {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
    time: u64,
    active: VecDeque<usize>,
    orphans: VecDeque<usize>,
}

impl FlowGraph {
    pub fn new(node_count: usize) -> Self {
        Self::with_capacity(node_count, 0)
    }

    pub fn with_capacity(node_count: usize, edge_hint: usize) -> Self {
        let nodes = vec![
            Node {
                first: NONE,
                parent: NONE,
                ts: 0,
                dist: 0,
                is_sink: false,
                active: false,
                tr_cap: 0.0,
            };
            node_count
        ];
        Self {
            nodes,
            arcs: Vec::with_capacity(edge_hint * 2),
            flow: 0.0,
            time: 0,
            active: VecDeque::new(),
            orphans: VecDeque::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds terminal capacities source->i and i->sink.
    pub fn add_tweights(&mut self, i: usize, mut cap_source: f64, mut cap_sink: f64) {
        let delta = self.nodes[i].tr_cap;
        if delta > 0.0 {
            cap_source += delta;
        } else {
            cap_sink -= delta;
        }
        self.flow += cap_source.min(cap_sink);
        self.nodes[i].tr_cap = cap_source - cap_sink;
    }

    /// Adds arcs i->j with `cap` and j->i with `rev_cap`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        debug_assert!(i != j);
        let a = self.arcs.len();
        self.arcs.push(Arc {
            head: j,
            next: self.nodes[i].first,
            r_cap: cap,
        });
        self.arcs.push(Arc {
            head: i,
            next: self.nodes[j].first,
            r_cap: rev_cap,
        });
        self.nodes[i].first = a;
        self.nodes[j].first = a + 1;
    }

    /// Whether node `i` ends on the source side of the minimum cut.
    /// Nodes not reachable from the source in the residual graph are on the
    /// sink side.
    pub fn is_source_side(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        n.parent != NONE && !n.is_sink
    }

    pub fn flow(&self) -> f64 {
        self.flow
    }

    fn set_active(&mut self, i: usize) {
        if !self.nodes[i].active {
            self.nodes[i].active = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.active.pop_front() {
            self.nodes[i].active = false;
            if self.nodes[i].parent != NONE {
                return Some(i);
            }
        }
        None
    }

    fn arcs_of(&self, i: usize) -> ArcIter<'_> {
        ArcIter {
            arcs: &self.arcs,
            cur: self.nodes[i].first,
        }
    }

    /// Runs to completion and returns the max-flow value.
    pub fn maxflow(&mut self) -> f64 {
        self.active.clear();
        self.orphans.clear();
        for i in 0..self.nodes.len() {
            let node = &mut self.nodes[i];
            node.active = false;
            node.ts = 0;
            if node.tr_cap > 0.0 {
                node.is_sink = false;
                node.parent = TERMINAL;
                node.dist = 1;
                self.set_active(i);
            } else if node.tr_cap < 0.0 {
                node.is_sink = true;
                node.parent = TERMINAL;
                node.dist = 1;
                self.set_active(i);
            } else {
                node.parent = NONE;
            }
        }
        self.time = 0;

        let mut current: Option<usize> = None;
        loop {
            let i = match current.filter(|&i| self.nodes[i].parent != NONE) {
                Some(i) => i,
                None => match self.next_active() {
                    Some(i) => i,
                    None => break,
                },
            };
            let middle = self.grow(i);
            self.time += 1;
            if middle != NONE {
                current = Some(i);
                self.augment(middle);
                while let Some(o) = self.orphans.pop_front() {
                    if self.nodes[o].is_sink {
                        self.adopt_sink_orphan(o);
                    } else {
                        self.adopt_source_orphan(o);
                    }
                }
            } else {
                current = None;
            }
        }
        self.flow
    }

    /// Grows the tree containing `i`; returns a source->sink arc joining the
    /// trees, or NONE.
    fn grow(&mut self, i: usize) -> usize {
        let (ts_i, dist_i, sink_i) = {
            let n = &self.nodes[i];
            (n.ts, n.dist, n.is_sink)
        };
        let mut a = self.nodes[i].first;
        while a != NONE {
            let next = self.arcs[a].next;
            let residual = if sink_i {
                self.arcs[sister(a)].r_cap
            } else {
                self.arcs[a].r_cap
            };
            if residual > 0.0 {
                let j = self.arcs[a].head;
                if self.nodes[j].parent == NONE {
                    let nj = &mut self.nodes[j];
                    nj.is_sink = sink_i;
                    nj.parent = sister(a);
                    nj.ts = ts_i;
                    nj.dist = dist_i + 1;
                    self.set_active(j);
                } else if self.nodes[j].is_sink != sink_i {
                    return if sink_i { sister(a) } else { a };
                } else if self.nodes[j].ts <= ts_i && self.nodes[j].dist > dist_i {
                    let nj = &mut self.nodes[j];
                    nj.parent = sister(a);
                    nj.ts = ts_i;
                    nj.dist = dist_i + 1;
                }
            }
            a = next;
        }
        NONE
    }

    fn augment(&mut self, middle: usize) {
        let mut bottleneck = self.arcs[middle].r_cap;
        let mut i = self.arcs[sister(middle)].head;
        loop {
            let b = self.nodes[i].parent;
            if b == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[sister(b)].r_cap);
            i = self.arcs[b].head;
        }
        bottleneck = bottleneck.min(self.nodes[i].tr_cap);
        let mut i = self.arcs[middle].head;
        loop {
            let b = self.nodes[i].parent;
            if b == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[b].r_cap);
            i = self.arcs[b].head;
        }
        bottleneck = bottleneck.min(-self.nodes[i].tr_cap);

        self.arcs[sister(middle)].r_cap += bottleneck;
        self.arcs[middle].r_cap -= bottleneck;

        let mut i = self.arcs[sister(middle)].head;
        loop {
            let b = self.nodes[i].parent;
            if b == TERMINAL {
                break;
            }
            self.arcs[b].r_cap += bottleneck;
            self.arcs[sister(b)].r_cap -= bottleneck;
            if self.arcs[sister(b)].r_cap <= 0.0 {
                self.arcs[sister(b)].r_cap = 0.0;
                self.make_orphan_front(i);
            }
            i = self.arcs[b].head;
        }
        self.nodes[i].tr_cap -= bottleneck;
        if self.nodes[i].tr_cap <= 0.0 {
            self.nodes[i].tr_cap = 0.0;
            self.make_orphan_front(i);
        }

        let mut i = self.arcs[middle].head;
        loop {
            let b = self.nodes[i].parent;
            if b == TERMINAL {
                break;
            }
            self.arcs[sister(b)].r_cap += bottleneck;
            self.arcs[b].r_cap -= bottleneck;
            if self.arcs[b].r_cap <= 0.0 {
                self.arcs[b].r_cap = 0.0;
                self.make_orphan_front(i);
            }
            i = self.arcs[b].head;
        }
        self.nodes[i].tr_cap += bottleneck;
        if self.nodes[i].tr_cap >= 0.0 {
            self.nodes[i].tr_cap = 0.0;
            self.make_orphan_front(i);
        }

        self.flow += bottleneck;
    }

    fn make_orphan_front(&mut self, i: usize) {
        self.nodes[i].parent = ORPHAN;
        self.orphans.push_front(i);
    }

    fn make_orphan_back(&mut self, i: usize) {
        self.nodes[i].parent = ORPHAN;
        self.orphans.push_back(i);
    }

    /// Distance from `j` to its terminal through valid parents, marking the
    /// path with the current timestamp; `None` if the chain reaches an orphan.
    fn origin_distance(&mut self, start: usize) -> Option<u32> {
        let mut j = start;
        let mut d: u32 = 0;
        loop {
            if self.nodes[j].ts == self.time {
                d += self.nodes[j].dist;
                break;
            }
            let a = self.nodes[j].parent;
            d += 1;
            if a == TERMINAL {
                self.nodes[j].ts = self.time;
                self.nodes[j].dist = 1;
                break;
            }
            if a == ORPHAN || a == NONE {
                return None;
            }
            j = self.arcs[a].head;
        }
        let total = d;
        let mut j = start;
        let mut d = total;
        while self.nodes[j].ts != self.time {
            self.nodes[j].ts = self.time;
            self.nodes[j].dist = d;
            d -= 1;
            j = self.arcs[self.nodes[j].parent].head;
        }
        Some(total)
    }

    fn adopt_source_orphan(&mut self, i: usize) {
        self.adopt_orphan(i, false);
    }

    fn adopt_sink_orphan(&mut self, i: usize) {
        self.adopt_orphan(i, true);
    }

    fn adopt_orphan(&mut self, i: usize, sink: bool) {
        let mut best_arc = NONE;
        let mut best_d = INFINITE_D;
        let candidates: Vec<usize> = self.arcs_of(i).collect();
        for &a0 in &candidates {
            // residual capacity from the prospective parent towards i (source
            // tree) or from i towards the parent (sink tree)
            let residual = if sink {
                self.arcs[a0].r_cap
            } else {
                self.arcs[sister(a0)].r_cap
            };
            if residual <= 0.0 {
                continue;
            }
            let j = self.arcs[a0].head;
            let nj = &self.nodes[j];
            if nj.is_sink != sink || nj.parent == NONE {
                continue;
            }
            if let Some(d) = self.origin_distance(j) {
                if d < best_d {
                    best_d = d;
                    best_arc = a0;
                }
            }
        }
        if best_arc != NONE {
            let ni = &mut self.nodes[i];
            ni.parent = best_arc;
            ni.ts = self.time;
            ni.dist = best_d + 1;
            return;
        }
        for &a0 in &candidates {
            let j = self.arcs[a0].head;
            let (j_sink, j_parent) = (self.nodes[j].is_sink, self.nodes[j].parent);
            if j_sink != sink || j_parent == NONE {
                continue;
            }
            let residual = if sink {
                self.arcs[a0].r_cap
            } else {
                self.arcs[sister(a0)].r_cap
            };
            if residual > 0.0 {
                self.set_active(j);
            }
            if j_parent != TERMINAL && j_parent != ORPHAN && self.arcs[j_parent].head == i {
                self.make_orphan_back(j);
            }
        }
        self.nodes[i].parent = NONE;
    }
}

struct ArcIter<'a> {
    arcs: &'a [Arc],
    cur: usize,
}

impl Iterator for ArcIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.cur == NONE {
            return None;
        }
        let a = self.cur;
        self.cur = self.arcs[a].next;
        Some(a)
    }
}
