//! Successive-shortest-path min-cost flow for balanced transportation
//! problems with real masses. Dijkstra runs from one unsaturated source at a
//! time on reduced costs and stops at the first unsaturated sink; potentials
//! are updated lazily with a global shift.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Arc {
    head: u32,
    cost: f64,
}

pub(crate) struct Network {
    ns: usize,
    nt: usize,
    /// CSR over sources.
    start: Vec<usize>,
    arcs: Vec<Arc>,
    /// CSR over sinks listing incoming arc ids.
    in_start: Vec<usize>,
    in_arcs: Vec<u32>,
    tails: Vec<u32>,
}

impl Network {
    /// `adj[i]` lists `(j, cost)` for the arcs out of source `i`.
    pub(crate) fn new(nt: usize, adj: &[Vec<(usize, f64)>]) -> Network {
        let ns = adj.len();
        let mut start = Vec::with_capacity(ns + 1);
        let mut arcs = Vec::new();
        let mut tails = Vec::new();
        start.push(0);
        for (i, row) in adj.iter().enumerate() {
            for &(j, c) in row {
                arcs.push(Arc {
                    head: j as u32,
                    cost: c,
                });
                tails.push(i as u32);
            }
            start.push(arcs.len());
        }
        let mut count = vec![0usize; nt + 1];
        for a in &arcs {
            count[a.head as usize + 1] += 1;
        }
        for j in 0..nt {
            count[j + 1] += count[j];
        }
        let in_start = count.clone();
        let mut fill = count;
        let mut in_arcs = vec![0u32; arcs.len()];
        for (e, a) in arcs.iter().enumerate() {
            let j = a.head as usize;
            in_arcs[fill[j]] = e as u32;
            fill[j] += 1;
        }
        Network {
            ns,
            nt,
            start,
            arcs,
            in_start,
            in_arcs,
            tails,
        }
    }

    pub(crate) fn n_arcs(&self) -> usize {
        self.arcs.len()
    }
}

pub(crate) struct FlowSolution {
    /// `(source, sink, mass, cost)` for arcs carrying flow.
    pub(crate) flows: Vec<(usize, usize, f64, f64)>,
    /// `π` with `c_ij + π_i − π_j ≥ 0` on every arc, equality on flow arcs.
    pub(crate) pi_src: Vec<f64>,
    pub(crate) pi_dst: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, u32);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Returns `None` when some supply cannot reach any unsaturated sink.
pub(crate) fn solve(
    net: &Network,
    supply: &[f64],
    demand: &[f64],
    tol: f64,
) -> Option<FlowSolution> {
    let (ns, nt) = (net.ns, net.nt);
    let nn = ns + nt;
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![0.0f64; net.arcs.len()];
    let mut pi = vec![0.0f64; nn];
    let mut shift = 0.0f64;
    let mut dist = vec![f64::INFINITY; nn];
    let mut done = vec![false; nn];
    // predecessor arc id, with the sign telling forward (+1) or reverse (-1)
    let mut pred: Vec<(u32, i8)> = vec![(0, 0); nn];
    let mut touched: Vec<usize> = Vec::new();
    let mut settled: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut remaining: f64 = dem.iter().sum();

    for s in 0..ns {
        while sup[s] > tol && remaining > tol {
            for &v in &touched {
                dist[v] = f64::INFINITY;
                done[v] = false;
            }
            touched.clear();
            settled.clear();
            heap.clear();
            dist[s] = 0.0;
            touched.push(s);
            heap.push(Item(0.0, s as u32));
            let mut target = None;
            while let Some(Item(d, u)) = heap.pop() {
                let u = u as usize;
                if done[u] || d > dist[u] {
                    continue;
                }
                done[u] = true;
                settled.push(u);
                if u >= ns {
                    let j = u - ns;
                    if dem[j] > tol {
                        target = Some(u);
                        break;
                    }
                    for k in net.in_start[j]..net.in_start[j + 1] {
                        let e = net.in_arcs[k] as usize;
                        if flow[e] <= 0.0 {
                            continue;
                        }
                        let i = net.tails[e] as usize;
                        if done[i] {
                            continue;
                        }
                        let rc = (-net.arcs[e].cost + pi[u] - pi[i]).max(0.0);
                        let nd = d + rc;
                        if nd < dist[i] {
                            if dist[i].is_infinite() {
                                touched.push(i);
                            }
                            dist[i] = nd;
                            pred[i] = (e as u32, -1);
                            heap.push(Item(nd, i as u32));
                        }
                    }
                } else {
                    for e in net.start[u]..net.start[u + 1] {
                        let v = ns + net.arcs[e].head as usize;
                        if done[v] {
                            continue;
                        }
                        let rc = (net.arcs[e].cost + pi[u] - pi[v]).max(0.0);
                        let nd = d + rc;
                        if nd < dist[v] {
                            if dist[v].is_infinite() {
                                touched.push(v);
                            }
                            dist[v] = nd;
                            pred[v] = (e as u32, 1);
                            heap.push(Item(nd, v as u32));
                        }
                    }
                }
            }
            let Some(t) = target else {
                // round-off residuals spread over many sinks can keep the
                // running total above `tol` after every sink is exhausted
                if dem.iter().all(|&x| x <= tol) {
                    remaining = 0.0;
                    break;
                }
                return None;
            };
            let big_d = dist[t];
            for &v in &settled {
                pi[v] += dist[v] - big_d;
            }
            shift += big_d;
            // bottleneck
            let mut delta = sup[s].min(dem[t - ns]);
            let mut v = t;
            while v != s {
                let (e, dir) = pred[v];
                let e = e as usize;
                if dir < 0 {
                    delta = delta.min(flow[e]);
                    v = ns + net.arcs[e].head as usize;
                } else {
                    v = net.tails[e] as usize;
                }
            }
            let mut v = t;
            while v != s {
                let (e, dir) = pred[v];
                let e = e as usize;
                if dir < 0 {
                    flow[e] -= delta;
                    if flow[e] <= tol * 1e-3 {
                        flow[e] = 0.0;
                    }
                    v = ns + net.arcs[e].head as usize;
                } else {
                    flow[e] += delta;
                    v = net.tails[e] as usize;
                }
            }
            sup[s] -= delta;
            dem[t - ns] -= delta;
            remaining -= delta;
        }
    }
    let flows = flow
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0.0)
        .map(|(e, &f)| {
            (
                net.tails[e] as usize,
                net.arcs[e].head as usize,
                f,
                net.arcs[e].cost,
            )
        })
        .collect();
    let pi_src = pi[..ns].iter().map(|p| p + shift).collect();
    let pi_dst = pi[ns..].iter().map(|p| p + shift).collect();
    Some(FlowSolution {
        flows,
        pi_src,
        pi_dst,
    })
}
