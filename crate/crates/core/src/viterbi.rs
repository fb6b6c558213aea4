//! Add-compare-select over a [`TrellisCode`] with full-block traceback.
//!
//! Path metrics are accumulated left to right, so the winning metric is the
//! exact left-to-right sum of its branch metrics. Exact ties are resolved in
//! favour of the lexicographically smaller edge-index sequence: survivors are
//! kept in a total order (`rank`) that is refreshed every step from the
//! parent's rank and the extending edge index.

use crate::trellis::{TrellisCode, TrellisPath};

pub(crate) struct Survivor {
    pub path: TrellisPath,
    pub metric: f64,
}

/// Runs the search from state 0 over `n` steps.
///
/// `label_metrics(step, out)` fills the branch metric for every label at
/// `step`; `allowed(step, state)` lists the edge indices that may leave
/// `state` at `step`.
pub(crate) fn search<'a, M, A>(
    trellis: &TrellisCode,
    n: usize,
    mut label_metrics: M,
    mut allowed: A,
) -> Survivor
where
    M: FnMut(usize, &mut [f64]),
    A: FnMut(usize, usize) -> &'a [usize],
{
    let states = trellis.num_states();
    let mut metric = vec![f64::INFINITY; states];
    let mut next_metric = vec![f64::INFINITY; states];
    metric[0] = 0.0;
    // Strict total order of the survivors; smaller is lexicographically first.
    let mut rank: Vec<u32> = (0..states as u32).collect();
    let mut key = vec![(u32::MAX, u32::MAX); states];
    let mut order: Vec<usize> = (0..states).collect();
    let mut from_state = vec![0u8; n * states];
    let mut from_edge = vec![0u8; n * states];
    let mut bm = vec![0.0; trellis.constellation().size()];

    for step in 0..n {
        label_metrics(step, &mut bm);
        next_metric.fill(f64::INFINITY);
        key.fill((u32::MAX, u32::MAX));
        let row = step * states;
        for state in 0..states {
            let pm = metric[state];
            if pm == f64::INFINITY {
                continue;
            }
            let out = trellis.edges_from(state);
            for &e in allowed(step, state) {
                let edge = out[e];
                let cand = pm + bm[edge.label];
                let next = edge.next_state;
                let cand_key = (rank[state], e as u32);
                if cand < next_metric[next] || (cand == next_metric[next] && cand_key < key[next]) {
                    next_metric[next] = cand;
                    key[next] = cand_key;
                    from_state[row + next] = state as u8;
                    from_edge[row + next] = e as u8;
                }
            }
        }
        std::mem::swap(&mut metric, &mut next_metric);
        order.sort_unstable_by_key(|&s| key[s]);
        for (r, &s) in order.iter().enumerate() {
            rank[s] = r as u32;
        }
    }

    let end = (0..states)
        .filter(|&s| metric[s] < f64::INFINITY)
        .min_by(|&a, &b| metric[a].total_cmp(&metric[b]).then(rank[a].cmp(&rank[b])))
        .expect("some state is reachable");
    let mut states_path = vec![0; n + 1];
    let mut edges = vec![0; n];
    let mut labels = vec![0; n];
    let mut s = end;
    states_path[n] = s;
    for step in (0..n).rev() {
        let prev = from_state[step * states + s] as usize;
        let e = from_edge[step * states + s] as usize;
        edges[step] = e;
        labels[step] = trellis.edge(prev, e).label;
        states_path[step] = prev;
        s = prev;
    }
    Survivor {
        path: TrellisPath {
            states: states_path,
            edges,
            labels,
        },
        metric: metric[end],
    }
}
