//! Level-set polylines on a rectangular grid by marching squares.

use std::collections::HashMap;

/// Values `z[j][i]` sampled at `(xs[i], ys[j])`.
#[derive(Clone, Debug)]
pub struct ScalarGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub z: Vec<Vec<f64>>,
}

impl ScalarGrid {
    /// `n × n` uniform samples of `f` on `[lo, hi]`.
    pub fn sample<F: Fn(f64, f64) -> f64 + Sync>(lo: [f64; 2], hi: [f64; 2], n: usize, f: F) -> Self {
        use rayon::prelude::*;
        let axis = |a: f64, b: f64| -> Vec<f64> {
            (0..n).map(|k| a + (b - a) * k as f64 / (n - 1).max(1) as f64).collect()
        };
        let xs = axis(lo[0], hi[0]);
        let ys = axis(lo[1], hi[1]);
        let z = ys.par_iter().map(|&y| xs.iter().map(|&x| f(x, y)).collect()).collect();
        ScalarGrid { xs, ys, z }
    }
}

/// Grid edge holding a crossing: horizontal `(i, j)`–`(i+1, j)` or vertical `(i, j)`–`(i, j+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Polylines of `{z = level}`; closed curves repeat their first point at the end.
pub fn marching_squares(g: &ScalarGrid, level: f64) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (g.xs.len(), g.ys.len());
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let above = |i: usize, j: usize| g.z[j][i] > level;
    let point = |e: Edge| -> (f64, f64) {
        let (i0, j0, i1, j1) = match e {
            Edge::H(i, j) => (i, j, i + 1, j),
            Edge::V(i, j) => (i, j, i, j + 1),
        };
        let (a, b) = (g.z[j0][i0], g.z[j1][i1]);
        let t = if a == b { 0.5 } else { ((level - a) / (b - a)).clamp(0.0, 1.0) };
        (g.xs[i0] + t * (g.xs[i1] - g.xs[i0]), g.ys[j0] + t * (g.ys[j1] - g.ys[j0]))
    };
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let bottom = Edge::H(i, j);
            let top = Edge::H(i, j + 1);
            let left = Edge::V(i, j);
            let right = Edge::V(i + 1, j);
            let case = (above(i, j) as u8) | (above(i + 1, j) as u8) << 1 | (above(i + 1, j + 1) as u8) << 2
                | (above(i, j + 1) as u8) << 3;
            let center_above =
                (g.z[j][i] + g.z[j][i + 1] + g.z[j + 1][i + 1] + g.z[j + 1][i]) / 4.0 > level;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if center_above {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if center_above {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain(&segments).into_iter().map(|c| c.into_iter().map(point).collect()).collect()
}

fn chain(segments: &[(Edge, Edge)]) -> Vec<Vec<Edge>> {
    let mut at: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        at.entry(*a).or_default().push(k);
        at.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut curves = Vec::new();
    let next = |e: Edge, used: &[bool], at: &HashMap<Edge, Vec<usize>>| at[&e].iter().copied().find(|&k| !used[k]);
    // Open curves start at edges touched once; the rest are loops.
    let mut starts: Vec<usize> = at.iter().filter(|(_, v)| v.len() == 1).map(|(_, v)| v[0]).collect();
    starts.sort_unstable();
    starts.extend(0..segments.len());
    for s in starts {
        if used[s] {
            continue;
        }
        used[s] = true;
        let (a, b) = segments[s];
        let (first, mut tail) = if at[&a].len() == 1 { (a, b) } else if at[&b].len() == 1 { (b, a) } else { (a, b) };
        let mut curve = vec![first, tail];
        while let Some(k) = next(tail, &used, &at) {
            used[k] = true;
            let (p, q) = segments[k];
            tail = if p == tail { q } else { p };
            curve.push(tail);
        }
        curves.push(curve);
    }
    curves
}
