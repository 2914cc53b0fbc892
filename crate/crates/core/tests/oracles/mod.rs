//! Brute-force reference implementations used to check the library.
//! Deliberately written in a different shape from the production code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use crossroads::bundle::HeadPoseRecord;
use crossroads::headscan::{HeadScan, ScanParams};
use crossroads::signal::{Peak, PeakParams};
use crossroads::types::Side;

/// Maximal runs of equal values as `(first, last)`.
fn constant_runs(x: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut a = 0;
    for b in 1..=x.len() {
        if b == x.len() || x[b] != x[a] {
            runs.push((a, b - 1));
            a = b;
        }
    }
    runs
}

fn slice_min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Every local maximum measured from scratch, then filtered and thinned.
pub fn brute_peaks(x: &[f64], params: &PeakParams) -> Vec<Peak> {
    let n = x.len();
    let mut found = Vec::new();
    for (a, b) in constant_runs(x) {
        if a == 0 || b + 1 >= n || !(x[a - 1] < x[a] && x[b + 1] < x[a]) {
            continue;
        }
        let i = (a + b) / 2;
        let h = x[i];
        // nearest strictly higher sample on each side bounds the search
        let l = (0..i).rev().find(|&j| x[j] > h).map_or(0, |j| j + 1);
        let r = (i + 1..n).find(|&j| x[j] > h).map_or(n - 1, |j| j - 1);
        let lmin = slice_min(&x[l..=i]);
        let rmin = slice_min(&x[i..=r]);
        let prominence = h - lmin.max(rmin);
        let lbase = (l..=i).rev().find(|&j| x[j] == lmin).unwrap();
        let rbase = (i..=r).find(|&j| x[j] == rmin).unwrap();

        let first_at_or_below = |level: f64| {
            let left = (lbase..=i).rev().find(|&j| x[j] <= level).unwrap_or(lbase);
            let right = (i..=rbase).find(|&j| x[j] <= level).unwrap_or(rbase);
            (left, right)
        };
        let half = h - prominence / 2.0;
        let (li, ri) = first_at_or_below(half);
        let lip = if x[li] < half { li as f64 + (half - x[li]) / (x[li + 1] - x[li]) } else { li as f64 };
        let rip = if x[ri] < half { ri as f64 - (half - x[ri]) / (x[ri - 1] - x[ri]) } else { ri as f64 };
        found.push(Peak { index: i, height: h, prominence, width: rip - lip, extent: first_at_or_below(h - prominence) });
    }
    let eligible: Vec<Peak> = found
        .into_iter()
        .filter(|p| {
            p.height >= params.min_height
                && p.prominence >= params.min_prominence
                && p.width >= params.min_width
                && params.max_width.map_or(true, |w| p.width <= w)
        })
        .collect();
    if params.min_spacing <= 1 {
        return eligible;
    }
    // repeatedly take the highest remaining peak (earliest on ties) and drop
    // everything too close to it
    let mut remaining = eligible;
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let best = (0..remaining.len())
            .max_by(|&a, &b| {
                remaining[a].height.total_cmp(&remaining[b].height).then(remaining[b].index.cmp(&remaining[a].index))
            })
            .unwrap();
        let p = remaining.remove(best);
        remaining.retain(|q| q.index.abs_diff(p.index) >= params.min_spacing);
        kept.push(p);
    }
    kept.sort_by_key(|p| p.index);
    kept
}

/// Episodes found by labelling every record and grouping equal labels over
/// consecutive frame indices.
pub fn brute_scans(pose: &[HeadPoseRecord], params: &ScanParams) -> Vec<HeadScan> {
    let label = |p: &HeadPoseRecord| -> i8 {
        if p.valid && p.yaw.abs() > params.threshold {
            if p.yaw > 0.0 {
                1
            } else {
                -1
            }
        } else {
            0
        }
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in pose.iter().enumerate() {
        let l = label(p);
        if l == 0 {
            continue;
        }
        let joins = i > 0 && label(&pose[i - 1]) == l && pose[i - 1].frame_idx + 1 == p.frame_idx;
        if joins {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
        }
    }
    groups
        .into_iter()
        .filter(|g| pose[*g.last().unwrap()].frame_idx - pose[g[0]].frame_idx + 1 >= params.min_frames)
        .map(|g| {
            let best = g.iter().copied().fold(g[0], |b, i| if pose[i].yaw.abs() > pose[b].yaw.abs() { i } else { b });
            HeadScan {
                direction: if pose[g[0]].yaw > 0.0 { Side::Left } else { Side::Right },
                start_frame: pose[g[0]].frame_idx,
                end_frame: pose[*g.last().unwrap()].frame_idx,
                peak_frame: pose[best].frame_idx,
                magnitude: pose[best].yaw.abs(),
            }
        })
        .collect()
}

/// Quantile by sorting and interpolating between the two closest ranks.
pub fn sorted_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() as f64 - 1.0);
    let below = pos.floor();
    let lo = v[below as usize];
    let hi = v[pos.ceil() as usize];
    lo + (hi - lo) * (pos - below)
}

pub fn root_mean_square(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Dice of two inclusive frame ranges by counting shared frames.
pub fn frame_set_dice(a: (usize, usize), b: (usize, usize)) -> f64 {
    let sa: BTreeSet<usize> = (a.0..=a.1).collect();
    let sb: BTreeSet<usize> = (b.0..=b.1).collect();
    2.0 * sa.intersection(&sb).count() as f64 / (sa.len() + sb.len()) as f64
}
