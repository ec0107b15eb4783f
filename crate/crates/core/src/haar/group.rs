use crate::imaging::Rect;

pub const DEFAULT_GROUP_EPS: f64 = 0.2;

fn similar(a: &Rect, b: &Rect, eps: f64) -> bool {
    let ratio_ok = |p: u32, q: u32| p.max(q) as f64 <= (1.0 + eps) * p.min(q) as f64;
    let dx = (a.x as f64 - b.x as f64).abs();
    let dy = (a.y as f64 - b.y as f64).abs();
    dx <= eps * 0.5 * (a.w + b.w) as f64
        && dy <= eps * 0.5 * (a.h + b.h) as f64
        && ratio_ok(a.w, b.w)
        && ratio_ok(a.h, b.h)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the similarity relation, each listed by ascending
/// member index, ordered by their first member.
pub fn group_clusters(raw: &[Rect], eps: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..raw.len()).collect();
    for i in 0..raw.len() {
        for j in i + 1..raw.len() {
            if similar(&raw[i], &raw[j], eps) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; raw.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..raw.len() {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[root]].push(i);
    }
    clusters
}

/// Merges overlapping detections: clusters with fewer than
/// `max(1, min_neighbors)` members are dropped, the rest are replaced by their
/// component-wise rounded mean.
pub fn group_rectangles(raw: &[Rect], min_neighbors: usize, eps: f64) -> Vec<Rect> {
    let support = min_neighbors.max(1);
    group_clusters(raw, eps)
        .into_iter()
        .filter(|c| c.len() >= support)
        .map(|c| {
            let n = c.len() as f64;
            let mean = |f: fn(&Rect) -> u32| (c.iter().map(|&i| f(&raw[i]) as f64).sum::<f64>() / n).round() as u32;
            Rect::new(mean(|r| r.x), mean(|r| r.y), mean(|r| r.w).max(1), mean(|r| r.h).max(1))
        })
        .collect()
}
