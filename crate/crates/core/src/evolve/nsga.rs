use rand::seq::SliceRandom;
use rand::Rng;

use crate::evolve::Individual;

/// True if `p` is at least as good as `q` in both objectives and strictly
/// better in one. Both objectives are maximized.
pub fn dominates(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 >= q.0 && p.1 >= q.1 && (p.0 > q.0 || p.1 > q.1)
}

/// Front index of every point (0 = non-dominated).
pub fn fast_nondominated_sort(points: &[(f64, f64)]) -> Vec<usize> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(points[i], points[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates(points[j], points[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    let mut level = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = level;
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        level += 1;
    }
    rank
}

/// Indices of the non-dominated points, in input order. Sorts once instead
/// of comparing all pairs, so it scales to whole archives.
pub fn nondominated_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].0.total_cmp(&points[a].0));
    let mut keep = Vec::new();
    // Largest f2 among points with strictly greater f1 than the group.
    let mut best_above = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let f1 = points[order[start]].0;
        let mut end = start;
        while end < order.len() && points[order[end]].0 == f1 {
            end += 1;
        }
        let group = &order[start..end];
        let top = group.iter().map(|&i| points[i].1).fold(f64::NEG_INFINITY, f64::max);
        if top > best_above {
            keep.extend(group.iter().copied().filter(|&i| points[i].1 == top));
        }
        best_above = best_above.max(top);
        start = end;
    }
    keep.sort_unstable();
    keep
}

/// Crowding distance within one front. Points are ordered per objective by
/// value, ties by input position; the first and last get infinity.
pub fn crowding_distance(front: &[(f64, f64)]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let objectives: [fn(&(f64, f64)) -> f64; 2] = [|p| p.0, |p| p.1];
    for get in objectives {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| get(&front[a]).total_cmp(&get(&front[b])).then(a.cmp(&b)));
        let lo = get(&front[order[0]]);
        let hi = get(&front[order[n - 1]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let gap = get(&front[w[2]]) - get(&front[w[0]]);
            dist[w[1]] += gap / range;
        }
    }
    dist
}

/// Recomputes rank and crowding for a population.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let points: Vec<(f64, f64)> = pop.iter().map(Individual::objectives).collect();
    let ranks = fast_nondominated_sort(&points);
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    for r in 0..=max_rank {
        let members: Vec<usize> = (0..pop.len()).filter(|&i| ranks[i] == r).collect();
        let front: Vec<(f64, f64)> = members.iter().map(|&i| points[i]).collect();
        for (&i, d) in members.iter().zip(crowding_distance(&front)) {
            pop[i].rank = r;
            pop[i].crowding = d;
        }
    }
}

/// Binary tournaments: lower rank wins, then larger crowding, then a coin.
/// Returns `pop.len()` indices into `pop`.
pub fn tournament_select<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> Vec<usize> {
    assert!(!pop.is_empty(), "tournament over an empty population");
    (0..pop.len())
        .map(|_| {
            let a = rng.gen_range(0..pop.len());
            let b = rng.gen_range(0..pop.len());
            tournament_winner(&pop[a], &pop[b], a, b, rng)
        })
        .collect()
}

fn tournament_winner<R: Rng + ?Sized>(x: &Individual, y: &Individual, a: usize, b: usize, rng: &mut R) -> usize {
    if x.rank != y.rank {
        return if x.rank < y.rank { a } else { b };
    }
    if x.crowding != y.crowding {
        return if x.crowding > y.crowding { a } else { b };
    }
    if rng.gen_bool(0.5) {
        a
    } else {
        b
    }
}

/// Keeps `size` individuals: whole fronts in rank order, then the splitting
/// front by descending crowding (ties in random order). Rank and crowding
/// are recomputed on the survivors.
pub fn environmental_selection<R: Rng + ?Sized>(
    mut union: Vec<Individual>,
    size: usize,
    rng: &mut R,
) -> Vec<Individual> {
    assert!(union.len() >= size, "union smaller than the target size");
    assign_rank_and_crowding(&mut union);
    let max_rank = union.iter().map(|i| i.rank).max().unwrap_or(0);
    let mut keep: Vec<usize> = Vec::with_capacity(size);
    for r in 0..=max_rank {
        let mut front: Vec<usize> = (0..union.len()).filter(|&i| union[i].rank == r).collect();
        if keep.len() + front.len() <= size {
            keep.extend(front);
            if keep.len() == size {
                break;
            }
            continue;
        }
        front.shuffle(rng);
        front.sort_by(|&a, &b| union[b].crowding.total_cmp(&union[a].crowding));
        keep.extend(front.into_iter().take(size - keep.len()));
        break;
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = union.into_iter().map(Some).collect();
    let mut out: Vec<Individual> = keep.into_iter().map(|i| slots[i].take().expect("unique")).collect();
    assign_rank_and_crowding(&mut out);
    out
}
