use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Draws `u ~ U[0,1)` and reports `u < p`.
pub fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(rng.gen::<f64>() < p)
}

fn check_weights(weights: &[f64]) -> Result<usize> {
    let mut positive = 0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::domain(format!(
                "weight {w} is not a finite nonnegative number"
            )));
        }
        if w > 0.0 {
            positive += 1;
        }
    }
    Ok(positive)
}

/// Indices of `k` items drawn with probability proportional to `weights`.
///
/// With replacement each draw is independent. Without replacement the result
/// follows successive sampling (draw, remove, renormalise), implemented with
/// Efraimidis-Spirakis keys; indices come back in draw order.
pub fn weighted_sample<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    without_replacement: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let positive = check_weights(weights)?;
    if k == 0 {
        return Ok(Vec::new());
    }
    if positive == 0 {
        return Err(Error::domain("all weights are zero"));
    }
    if without_replacement {
        if k > weights.len() {
            return Err(Error::domain(format!(
                "cannot draw {k} items without replacement from {}",
                weights.len()
            )));
        }
        if k > positive {
            return Err(Error::domain(format!(
                "cannot draw {k} items without replacement: only {positive} have positive weight"
            )));
        }
        let mut keys: Vec<(f64, usize)> = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| {
                let u = 1.0 - rng.gen::<f64>();
                (u.ln() / w, i)
            })
            .collect();
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        return Ok(keys.into_iter().take(k).map(|(_, i)| i).collect());
    }

    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for &w in weights {
        total += w;
        cumulative.push(total);
    }
    let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap();
    Ok((0..k)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            cumulative.partition_point(|&c| c <= u).min(last_positive)
        })
        .collect())
}

/// Single weighted draw.
pub fn weighted_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    Ok(weighted_sample(weights, 1, false, rng)?[0])
}

/// `weighted_sample` over a slice of items.
pub fn weighted_choose<T: Clone, R: Rng + ?Sized>(
    items: &[T],
    weights: &[f64],
    k: usize,
    without_replacement: bool,
    rng: &mut R,
) -> Result<Vec<T>> {
    if items.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} items but {} weights",
            items.len(),
            weights.len()
        )));
    }
    Ok(weighted_sample(weights, k, without_replacement, rng)?
        .into_iter()
        .map(|i| items[i].clone())
        .collect())
}

/// Inclusion probabilities proportional to `sizes` that sum to `n`, with
/// any probability that would exceed one capped at one and the rest rescaled.
pub fn inclusion_probabilities(sizes: &[f64], n: usize) -> Result<Vec<f64>> {
    let positive = check_weights(sizes)?;
    if n > positive {
        return Err(Error::domain(format!(
            "cannot include {n} units with only {positive} positive sizes"
        )));
    }
    let mut pi = vec![0.0; sizes.len()];
    if n == 0 {
        return Ok(pi);
    }
    let mut capped = vec![false; sizes.len()];
    loop {
        let n_capped = capped.iter().filter(|&&c| c).count();
        let free: f64 = sizes
            .iter()
            .zip(&capped)
            .filter(|(_, &c)| !c)
            .map(|(s, _)| s)
            .sum();
        let scale = (n - n_capped) as f64 / free;
        let mut changed = false;
        for (i, &s) in sizes.iter().enumerate() {
            if !capped[i] && s * scale >= 1.0 {
                capped[i] = true;
                changed = true;
            }
        }
        if !changed {
            for (i, &s) in sizes.iter().enumerate() {
                pi[i] = if capped[i] { 1.0 } else { s * scale };
            }
            return Ok(pi);
        }
    }
}

/// Draws exactly `n` distinct indices, each included with probability
/// proportional to its size (see [`inclusion_probabilities`]).
///
/// Systematic sampling over a randomly permuted order: one uniform start
/// `u`, then the points `u, u + 1, ..., u + n - 1` laid over the cumulated
/// inclusion probabilities. Indices are returned in ascending order.
pub fn systematic_pps<R: Rng + ?Sized>(sizes: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let pi = inclusion_probabilities(sizes, n)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..sizes.len()).filter(|&i| pi[i] > 0.0).collect();
    order.shuffle(rng);
    let u: f64 = rng.gen();
    let mut chosen = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut next = u;
    for (pos, &i) in order.iter().enumerate() {
        cum += pi[i];
        let end = if pos + 1 == order.len() {
            n as f64
        } else {
            cum
        };
        if chosen.len() < n && next < end {
            chosen.push(i);
            next += 1.0;
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}
