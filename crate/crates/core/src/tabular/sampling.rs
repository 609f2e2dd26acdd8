use rand::Rng;

use super::{PolicyTable, TabularMdp};

/// One sampled episode as `(state, action)` index pairs.
pub type TabularEpisode = Vec<(usize, usize)>;

fn draw(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // round-off: fall back to the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Rolls out `pi` for `horizon` steps from a state drawn from `d`.
pub fn sample_episode(
    mdp: &TabularMdp,
    pi: &PolicyTable,
    horizon: usize,
    rng: &mut impl Rng,
) -> TabularEpisode {
    let mut s = draw(mdp.initial(), rng);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let a = draw(pi.row(s), rng);
        out.push((s, a));
        let succ = mdp.successors(s, a);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = succ.last().map_or(s, |&(t, _)| t);
        for &(t, p) in succ {
            acc += p;
            if u < acc {
                next = t;
                break;
            }
        }
        s = next;
    }
    out
}

/// Smallest horizon with `gamma^horizon <= eps`.
pub fn effective_horizon(gamma: f64, eps: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    ((eps.ln() / gamma.ln()).ceil() as usize).max(1)
}
