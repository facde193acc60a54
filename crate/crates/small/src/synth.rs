//! Seeded synthetic datasets.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use small_core::dnf::{DnfFormula, Literal};
use small_core::{Dataset, Label, Matrix};

/// Examples labelled by a hidden formula.
#[derive(Debug, Clone)]
pub struct Planted {
    pub data: Dataset,
    pub formula: DnfFormula,
}

/// Random strict DNF with `terms` terms of `k` distinct literals over `n` variables.
pub fn random_dnf(rng: &mut impl Rng, n: usize, terms: usize, k: usize) -> DnfFormula {
    let terms = (0..terms)
        .map(|_| {
            let mut vars = sample(rng, n, k).into_vec();
            vars.sort_unstable();
            vars.into_iter()
                .map(|var| Literal { var, positive: rng.gen() })
                .collect()
        })
        .collect();
    DnfFormula::new(terms, n).expect("distinct in-range variables")
}

/// Uniform `{-1, +1}^n` inputs labelled by a random `terms`-term `k`-DNF,
/// each label flipped independently with probability `noise`.
pub fn planted_dnf(n: usize, m: usize, terms: usize, k: usize, noise: f64, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let formula = random_dnf(&mut rng, n, terms, k);
    let mut values = Vec::with_capacity(m * n);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let x: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let truth = formula.evaluate(&x).expect("valid assignment");
        let flip = rng.gen_bool(noise);
        labels.push(if truth != flip { Label::Positive } else { Label::Negative });
        values.extend(x);
    }
    let features = Matrix::from_vec(m, n, values).expect("sized above");
    let names = formula.names().to_vec();
    let data = Dataset::new(features, labels, names, "planted-dnf").expect("finite, labelled");
    Planted { data, formula }
}

/// The standard planted instance: 2-term 3-DNF over 20 variables, 500 rows, 10% noise.
pub fn planted_default(seed: u64) -> Planted {
    planted_dnf(20, 500, 2, 3, 0.1, seed)
}

/// Small Gaussian instance (m = 60, n = 10) whose positives satisfy one of
/// two sparse linear rules.
pub fn desk_instance(seed: u64) -> Dataset {
    let (m, n) = (60, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(m * n);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let positive = x[0] + x[1] - x[2] > 1.0 || x[3] - x[4] + x[5] > 1.0;
        labels.push(if positive { Label::Positive } else { Label::Negative });
        values.extend(x);
    }
    let features = Matrix::from_vec(m, n, values).expect("sized above");
    let names = (0..n).map(|j| format!("x{j}")).collect();
    Dataset::new(features, labels, names, "desk").expect("finite, labelled")
}

/// Two positive clusters at `(-2, 2)` and `(2, 2)` around one negative
/// cluster at `(0, -1)`; 2-D data no single halfspace separates well.
pub fn two_blobs(per_cluster: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.7).expect("positive sd");
    let centers = [((-2.0, 2.0), Label::Positive), ((2.0, 2.0), Label::Positive), ((0.0, -1.0), Label::Negative)];
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for ((cx, cy), label) in centers {
        for _ in 0..per_cluster {
            values.push(cx + noise.sample(&mut rng));
            values.push(cy + noise.sample(&mut rng));
            labels.push(label);
        }
    }
    let features = Matrix::from_vec(labels.len(), 2, values).expect("sized above");
    Dataset::new(features, labels, vec!["x".into(), "y".into()], "two-blobs").expect("finite, labelled")
}

/// Writes a dataset as CSV with a trailing `label` column in `{-1, 1}`.
pub fn to_csv(d: &Dataset) -> String {
    let mut out = d.feature_names().join(",");
    out.push_str(",label\n");
    for i in 0..d.n_examples() {
        for v in d.x(i) {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(if d.y(i) > 0.0 { "1\n" } else { "-1\n" });
    }
    out
}
