//! Seeded instance generator following the benchmark recipe: random grid
//! locations, Manhattan transport costs, distance-decaying and normalized
//! decision-dependency coefficients, and i.i.d. demand supports.

use super::{CapacityForm, Instance, YIntegrality, INSTANCE_VERSION};
use crate::linalg::SymMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal, Normal};
use serde::{Deserialize, Serialize};

/// Demand distribution for the sampled supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// `Normal(μ̄_j, σ̄_j²)` truncated at zero by rejection.
    Normal,
    /// Log-normal with location `log μ̄_j` and shape `ρ̄·log μ̄_j`.
    LogNormal,
}

/// Transport cost recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `c_ij = Manhattan(i, j) / 4`.
    ManhattanOver4,
    /// Every `c_ij` equal to the given constant.
    Flat(f64),
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub rho_bar: f64,
    pub distribution: Distribution,
    pub cost_mode: CostMode,
    /// Per-stage budget `N`.
    pub budget: f64,
}

impl GenSpec {
    /// Parameters with the benchmark defaults for everything but the sizes.
    pub fn new(seed: u64, t: usize, i: usize, j: usize, k: usize) -> Self {
        Self {
            seed,
            t,
            i,
            j,
            k,
            rho_bar: 0.5,
            distribution: Distribution::Normal,
            cost_mode: CostMode::ManhattanOver4,
            budget: 100.0,
        }
    }
}

/// Distance-decay coefficients `e^{-d_ji/scale}` normalized so that each
/// customer's coefficients over facilities sum to one. `dist` is `J × I`.
pub fn decision_coefficients(dist: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    dist.iter()
        .map(|row| {
            let raw: Vec<f64> = row.iter().map(|d| (-d / scale).exp()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

fn manhattan(a: [i64; 2], b: [i64; 2]) -> f64 {
    ((a[0] - b[0]).abs() + (a[1] - b[1]).abs()) as f64
}

/// Generates an instance deterministically from `spec`.
///
/// Random draws happen in a fixed order: facility coordinates, customer
/// coordinates, `μ̄`, `λ^cov`, then the supports of stages `2..=T` row by
/// row. `Σ̄` is the sample covariance of all sampled support rows.
pub fn generate_instance(spec: &GenSpec) -> Instance {
    assert!(spec.t >= 1 && spec.i >= 1 && spec.j >= 1 && spec.k >= 1, "dimensions must be at least 1");
    assert!(spec.rho_bar > 0.0, "rho_bar must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (t, i, j, k) = (spec.t, spec.i, spec.j, spec.k);

    let facility_xy: Vec<[i64; 2]> = (0..i).map(|_| [rng.random_range(0..100), rng.random_range(0..100)]).collect();
    let customer_xy: Vec<[i64; 2]> = (0..j).map(|_| [rng.random_range(0..100), rng.random_range(0..100)]).collect();
    let dist_ij: Vec<Vec<f64>> = facility_xy.iter().map(|&a| customer_xy.iter().map(|&b| manhattan(a, b)).collect()).collect();
    let dist_ji: Vec<Vec<f64>> = (0..j).map(|jj| (0..i).map(|ii| dist_ij[ii][jj]).collect()).collect();

    let c = match spec.cost_mode {
        CostMode::ManhattanOver4 => dist_ij.iter().map(|r| r.iter().map(|d| d / 4.0).collect()).collect(),
        CostMode::Flat(c0) => vec![vec![c0; j]; i],
    };
    let mu_bar: Vec<f64> = (0..j).map(|_| rng.random_range(20.0..40.0)).collect();
    let sigma_bar: Vec<f64> = mu_bar.iter().map(|m| m * spec.rho_bar).collect();
    let raw_cov: Vec<f64> = (0..i).map(|_| rng.random_range(0.0..1.0)).collect();
    let cov_sum: f64 = raw_cov.iter().sum();
    let lambda_cov = raw_cov.iter().map(|v| v / cov_sum).collect();

    let mut support = vec![vec![mu_bar.clone()]];
    for _ in 1..t {
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..j).map(|jj| sample_demand(&mut rng, spec.distribution, mu_bar[jj], spec.rho_bar)).collect())
            .collect();
        support.push(rows);
    }
    let sigma_mat = sample_covariance(&support[1..], j);

    Instance {
        version: INSTANCE_VERSION.to_string(),
        t,
        i,
        j,
        k,
        facility_xy,
        customer_xy,
        c,
        f: vec![vec![100.0; i]; t],
        h: vec![vec![1000.0; i]; t],
        n_budget: spec.budget,
        r: vec![100.0; j],
        mu_bar,
        sigma_bar,
        rho_bar: spec.rho_bar,
        sigma_mat,
        support,
        lambda_mu: decision_coefficients(&dist_ji, 25.0),
        lambda_s: decision_coefficients(&dist_ji, 50.0),
        lambda_cov,
        eps_mu: vec![25.0; j],
        eps_s_lo: vec![0.1; j],
        eps_s_hi: vec![1.9; j],
        gamma: 10.0,
        eta_cov: 100.0,
        risk_lambda: vec![0.0; t],
        risk_alpha: vec![0.95; t],
        y_integrality: YIntegrality::Integer,
        capacity_form: CapacityForm::SingleIndicator,
    }
}

fn sample_demand(rng: &mut ChaCha8Rng, dist: Distribution, mu: f64, rho: f64) -> f64 {
    match dist {
        Distribution::Normal => {
            let nd = Normal::new(mu, mu * rho).expect("positive standard deviation");
            for _ in 0..1000 {
                let v = nd.sample(rng);
                if v >= 0.0 {
                    return v;
                }
            }
            0.0
        }
        Distribution::LogNormal => {
            let loc = mu.ln();
            LogNormal::new(loc, rho * loc).expect("positive shape").sample(rng)
        }
    }
}

/// Unbiased sample covariance of the pooled rows (zero matrix for a single
/// row).
pub(crate) fn sample_covariance(stages: &[Vec<Vec<f64>>], j: usize) -> SymMatrix {
    let rows: Vec<&Vec<f64>> = stages.iter().flatten().collect();
    let n = rows.len();
    let mut m = SymMatrix::zeros(j);
    if n < 2 {
        return m;
    }
    let mean: Vec<f64> = (0..j).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / n as f64).collect();
    for a in 0..j {
        for b in 0..=a {
            let s: f64 = rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum();
            m.set(a, b, s / (n - 1) as f64);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_facility_normalization() {
        let lam = decision_coefficients(&[vec![0.0, 25.0]], 25.0);
        assert!((lam[0][0] - 0.731).abs() < 5e-4);
        assert!((lam[0][1] - 0.269).abs() < 5e-4);
        let e = (-1f64).exp();
        assert!((lam[0][1] - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_valid() {
        let spec = GenSpec::new(7, 3, 4, 3, 10);
        let a = generate_instance(&spec);
        let b = generate_instance(&spec);
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        a.validate().unwrap();
        for row in &a.lambda_mu {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((a.lambda_cov.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let inst = generate_instance(&GenSpec { distribution: Distribution::LogNormal, ..GenSpec::new(3, 2, 2, 2, 5) });
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        assert!(inst.to_json().contains("\"version\": \"ddro-instance-v1\""));
    }
}
