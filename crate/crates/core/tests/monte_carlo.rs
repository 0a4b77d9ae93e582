//! Null-law and evidence checks by direct simulation.

use catenergy::dcov::{dcov_independence_test, vstat};
use catenergy::energy_gof::energy_gof_test;
use catenergy::simulate::{decaying_null, perturbed, sample_multinomial, sample_table};
use catenergy::{ProbabilityVector, RngStream};

const M: usize = 2000;

fn rate(p_values: &[f64], alpha: f64) -> f64 {
    p_values.iter().filter(|&&p| p <= alpha).count() as f64 / p_values.len() as f64
}

#[test]
fn dcov_size_at_n_500() {
    let model = decaying_null(4, 8).unwrap();
    let stream = RngStream::new(2024);
    let p: Vec<f64> = (0..M as u64)
        .map(|r| {
            let table = sample_table(&model, 500, &mut stream.substream(r)).unwrap();
            dcov_independence_test(&table).unwrap().p_value
        })
        .collect();
    let size = rate(&p, 0.05);
    assert!((0.04..=0.06).contains(&size), "size {size}");
}

#[test]
fn energy_size_on_a_trinomial() {
    let null = ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap();
    let stream = RngStream::new(77);
    let p: Vec<f64> = (0..M as u64)
        .map(|r| {
            let counts = sample_multinomial(null.probs(), 500, &mut stream.substream(r));
            energy_gof_test(&counts, &null).unwrap().p_value
        })
        .collect();
    let size = rate(&p, 0.05);
    assert!((0.04..=0.06).contains(&size), "size {size}");
}

#[test]
fn mean_statistic_grows_with_eps() {
    let reps = 400u64;
    let stream = RngStream::new(5);
    let mut previous: Option<(f64, f64)> = None;
    for (k, eps) in [0.0, 0.03, 0.06, 0.09, 0.12].into_iter().enumerate() {
        let model = perturbed(4, 8, eps).unwrap();
        let stats: Vec<f64> = (0..reps)
            .map(|r| {
                let table =
                    sample_table(&model, 100, &mut stream.substream(((k as u64) << 32) | r))
                        .unwrap();
                100.0 * vstat(&table)
            })
            .collect();
        let mean = stats.iter().sum::<f64>() / reps as f64;
        let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        if let Some((m0, se0)) = previous {
            assert!(
                mean >= m0 - 3.0 * (se * se + se0 * se0).sqrt(),
                "eps {eps}: {mean} < {m0}"
            );
        }
        previous = Some((mean, se));
    }
}
