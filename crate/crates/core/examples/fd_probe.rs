use hsbnn_core::data::*;
use hsbnn_core::models::*;
use hsbnn_core::relevance::*;
use hsbnn_core::training::*;
use ndarray::Axis;

fn main() {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let seeds: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let mut exact = 0;
    for seed in 0..seeds {
        let (ds, mask) = synth_relevance_classification(2000, 10, 20, seed);
        let n_train = 1600;
        let train_idx: Vec<usize> = (0..n_train).collect();
        let prepped = preprocess(&ds, &train_idx).unwrap();
        let xt = prepped.x.select(Axis(0), &train_idx);
        let yt = prepped.y.select(Axis(0), &train_idx);
        let spec = ModelSpec { kind: ModelKind::HorseshoeBnn, task: Task::Classification,
            n_features: 30, n_hidden: 50, b0: 1.0, bg: 1.0, sigma_prior: 1.0 };
        let model = init_model(spec, seed + 1000).unwrap();
        let cfg = TrainConfig { epochs, seed: seed + 2000, ..TrainConfig::default() };
        let (trained, _) = train(&model, xt.view(), yt.view(), &cfg).unwrap();
        let scores = feature_scores(&trained);
        let t = gap_threshold(&scores).unwrap();
        let flags: Vec<bool> = scores.iter().map(|s| *s > t).collect();
        let ok = flags == mask;
        exact += ok as u32;
        let mut rel: Vec<f64> = scores[..10].to_vec();
        let mut noise: Vec<f64> = scores[10..].to_vec();
        rel.sort_by(|a,b| a.partial_cmp(b).unwrap());
        noise.sort_by(|a,b| a.partial_cmp(b).unwrap());
        let ratio = rel[rel.len()/2] / noise[noise.len()/2];
        println!("seed {seed}: exact={ok} median_ratio={ratio:.1} min_rel={:.2e} max_noise={:.2e} thr={t:.2e}", rel[0], noise[noise.len()-1]);
    }
    println!("exact recovery in {exact}/{seeds}");
}
