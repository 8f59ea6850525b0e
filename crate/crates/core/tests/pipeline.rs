use mtrank_core::desk;
use mtrank_core::ranker::train::{dev_tau, run_pipeline, Stage, StageData, TrainConfig};
use mtrank_core::ranker::{PairFeatures, RankerModel};
use mtrank_core::types::{EvaluationSample, Provenance};

fn tau(model: &RankerModel, dev: &[EvaluationSample]) -> f64 {
    let f: Vec<PairFeatures> = dev.iter().map(PairFeatures::from_sample).collect();
    dev_tau(model, &f).unwrap()
}

fn cfg(order: Vec<Stage>) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.5,
        batch_size: 32,
        max_steps: 600,
        eval_every: 50,
        early_stop_patience: None,
        rng_seed: 11,
        stage_order: order,
    }
}

#[test]
fn separable_three_stage_reaches_high_tau() {
    let data = StageData::default()
        .with(Stage::Nli, desk::separable_samples(300, 1, Provenance::Nli))
        .with(Stage::RefDiscrimination, desk::separable_samples(300, 2, Provenance::RefDiscrimination))
        .with(Stage::Synthetic, desk::separable_samples(300, 3, Provenance::Perturbation));
    let dev = desk::separable_samples(200, 4, Provenance::Darr);
    let c = cfg(vec![Stage::Nli, Stage::RefDiscrimination, Stage::Synthetic]);
    let a = run_pipeline(&RankerModel::zeros(), &data, &dev, &c).unwrap();
    let b = run_pipeline(&RankerModel::zeros(), &data, &dev, &c).unwrap();
    assert_eq!(a.model, b.model);
    let t = tau(&a.model, &dev);
    assert!(t >= 0.95);
}

#[test]
fn each_stage_contributes_on_desk_corpus() {
    use Stage::*;
    let data = desk::stage_data(200, 5).unwrap();
    let dev = desk::dev_samples(60, 5);
    let run = |order: Vec<Stage>| {
        let r = run_pipeline(&RankerModel::zeros(), &data, &dev, &cfg(order)).unwrap();
        tau(&r.model, &dev)
    };
    let full = run(vec![Nli, RefDiscrimination, Synthetic]);
    let ablations = [
        run(vec![RefDiscrimination, Synthetic]),
        run(vec![Nli, Synthetic]),
        run(vec![Nli, RefDiscrimination]),
    ];
    for a in ablations {
        assert!(full > a, "full {full} vs ablation {a}");
    }
    let human = run(vec![Nli, RefDiscrimination, Synthetic, HumanDarr]);
    assert!(human >= full);
}
