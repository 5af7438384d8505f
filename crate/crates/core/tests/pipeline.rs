use prodcat::config::{ModelKind, PipelineConfig, RebalanceMode};
use prodcat::dataset::{generate_synthetic, Dataset, SyntheticConfig};
use prodcat::ensemble::{
    compare_models, predict_products, score_predictions, train_ensemble, TargetModel,
};
use prodcat::Error;

fn data(rows: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_rows: rows,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn quick() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.gbt.n_rounds = 5;
    c.forest.n_estimators = 5;
    c
}

#[test]
fn replacing_one_target_model_leaves_the_others_alone() {
    let d = data(600, 1);
    let model = train_ensemble(&d, &quick()).unwrap();
    let before = predict_products(&model, &d).unwrap();

    let mut swapped = model.clone();
    swapped.models.color = swapped.models.top_category.clone();
    let after = predict_products(&swapped, &d).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.top_category, b.top_category);
        assert_eq!(a.bottom_category, b.bottom_category);
    }
}

#[test]
fn routing_follows_config() {
    let mut cfg = quick();
    cfg.pipeline.top_category = ModelKind::Forest;
    cfg.pipeline.color = ModelKind::Gbt;
    let model = train_ensemble(&data(400, 2), &cfg).unwrap();
    assert!(matches!(model.models.top_category, TargetModel::Forest(_)));
    assert!(matches!(model.models.bottom_category, TargetModel::Knn(_)));
    assert!(matches!(model.models.color, TargetModel::Gbt(_)));
}

#[test]
fn sample_size_caps_training_rows() {
    let mut cfg = quick();
    cfg.knn.sample_size = 100;
    cfg.pipeline.rebalance = RebalanceMode::None;
    let model = train_ensemble(&data(500, 3), &cfg).unwrap();
    match &model.models.bottom_category {
        TargetModel::Knn(m) => assert_eq!(m.train_x.rows(), 100),
        other => panic!("unexpected {:?}", other.kind()),
    }
}

#[test]
fn comparison_covers_every_pair() {
    let d = data(400, 4);
    let reports = compare_models(&d, &d, &quick()).unwrap();
    assert_eq!(reports.len(), 9);
    let pairs: Vec<(String, String)> = reports
        .iter()
        .map(|r| (r.target.clone(), r.model.clone()))
        .collect();
    assert_eq!(pairs[0], ("top_category".into(), "knn".into()));
    assert_eq!(pairs[8], ("color".into(), "gbt".into()));
}

#[test]
fn comparison_agrees_with_the_routed_ensemble() {
    let d = data(400, 5);
    let cfg = quick();
    let model = train_ensemble(&d, &cfg).unwrap();
    let recs = predict_products(&model, &d).unwrap();
    let routed = score_predictions(&model, &recs, &d).unwrap();
    let all = compare_models(&d, &d, &cfg).unwrap();
    for r in &routed {
        let same = all
            .iter()
            .find(|c| c.target == r.target && c.model == r.model)
            .unwrap();
        assert_eq!(same, r);
    }
}

#[test]
fn schema_mismatch_is_rejected() {
    let d = data(300, 6);
    let model = train_ensemble(&d, &quick()).unwrap();
    // drop the price column
    let keep: Vec<usize> = (0..d.schema().len())
        .filter(|&i| d.schema().name(i) != "price")
        .collect();
    let schema = prodcat::dataset::Schema::new(
        keep.iter()
            .map(|&i| (d.schema().name(i).to_owned(), d.schema().kind(i)))
            .collect(),
    )
    .unwrap();
    let cols = keep.iter().map(|&i| d.column(i).clone()).collect();
    let masks = keep.iter().map(|&i| d.column_mask(i).to_vec()).collect();
    let reduced = Dataset::new(schema, cols, masks).unwrap();
    match predict_products(&model, &reduced) {
        Err(Error::MissingColumn(c)) => assert_eq!(c, "price"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn thread_count_does_not_change_the_model() {
    let d = data(500, 7);
    let cfg = quick();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| train_ensemble(&d, &cfg).unwrap());
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| train_ensemble(&d, &cfg).unwrap());
    assert_eq!(
        prodcat::ensemble::to_json(&one).unwrap(),
        prodcat::ensemble::to_json(&four).unwrap()
    );
}
