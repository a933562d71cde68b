use camel_core::corpus::*;
use camel_core::device::*;
use camel_core::neural::*;
use camel_core::predictors::*;
use camel_core::search::*;

fn main() {
    let corpus = generate_corpus(11, 40, &SizeProfile::default()).unwrap();
    let dev = preset_device("xiaomi9").unwrap();
    let train: Corpus = Corpus { seed: 11, pages: corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 != 0).map(|(_,p)| p.clone()).collect() };
    let sample: Vec<&PageDescriptor> = train.pages.iter().take(20).collect();
    let frontier = build_frontier(&dev, &sample, &[500.0, 1500.0, 3000.0], &erf_ladder_desk(), 1).unwrap();
    let cfg = PredictorConfig::desk(11);
    let fps = train_fps_predictor(&train, &dev, &frontier, &cfg, 1).unwrap();
    let model = fps.model(GestureKind::Scroll).unwrap();

    // train-set MAE (on the exact training grid)
    let settings = training_settings(&dev, &frontier, cfg.max_settings);
    let data = build_fps_dataset(&train, &dev, GestureKind::Scroll, &cfg.speeds.scroll, &settings, &cfg.erfs, &model.pipeline, &fps.scale).unwrap();
    let mut train_mae = 0.0;
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        train_mae += (model.network.forward(x).unwrap() - y).abs();
    }
    println!("train MAE = {:.2} over {} samples", train_mae / data.len() as f64, data.len());

    // held-out MAE split by dom vs train max dom
    let max_train_dom = train.pages.iter().map(|p| p.dom_node_count).max().unwrap();
    let mut small = (0.0, 0usize); let mut large = (0.0, 0usize);
    for page in corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 == 0).map(|(_,p)| p) {
        let sidx = page.slice_index_at(page.page_height_px/2).unwrap();
        let slice = &page.viewport_profiles[sidx];
        let feats = model.pipeline.features(page, sidx).unwrap();
        for &speed in &[400.0, 1200.0, 2000.0] {
            let g = Gesture::new(GestureKind::Scroll, speed, 1.0).unwrap();
            for e in &frontier.entries {
                let input = FpsInput { viewport_features: feats.clone(), speed_px_s: speed, config: e.config.clone(), render_cluster: e.config.render_placement };
                let p = fps.predict_fps(GestureKind::Scroll, &input).unwrap();
                let t = dev.true_fps(page, slice, &g, &e.config, e.config.render_placement).unwrap();
                let bucket = if page.dom_node_count as f64 > 0.8 * max_train_dom as f64 { &mut large } else { &mut small };
                bucket.0 += (p - t).abs(); bucket.1 += 1;
            }
        }
    }
    println!("held-out MAE: typical pages {:.2} (n={})  near/over-train-max pages {:.2} (n={})", small.0/small.1 as f64, small.1, large.0/large.1.max(1) as f64, large.1);
    println!("max train dom = {max_train_dom}");
}
