use camel_core::corpus::*;
use camel_core::device::*;
use camel_core::harness::*;
use camel_core::predictors::*;
use camel_core::search::*;

fn main() {
    let corpus = generate_corpus(11, 40, &SizeProfile::default()).unwrap();
    let cfg = PredictorConfig::desk(11);
    let dev = preset_device("xiaomi9").unwrap();
    let train: Corpus = Corpus { seed: 11, pages: corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 != 0).map(|(_,p)| p.clone()).collect() };
    let sample: Vec<&PageDescriptor> = train.pages.iter().take(20).collect();
    let frontier = build_frontier(&dev, &sample, &[500.0, 1500.0, 3000.0], &cfg.erfs, 1).unwrap();
    let user = group_representative(UserGroup::Moderate);
    let qoe = train_qoe_predictor(&train, &user, &cfg, 1).unwrap();
    let fps = train_fps_predictor(&train, &dev, &frontier, &cfg, 1).unwrap();

    // per-window diagnostics on the first few held-out pages
    let mut under_target = 0; let mut over_fps = 0; let mut n = 0;
    let mut sum_target_err = 0.0; let mut sum_fps_err = 0.0;
    for (pi, page) in corpus.pages.iter().enumerate().filter(|(i,_)| i % 5 == 0).take(8) {
        let gesture = Gesture::new(GestureKind::Scroll, 1200.0, 2.0).unwrap();
        let mut offset = 0u32;
        let mut prev = Cluster::Big;
        for _w in 0..40 {
            let slice = page.slice_at(offset).unwrap();
            let thr = user.threshold(page, slice, gesture.kind, gesture.speed_px_s);
            let qin = qoe.input_for(gesture.kind, page, offset, gesture.speed_px_s).unwrap();
            let target = qoe.predict_min_fps(gesture.kind, &qin).unwrap();
            let out = search_min_energy(target, &frontier, |c| {
                let sidx = page.slice_index_at(offset).unwrap();
                let m = fps.model(gesture.kind).unwrap();
                let f = m.pipeline.features(page, sidx).unwrap();
                m.network.forward(&encode_fps_input(&FpsInput{viewport_features: f, speed_px_s: gesture.speed_px_s, config: c.clone(), render_cluster: prev}, &fps.scale))
            }).unwrap();
            let true_f = dev.true_fps(page, slice, &gesture, &out.config, prev).unwrap();
            n += 1;
            sum_target_err += target - thr;
            sum_fps_err += out.predicted_fps - true_f;
            if target < thr { under_target += 1; }
            if out.predicted_fps > true_f + 0.5 { over_fps += 1; }
            if pi == 0 && _w < 8 {
                println!("w{_w}: thr={thr:.1} target={target:.1} cfg={} pred_fps={:.1} true_fps={true_f:.1} met={}", out.config.notation(), out.predicted_fps, out.met);
            }
            prev = out.config.render_placement;
            offset = ((offset as f64) + 1200.0*0.05).min((page.page_height_px-1) as f64) as u32;
        }
    }
    println!("windows={n} target<thr: {under_target} ({:.0}%)  pred_fps>true+0.5: {over_fps} ({:.0}%)", 100.0*under_target as f64/n as f64, 100.0*over_fps as f64/n as f64);
    println!("mean target-thr = {:.2}  mean predfps-truefps = {:.2}", sum_target_err/n as f64, sum_fps_err/n as f64);
}
