use foa_attention::fixmap::FixmapConfig;
use foa_attention::metrics::{self, BaselineMap};
use foa_attention::model::*;
use foa_attention::resize;
use foa_attention::synth::{self, SynthConfig, NUM_CLASSES};
use foa_attention::FixationMap;
use std::time::Instant;

fn eval_kl_subset(
    model: &ModelConfig,
    params: &[BranchParams<f32>],
    subset: &[usize],
    test: &[MultiDomainSample<f32>],
) -> f64 {
    let sub_cfg = ModelConfig {
        branches: subset.iter().map(|&i| model.branches[i].clone()).collect(),
        ..model.clone()
    };
    let sub_params: Vec<BranchParams<f32>> = subset.iter().map(|&i| params[i].clone()).collect();
    let mut kl = 0.0;
    for s in test {
        let clips: Vec<_> = subset
            .iter()
            .map(|&i| resize::resize_clip(&s.clips[i], (model.input_size, model.input_size)).unwrap())
            .collect();
        let out = infer(&sub_cfg, &sub_params, &clips).unwrap();
        let gt = resize::resize_map(&s.map, (model.input_size, model.input_size)).unwrap();
        let pred = FixationMap::new(
            model.input_size, model.input_size,
            out.map.data().iter().map(|v| v + 1e-8).collect(),
        ).unwrap();
        kl += metrics::eval_kl(&gt, &pred, 1e-8).unwrap() / test.len() as f64;
    }
    kl
}

fn main() {
    let start = Instant::now();
    let synth_cfg = SynthConfig::desk_default(11);
    let sequences = synth::generate_all(&synth_cfg).unwrap();
    let mut model = ModelConfig::with_sizes(64, 32, &[
        (BranchDomain::Rgb, 3), (BranchDomain::Flow, 3), (BranchDomain::Seg, NUM_CLASSES),
    ]);
    for b in &mut model.branches {
        b.coarse.widths = vec![8, 12, 16, 16];
    }
    let domains: Vec<BranchDomain> = model.branches.iter().map(|b| b.domain).collect();
    let fix_cfg = FixmapConfig { sigma_sq: synth_cfg.sigma_sq, ..FixmapConfig::default() };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for seq in &sequences {
        let samples = seq.to_samples(&domains, 16, 8, &fix_cfg).unwrap();
        match seq.script.split {
            synth::DatasetSplit::Train => train.extend(samples),
            synth::DatasetSplit::Test => test.extend(samples),
        }
    }

    let steps = [600usize, 400, 300];
    let mut params: Vec<BranchParams<f32>> = Vec::new();
    for (i, b) in model.branches.iter().enumerate() {
        let mut p = BranchParams::<f32>::init(b, 1 + i as u64).unwrap();
        let opts = TrainOptions {
            iterations: steps[i],
            batch_size: 8,
            learning_rate: 1e-3,
            mirror_probability: 0.5,
            crop_policy: CropPolicy::Random,
            seed: 5 + i as u64,
        };
        let log = train_branch(&model, i, &mut p, &train, &opts).unwrap();
        println!("{} branch: {} steps, final loss {:.3} ({:.0}s cum)",
            b.domain.name(), steps[i], log.last().unwrap().total, start.elapsed().as_secs_f64());
        params.push(p);
    }

    let pre_fusion: Vec<f64> = (0..3).map(|i| eval_kl_subset(&model, &params, &[i], &test)).collect();
    println!("single-branch test KL: rgb {:.4} flow {:.4} seg {:.4}", pre_fusion[0], pre_fusion[1], pre_fusion[2]);

    let fuse_opts = TrainOptions {
        iterations: 150,
        batch_size: 4,
        learning_rate: 1e-4,
        mirror_probability: 0.5,
        crop_policy: CropPolicy::Random,
        seed: 99,
    };
    let log = finetune_fusion(&model, &mut params, &train, &fuse_opts).unwrap();
    println!("fusion: final loss {:.3} ({:.0}s cum)", log.last().unwrap().total, start.elapsed().as_secs_f64());

    let fused = eval_kl_subset(&model, &params, &[0, 1, 2], &test);
    let singles_post: Vec<f64> = (0..3).map(|i| eval_kl_subset(&model, &params, &[i], &test)).collect();

    let train_maps: Vec<_> = train.iter().map(|s| resize::resize_map(&s.map, (32, 32)).unwrap()).collect();
    let baseline = BaselineMap::training_mean(&train_maps).unwrap();
    let gt_kl_base: f64 = test.iter().map(|s| {
        let gt = resize::resize_map(&s.map, (32, 32)).unwrap();
        metrics::eval_kl(&gt, &baseline.map, 1e-8).unwrap()
    }).sum::<f64>() / test.len() as f64;

    println!("fused I+F+S test KL {:.4} | baseline {:.4} | singles post {:?}", fused, gt_kl_base, singles_post);
    println!("beats baseline: {} | fused <= best pre-fusion single: {}",
        fused < gt_kl_base, fused <= pre_fusion.iter().cloned().fold(f64::INFINITY, f64::min));
    println!("total {:.0}s", start.elapsed().as_secs_f64());
}
