#![allow(dead_code)]

use std::path::{Path, PathBuf};

use elsascreen::features::{InputLayout, ModelDescriptor, Provenance, Runtime, StubMode, StubWeights};
use elsascreen::pipeline::PipelineConfig;

pub const STUB_DIM: usize = 64;

/// Writes a stub weights file and a descriptor pointing at it.
pub fn stub_descriptor(dir: &Path, name: &str, mode: StubMode, seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let weights = dir.join(format!("{name}.weights.json"));
    StubWeights::new("pool", STUB_DIM, mode, seed).save(&weights).unwrap();
    let desc = ModelDescriptor {
        name: name.to_string(),
        weights_path: weights,
        runtime: Runtime::Stub,
        input_side: 224,
        input_layout: InputLayout::Nchw,
        feature_layer: "pool".into(),
        feature_dim: STUB_DIM,
        channel_means: [127.5; 3],
        channel_scales: [127.5; 3],
        provenance: Provenance::ImagenetPretrained,
    };
    let path = dir.join(format!("{name}.toml"));
    desc.save(&path).unwrap();
    path
}

pub fn stub_config(work: &Path, manifest: &Path, static_mode: StubMode, motion_mode: StubMode) -> PipelineConfig {
    let descs = work.join("descriptors");
    let s = stub_descriptor(&descs, &format!("stub-static-{static_mode:?}"), static_mode, 11);
    let m = stub_descriptor(&descs, &format!("stub-motion-{motion_mode:?}"), motion_mode, 23);
    let mut cfg = PipelineConfig::new(manifest, &s, &m, &work.join("cache"));
    cfg.models_dir = work.join("models");
    cfg.output_dir = work.join("out");
    cfg.seed = 42;
    cfg.workers = 2;
    cfg
}

/// Every regular file under `dir` with its bytes, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = std::fs::read(&p).unwrap();
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}
