use dynavis::config::RunConfig;
use dynavis::pipeline::run;
use dynavis::synth::{frames, presets, SceneSpec};

fn dynamic_stage_mean(mut spec: SceneSpec, n: usize) -> (f64, usize) {
    spec.frames = n;
    let out = run(&RunConfig::default(), frames(&spec), false).unwrap();
    let tracks = out.tracks.iter().filter(|r| r.frame_index == n - 1).count();
    (out.timing.mean("dynamic"), tracks)
}

#[test]
fn dynamic_stage_cost_grows_with_tracked_objects() {
    let (one, n1) = dynamic_stage_mean(presets::constant_walker(), 10);
    let (two, n2) = dynamic_stage_mean(presets::crossing_people(), 10);
    assert_eq!((n1, n2), (1, 2));
    assert!(two >= one, "two objects {two:.5} s, one {one:.5} s");
}
