#![no_main]

use libfuzzer_sys::fuzz_target;
use satsync::io::GraphSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<GraphSpec>(data) else { return };
    if spec.n > 64 {
        return;
    }
    let Ok(g) = spec.to_graph() else { return };
    let analysis = g.analyze();
    for &theta in &analysis.root_set {
        let _ = analysis.dbar(theta, &analysis.default_bounds());
    }
    assert_eq!(GraphSpec::from_graph(&g).to_graph().expect("echo builds"), g);
});
