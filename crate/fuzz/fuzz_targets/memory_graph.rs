#![no_main]

use libfuzzer_sys::fuzz_target;
use montage_core::graph::MemoryGraph;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(graph) = MemoryGraph::from_json(&text) {
        MemoryGraph::from_json(&graph.to_json()).expect("serialized graph reloads");
    }
});
