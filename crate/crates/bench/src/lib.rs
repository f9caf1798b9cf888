//! Fixtures shared by the benchmarks.

use orderprop_core::lna::ReactionNetwork;
use orderprop_core::stoch::Diffusion;
use orderprop_core::{Interval, SystemModel};

pub fn toggle() -> SystemModel {
    let p: Vec<(&str, f64)> = ["p1", "p2", "p3", "p4", "p5", "p6"].iter().map(|k| (*k, 1.0)).collect();
    SystemModel::new(
        2,
        1,
        &["p1/(1 + x2/p2) - p3*x1 + u1", "p4/(1 + x1/p5) - p6*x2"],
        &p,
        vec![Interval::new(0.0, 10.0), Interval::new(0.1, 10.0)],
        vec![Interval::new(0.0, 1.0)],
    )
    .expect("toggle switch parses")
}

/// Three-species unimolecular chain with degradation at every stage.
pub fn cascade() -> SystemModel {
    SystemModel::new(
        3,
        0,
        &["-1.5*x1", "x1 - 0.8*x2", "0.5*x2 - 0.2*x3"],
        &[],
        vec![Interval::new(0.0, 5.0); 3],
        vec![],
    )
    .expect("cascade parses")
}

pub fn ou() -> Diffusion {
    Diffusion::parse(&["-x1"], &[&["1"]], &[], vec![Interval::new(-20.0, 20.0)]).expect("OU parses")
}

pub fn chain() -> ReactionNetwork {
    ReactionNetwork::from_json(
        r#"{"species":["X1","X2"],"reactions":[
            {"change":[-1,0],"rate":"k1*x1"},{"change":[-1,1],"rate":"k*x1"},{"change":[0,-1],"rate":"k2*x2"}],
          "params":{"k":1.0,"k1":0.5,"k2":0.3}}"#,
    )
    .expect("chain parses")
}
