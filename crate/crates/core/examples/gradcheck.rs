//! Compares analytic gradients with central differences on a reduced model
//! in f64 and prints the error per layer type.
//!
//! ```text
//! cargo run --release --example gradcheck
//! ```

use pcpnet::network::{ModelConfig, OutputSpec};
use pcpnet::training::gradcheck::{gradcheck, GradcheckConfig};

fn main() {
    for output in [OutputSpec::UnorientedNormal, OutputSpec::OrientedNormal, OutputSpec::Curvature, OutputSpec::Joint] {
        let config = GradcheckConfig { model: ModelConfig::tiny(output), ..GradcheckConfig::default() };
        let report = gradcheck(&config).unwrap();
        println!("{output:?}: {} coordinates checked, {} skipped at kinks", report.checked, report.skipped);
        for layer in &report.layers {
            println!("  {:<22} {:>5} params {:>5} nonzero  max rel error {:.2e}", layer.layer, layer.params, layer.nonzero, layer.max_relative_error);
        }
    }
}
