//! Generates a small dataset from analytic shapes and one bundled mesh, with
//! noise and density variants, and lists the resulting stems.
//!
//! ```text
//! cargo run --release --example generate_dataset -- [out_dir]
//! ```

use std::path::PathBuf;

use pcpnet::dataset::shapes::cuboid;
use pcpnet::dataset::{generate_dataset, AnalyticShape, DensityScheme, GenerateOptions, ShapeSpec};
use pcpnet::Vec3;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example_dataset".into()));
    std::fs::create_dir_all(&out).unwrap();
    let mesh_path = out.join("box.obj");
    cuboid(Vec3::new(1.0, 0.5, 0.25), 12).write_obj(&mesh_path).unwrap();
    let shapes = [
        ShapeSpec::analytic("sphere", AnalyticShape::Sphere { radius: 1.0 }),
        ShapeSpec::analytic("cylinder", AnalyticShape::Cylinder { radius: 0.5, height: 2.0 }),
        ShapeSpec::mesh("box", &mesh_path),
    ];
    let opts = GenerateOptions {
        points: 20_000,
        density: vec![DensityScheme::Gradient, DensityScheme::Stripes],
        seed: 1,
        ..GenerateOptions::default()
    };
    let outcome = generate_dataset(&shapes, &opts, &out).unwrap();
    for (name, err) in &outcome.failures {
        eprintln!("{name}: {err}");
    }
    for v in &outcome.manifest.variants {
        println!("{:<28} {:>6} points  curvatures: {}", v.stem, v.points, v.curvatures);
    }
}
