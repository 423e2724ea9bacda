//! Writes the eight bundled meshes as OBJ files and prints their sizes.
//!
//! ```text
//! cargo run --release --example bundled_meshes -- [out_dir]
//! ```

use std::path::PathBuf;

use pcpnet::dataset::shapes::{bundled_corpus, signed_volume};

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/meshes".into()));
    std::fs::create_dir_all(&out).unwrap();
    for (name, mesh) in bundled_corpus() {
        let path = out.join(format!("{name}.obj"));
        mesh.write_obj(&path).unwrap();
        println!(
            "{:<12} {:>6} vertices {:>6} faces  diagonal {:.3}  volume {:.4}  -> {}",
            name,
            mesh.vertices.len(),
            mesh.faces.len(),
            mesh.bbox_diagonal(),
            signed_volume(&mesh),
            path.display()
        );
    }
}
