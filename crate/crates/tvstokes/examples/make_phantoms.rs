//! Regenerates the phantom test images under `assets/`.
//!
//! ```sh
//! cargo run -p tvstokes --example make_phantoms -- [size] [out_dir]
//! ```

use tvstokes::io::save_image;
use tvstokes::phantom::{phantom_ramp_edges, phantom_shapes};

fn main() {
    let mut args = std::env::args().skip(1);
    let size: usize = args
        .next()
        .map(|s| s.parse().expect("size must be an integer"))
        .unwrap_or(64);
    let out_dir = std::path::PathBuf::from(args.next().unwrap_or_else(|| "assets".into()));
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    for (name, field) in [
        ("phantom_shapes.png", phantom_shapes(size, size)),
        ("phantom_ramp_edges.png", phantom_ramp_edges(size, size)),
    ] {
        let path = out_dir.join(name);
        save_image(&field, &path).expect("write phantom");
        println!("wrote {}", path.display());
    }
}
