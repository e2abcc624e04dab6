//! Writes the bundled fixture grasps to `assets/` in canonical JSON, the
//! format the CLI reads. Run from the repository root:
//!
//! ```text
//! cargo run -p graspstab --example write_demo_grasps
//! ```

use nalgebra::Vector2;

use graspstab::fixtures;
use graspstab::grasp::{GraspModel, PlanarContact, PlanarGrasp};
use graspstab::io::{canonical_json, SolveDefaults};

fn main() -> std::io::Result<()> {
    let dir = std::path::Path::new("assets");
    std::fs::create_dir_all(dir)?;

    // A planar object held at three points; preloads make the side pinch
    // active. The planar solver enumerates its contact states exactly.
    let planar = PlanarGrasp {
        contacts: vec![
            contact(-0.05, 0.0, 1.0, 0.0, 1.0),
            contact(0.0, -0.05, 0.0, 1.0, 0.0),
            contact(0.05, 0.0, -1.0, 0.0, 1.0),
        ],
    };
    // The pinch pads only resist pull-out when the drives are preloaded;
    // 0.1 Nm per joint puts the pads at ≈1.11 N each.
    let mut package = fixtures::package_grasp();
    package.hand.commanded = nalgebra::DVector::from_vec(vec![0.1, 0.1]);

    let spatial = [
        ("two_finger_box.json", fixtures::two_finger_box()),
        ("package.json", package),
        ("cube.json", fixtures::cube_grasp()),
    ];

    write(dir, "pinch2d.json", &GraspModel::Planar(planar))?;
    for (name, grasp) in spatial {
        write(dir, name, &GraspModel::Spatial(grasp))?;
    }
    Ok(())
}

fn contact(px: f64, py: f64, nx: f64, ny: f64, preload: f64) -> PlanarContact {
    PlanarContact {
        position: Vector2::new(px, py),
        normal: Vector2::new(nx, ny),
        mu: 0.5,
        preload,
        stiffness: 1.0,
    }
}

fn write(dir: &std::path::Path, name: &str, model: &GraspModel) -> std::io::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, canonical_json(model, &SolveDefaults::default()))?;
    println!("wrote {}", path.display());
    Ok(())
}
