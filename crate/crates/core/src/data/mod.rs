//! Point clouds: the PCPNet-style text layout, synthetic shapes with analytic
//! normals, noise and density perturbations, and PLY export.

mod cloud;
pub mod io;
pub mod perturb;
pub mod ply;
pub mod synth;

pub use cloud::{bbox_diagonal, PointCloud, Vec3};
pub use io::{load_cloud, load_normals, load_pidx, load_split, load_xyz, save_cloud};
pub use perturb::{add_noise, apply_density, DensityPattern, NoiseSpec};
pub use ply::{write_ply, Coloring};
pub use synth::{gen_shape, ShapeKind};
