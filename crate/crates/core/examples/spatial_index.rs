//! Radius queries on the k-d tree agree with a brute-force scan.

use lpfc::data::gen_shape;
use lpfc::patch::SpatialIndex;
use std::time::Instant;

fn main() -> lpfc::Result<()> {
    let cloud = gen_shape("cube".parse()?, 50_000, 7)?;
    let t = Instant::now();
    let index = SpatialIndex::build(&cloud.points)?;
    println!("built index over {} points in {:.1?}", index.len(), t.elapsed());
    let r = 0.03 * cloud.bbox_diagonal();
    let t = Instant::now();
    let mut total = 0;
    for c in (0..cloud.len()).step_by(100) {
        let mut tree = index.radius_query(cloud.points[c], r);
        let mut brute: Vec<usize> = (0..cloud.len())
            .filter(|&j| (0..3).map(|a| (cloud.points[j][a] - cloud.points[c][a]).powi(2)).sum::<f64>() <= r * r)
            .collect();
        tree.sort_unstable();
        brute.sort_unstable();
        assert_eq!(tree, brute);
        total += tree.len();
    }
    println!("500 queries of radius {r:.4} matched brute force; mean neighbourhood {} points ({:.1?})", total / 500, t.elapsed());
    Ok(())
}
