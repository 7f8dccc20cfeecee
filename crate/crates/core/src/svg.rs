//! Minimal SVG frames for boundary snapshots.

use crate::geometry::NodeContour;

/// Render contours as closed polylines in a square viewport.
pub fn contours_to_svg(contours: &[(&NodeContour, &str)], half_extent: f64) -> String {
    let size = 720.0;
    let scale = size / (2.0 * half_extent);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" \
         viewBox=\"0 0 {size} {size}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    for (c, color) in contours {
        s.push_str(&format!(
            "<polygon fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\""
        ));
        for p in c.nodes() {
            let x = (p.x + half_extent) * scale;
            let y = (half_extent - p.y) * scale;
            s.push_str(&format!("{x:.2},{y:.2} "));
        }
        s.push_str("\"/>\n");
    }
    s.push_str("</svg>\n");
    s
}
