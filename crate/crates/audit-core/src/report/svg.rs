//! Small shared pieces for self-contained SVG output: inline styles only,
//! generic font families, fixed decimal formatting, no timestamps.

/// Escape text for SVG content and attribute values.
pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fixed two-decimal coordinate formatting keeps output byte-stable.
pub(crate) fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Shared qualitative palette, keyed by concept order.
pub(crate) const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub(crate) fn concept_color(index: usize) -> &'static str {
    PALETTE[index % PALETTE.len()]
}

/// Sequential color ramp (viridis control points, linearly interpolated)
/// over t in [0, 1].
pub(crate) fn sequential_color(t: f64) -> String {
    const STOPS: [[f64; 3]; 9] = [
        [0.267004, 0.004874, 0.329415],
        [0.281412, 0.155834, 0.469201],
        [0.244972, 0.287675, 0.537260],
        [0.190631, 0.407061, 0.556089],
        [0.147607, 0.511733, 0.557049],
        [0.119699, 0.618490, 0.536347],
        [0.208030, 0.718701, 0.472873],
        [0.430983, 0.808473, 0.346476],
        [0.993248, 0.906157, 0.143936],
    ];
    let t = t.clamp(0.0, 1.0);
    let scaled = t * (STOPS.len() - 1) as f64;
    let lo = scaled.floor() as usize;
    let hi = (lo + 1).min(STOPS.len() - 1);
    let frac = scaled - lo as f64;
    let channel = |c: usize| {
        let v = STOPS[lo][c] + frac * (STOPS[hi][c] - STOPS[lo][c]);
        (v * 255.0).round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", channel(0), channel(1), channel(2))
}

/// Readable label color on top of a ramp cell: white on the dark low end.
pub(crate) fn label_color(t: f64) -> &'static str {
    if t < 0.6 {
        "#ffffff"
    } else {
        "#1a1a1a"
    }
}
