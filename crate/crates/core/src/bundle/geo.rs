const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Move `distance_m` from a point along `heading_rad` (0 = north, clockwise).
/// Flat-earth step; only used for short synthetic paths.
pub fn offset(lat: f64, lon: f64, heading_rad: f64, distance_m: f64) -> (f64, f64) {
    let dlat = distance_m * heading_rad.cos() / EARTH_RADIUS_M;
    let dlon = distance_m * heading_rad.sin() / (EARTH_RADIUS_M * lat.to_radians().cos());
    (lat + dlat.to_degrees(), lon + dlon.to_degrees())
}
