/// Radians per degree.
pub const DEG: f64 = std::f64::consts::PI / 180.0;

pub const SECONDS_PER_MINUTE: f64 = 60.0;

pub fn to_deg(rad: f64) -> f64 {
    rad / DEG
}
