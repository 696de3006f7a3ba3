//! Text formatting shared by every CSV writer.

/// Scientific notation with 17 significant digits, enough to round-trip any
/// f64 and independent of locale.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.0, -0.0, 1.0 / 3.0, 652.315_720_808_871_5, 1e-300, f64::MAX] {
            let s = float17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(float17(0.5), "5.0000000000000000e-1");
    }
}
