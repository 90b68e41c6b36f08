//! Driving-license identifiers share the Spanish DNI layout: eight decimal
//! digits followed by a control letter chosen by the number modulo 23.

pub const CONTROL_LETTERS: &[u8; 23] = b"TRWAGMYFPDXBNJZSQVHLCKE";

pub fn control_letter(number: u32) -> char {
    CONTROL_LETTERS[(number % 23) as usize] as char
}

/// True when `id` is 8 ASCII digits plus the matching uppercase control letter.
pub fn is_well_formed(id: &str) -> bool {
    let bytes = id.as_bytes();
    if bytes.len() != 9 || !bytes[..8].iter().all(u8::is_ascii_digit) {
        return false;
    }
    let number: u32 = id[..8].parse().expect("eight ascii digits");
    bytes[8] as char == control_letter(number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_good_and_bad() {
        assert!(is_well_formed("12345678Z"));
        assert!(!is_well_formed("12345678A"));
        assert!(!is_well_formed("12345678z"));
        assert!(!is_well_formed("1234567Z"));
        assert!(!is_well_formed("123456789Z"));
        assert!(!is_well_formed("1234567AZ"));
        assert!(!is_well_formed(""));
        assert!(is_well_formed("00000000T"));
    }

    #[test]
    fn non_ascii_is_rejected_without_panicking() {
        assert!(!is_well_formed("1234567\u{e9}"));
        assert!(!is_well_formed("１２３４５６７８Z"));
    }
}
