//! CRC-16/CCITT over bit frames (polynomial 0x1021, initial value 0xFFFF,
//! MSB first).

pub const CRC_BITS: usize = 16;
const POLY: u16 = 0x1021;

pub fn crc16(bits: &[u8]) -> u16 {
    let mut reg: u16 = 0xFFFF;
    for &b in bits {
        let top = (reg >> 15) as u8 ^ (b & 1);
        reg <<= 1;
        if top == 1 {
            reg ^= POLY;
        }
    }
    reg
}

/// Appends the 16 checksum bits, MSB first.
pub fn crc_attach(info: &[u8]) -> Vec<u8> {
    let crc = crc16(info);
    let mut out = info.to_vec();
    out.extend((0..CRC_BITS).rev().map(|i| ((crc >> i) & 1) as u8));
    out
}

/// True when the trailing 16 bits match the checksum of the rest.
pub fn crc_check(frame: &[u8]) -> bool {
    if frame.len() < CRC_BITS {
        return false;
    }
    let (body, tail) = frame.split_at(frame.len() - CRC_BITS);
    let crc = crc16(body);
    tail.iter()
        .enumerate()
        .all(|(i, &b)| b == ((crc >> (CRC_BITS - 1 - i)) & 1) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalcore::RandomStream;

    #[test]
    fn known_check_value() {
        // "123456789" under CRC-16/CCITT-FALSE is 0x29B1
        let bits: Vec<u8> = b"123456789"
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
            .collect();
        assert_eq!(crc16(&bits), 0x29B1);
    }

    #[test]
    fn detects_single_flips() {
        let mut rs = RandomStream::new(3, 0);
        let info: Vec<u8> = (0..496).map(|_| rs.bit()).collect();
        let frame = crc_attach(&info);
        assert!(crc_check(&frame));
        for i in 0..frame.len() {
            let mut f = frame.clone();
            f[i] ^= 1;
            assert!(!crc_check(&f), "flip at {i} undetected");
        }
    }

    #[test]
    fn two_bit_flips_rarely_undetected() {
        let mut rs = RandomStream::new(4, 0);
        let mut undetected = 0;
        for _ in 0..5000 {
            let info: Vec<u8> = (0..496).map(|_| rs.bit()).collect();
            let mut f = crc_attach(&info);
            let i = rs.index(f.len());
            let mut j = rs.index(f.len());
            while j == i {
                j = rs.index(f.len());
            }
            f[i] ^= 1;
            f[j] ^= 1;
            if crc_check(&f) {
                undetected += 1;
            }
        }
        assert_eq!(undetected, 0);
    }
}
