use super::QuantError;

/// Payload size in bytes for `d` indices of `b` bits.
pub fn packed_len(d: usize, bits: u8) -> usize {
    (d * bits as usize).div_ceil(8)
}

/// Packs `b`-bit indices LSB-first; the last byte is zero-padded.
pub fn encode_bits(indices: &[u8], bits: u8) -> Result<Vec<u8>, QuantError> {
    if !(1..=8).contains(&bits) {
        return Err(QuantError::InvalidBits(bits));
    }
    let limit = 1u16 << bits;
    let mut out = Vec::with_capacity(packed_len(indices.len(), bits));
    let (mut acc, mut filled) = (0u32, 0u32);
    for (index, &i) in indices.iter().enumerate() {
        if u16::from(i) >= limit {
            return Err(QuantError::IndexTooLarge { index, value: i, bits });
        }
        acc |= u32::from(i) << filled;
        filled += u32::from(bits);
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
    Ok(out)
}

/// Inverse of [`encode_bits`]; bytes past the payload are ignored.
pub fn decode_bits(bytes: &[u8], bits: u8, d: usize) -> Result<Vec<u8>, QuantError> {
    if !(1..=8).contains(&bits) {
        return Err(QuantError::InvalidBits(bits));
    }
    let need = packed_len(d, bits);
    if bytes.len() < need {
        return Err(QuantError::TruncatedPayload {
            expected: need,
            actual: bytes.len(),
        });
    }
    let mask = (1u32 << bits) - 1;
    let mut out = Vec::with_capacity(d);
    let (mut acc, mut filled) = (0u32, 0u32);
    let mut next = bytes.iter();
    while out.len() < d {
        while filled < u32::from(bits) {
            acc |= u32::from(*next.next().expect("length checked")) << filled;
            filled += 8;
        }
        out.push((acc & mask) as u8);
        acc >>= bits;
        filled -= u32::from(bits);
    }
    Ok(out)
}
