//! Fixed-point logistic activation.

/// Fractional bits of the pre-activation fed to the table (Q4.4).
pub const PREACT_FRACTION_BITS: u32 = 4;

/// `round_half_even(256 * sigmoid(x))` clamped to 255, for
/// `x = (i - 128) / 16`, i.e. signed Q4.4 pre-activations in `[-8, 8)`.
/// Output is unsigned Q0.8.
#[rustfmt::skip]
static SIGMOID_Q4_4_TO_Q0_8: [u8; 256] = [
      0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,
      0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   1,   1,   1,
      1,   1,   1,   1,   1,   1,   1,   1,   1,   1,   1,   1,   1,   1,   2,   2,
      2,   2,   2,   2,   2,   2,   2,   3,   3,   3,   3,   3,   4,   4,   4,   4,
      5,   5,   5,   6,   6,   6,   7,   7,   8,   8,   8,   9,  10,  10,  11,  11,
     12,  13,  14,  15,  15,  16,  17,  18,  19,  21,  22,  23,  24,  26,  27,  29,
     31,  32,  34,  36,  38,  40,  42,  44,  47,  49,  52,  54,  57,  60,  63,  66,
     69,  72,  75,  79,  82,  86,  89,  93,  97, 100, 104, 108, 112, 116, 120, 124,
    128, 132, 136, 140, 144, 148, 152, 156, 159, 163, 167, 170, 174, 177, 181, 184,
    187, 190, 193, 196, 199, 202, 204, 207, 209, 212, 214, 216, 218, 220, 222, 224,
    225, 227, 229, 230, 232, 233, 234, 235, 237, 238, 239, 240, 241, 241, 242, 243,
    244, 245, 245, 246, 246, 247, 248, 248, 248, 249, 249, 250, 250, 250, 251, 251,
    251, 252, 252, 252, 252, 253, 253, 253, 253, 253, 254, 254, 254, 254, 254, 254,
    254, 254, 254, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255,
    255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255,
    255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255,
];

/// 256-entry sigmoid lookup used by every hidden and output neuron.
#[derive(Clone, Copy, Debug, Default)]
pub struct SigmoidTable;

impl SigmoidTable {
    pub fn entries(&self) -> &'static [u8; 256] {
        &SIGMOID_Q4_4_TO_Q0_8
    }

    /// Looks up a Q4.4 pre-activation, saturating outside `[-8, 8)`.
    #[inline]
    pub fn lookup(&self, preact_q4_4: i64) -> u8 {
        let index = preact_q4_4.clamp(-128, 127) + 128;
        SIGMOID_Q4_4_TO_Q0_8[index as usize]
    }
}
