//! Byte-level tokenizer: ids 0..=255 are raw bytes, then BOS and EOS.

pub const BOS: u32 = 256;
pub const EOS: u32 = 257;
pub const BYTE_VOCAB_SIZE: usize = 258;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub fn vocab_size(&self) -> usize {
        BYTE_VOCAB_SIZE
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.bytes().map(u32::from).collect()
    }

    /// Bytes of `ids`, skipping special tokens.
    pub fn decode_bytes(&self, ids: &[u32]) -> Vec<u8> {
        ids.iter()
            .filter(|&&t| t < 256)
            .map(|&t| t as u8)
            .collect()
    }

    /// Human-readable rendering of a single token id.
    pub fn token_text(&self, id: usize) -> String {
        match id as u32 {
            BOS => "<bos>".into(),
            EOS => "<eos>".into(),
            b if b < 256 => {
                let c = b as u8;
                if c.is_ascii_graphic() || c == b' ' {
                    (c as char).to_string()
                } else {
                    format!("<0x{c:02X}>")
                }
            }
            _ => format!("<{id}>"),
        }
    }
}
