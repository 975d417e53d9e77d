//! Synthetic drone-protocol corpus: Zadoff-Chu preambles, OFDM/FHSS frame
//! bodies and AWGN channels, plus the on-disk record format.

mod iqfile;
mod profile;
mod synth;
mod zc;

pub use iqfile::{
    decode_iq, encode_iq, read_iq, read_manifest, write_iq, write_manifest, ManifestEntry, IQ_HEADER_LEN, IQ_MAGIC,
};
pub use profile::{
    desk_candidates, desk_profiles, validate_profile_set, ProtocolProfile, ZcRoot, DESK_ID_CLASSES,
    SHARED_SECONDARY,
};
pub use synth::{
    add_awgn, seeded_rng, synth_frame, synth_record, synth_record_detailed, synth_record_seeded, ChannelConfig,
    Distance, IqRecord, Los, RecordMeta, SynthOutput, DESK_RECORD_LEN, DESK_SAMPLE_RATE, NLOS_PENALTY_DB,
    NLOS_TILT_DB,
};
pub use zc::{gen_zc, upsample_zc, zc_reference};
