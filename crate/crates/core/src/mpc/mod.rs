//! Two-party additive secret sharing with a trusted dealer.

pub mod dealer;
pub mod party;
pub mod provision;
pub mod share;
pub mod sim;
pub mod transcript;
pub mod transport;
pub mod wire;

pub use dealer::{BeaverTriple, Dealer, MaterialKind, RandomBitShare, Requirements, TruncationPair};
pub use party::Party;
pub use share::{local_linear, reconstruct, reconstruct_vec, share, share_vec, PartyId, SessionId, Share, ShareVec};
pub use transcript::{ProtoStats, Transcript};
