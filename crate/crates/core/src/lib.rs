pub mod crosswalk;
pub mod datetime;
pub mod federation;
pub mod harvester;
pub mod index;
pub mod oaipmh;
pub mod record;
pub mod snapshot;
pub mod store;
pub mod synth;
