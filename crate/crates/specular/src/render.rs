//! Placeholder, filled in by the build steps that follow.
