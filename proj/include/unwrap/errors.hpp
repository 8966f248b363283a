#pragma once

#include <stdexcept>
#include <string>

namespace unwrap {

/// Base class for all library errors. The CLI maps these to exit code 1
/// (input/validation) while anything else escapes as exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed file content (bad field count, unparseable number, ...).
/// Messages carry the 1-based line number where applicable.
struct ParseError : Error {
    using Error::Error;
};

/// Structurally valid input that violates a uniqueness or consistency rule,
/// e.g. duplicate (frame, individual, keypoint) rows.
struct IntegrityError : Error {
    using Error::Error;
};

/// A frame-indexed structure is missing a required entry.
struct GapError : Error {
    GapError(const std::string& msg, int frame) : Error(msg), frame(frame) {}
    int frame;
};

/// Input geometry does not determine a result (collinear plane fit,
/// coincident point sets, ...).
struct DegenerateGeometryError : Error {
    using Error::Error;
};

/// Quaternion input is not unit length beyond tolerance.
struct NormalizationError : Error {
    using Error::Error;
};

/// Iterative distortion inversion failed to converge.
struct DistortionError : Error {
    using Error::Error;
};

/// Viewing ray parallel to the target plane.
struct ParallelRayError : Error {
    using Error::Error;
};

/// Ray-plane intersection lies behind the camera.
struct BehindCameraError : Error {
    using Error::Error;
};

/// Pose requested outside the keyframe span.
struct ExtrapolationError : Error {
    using Error::Error;
};

/// No consecutive landmark co-visibility anywhere; no chain can be built.
struct EmptyChainError : Error {
    using Error::Error;
};

/// Reconstruction document is missing required fields.
struct SchemaError : Error {
    using Error::Error;
};

/// Shot name does not carry a parseable frame number.
struct NamingError : Error {
    using Error::Error;
};

/// Invalid configuration value or combination.
struct ConfigError : Error {
    using Error::Error;
};

/// Filesystem failure (missing file, unwritable path).
struct IoError : Error {
    using Error::Error;
};

/// Scene motion not expressible in the requested closed form.
struct NotRepresentableError : Error {
    using Error::Error;
};

}  // namespace unwrap
