#pragma once

#include <stdexcept>
#include <string>

namespace stegdiff {

/// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A precondition or argument check failed.
struct validation_error : error {
    using error::error;
};

/// Payload does not fit into dims * Q bits.
struct capacity_error : error {
    using error::error;
};

/// Symbol stream contains values outside [0, 2^Q).
struct malformed_stream_error : error {
    using error::error;
};

/// A numeric routine was called outside its domain.
struct domain_error : error {
    using error::error;
};

/// The ODE integration produced a non-finite state.
struct divergence_error : error {
    int step_index;
    divergence_error(const std::string& msg, int step)
        : error(msg), step_index(step) {}
};

/// File or serialization problem.
struct io_error : error {
    using error::error;
};

/// Sender/receiver configuration mismatch (e.g. schedule fingerprints differ).
struct mismatch_error : error {
    using error::error;
};

} // namespace stegdiff
