#pragma once

#include <stdexcept>
#include <string>

namespace vtok {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dimension or element-count mismatch between related containers.
struct shape_error : error {
    using error::error;
};

// Index sets that must partition the token range overlap or leave gaps.
struct partition_error : error {
    using error::error;
};

// A token with zero norm cannot take part in cosine similarity.
struct degenerate_token_error : error {
    using error::error;
};

// Invalid user-supplied configuration.
struct config_error : error {
    using error::error;
};

}  // namespace vtok
