// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fwgan {

/// Invalid experiment configuration or unusable input file. Maps to CLI exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss, or an iterative solver failed to
/// converge. Carries a diagnostic dump in what(). Maps to CLI exit code 3.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fwgan
