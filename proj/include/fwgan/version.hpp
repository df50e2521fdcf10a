// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace fwgan {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace fwgan
