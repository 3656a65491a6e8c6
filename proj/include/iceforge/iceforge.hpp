#pragma once

// Umbrella header for the iceforge build orchestrator library.

#include "iceforge/errors.hpp"
#include "iceforge/fstree.hpp"
#include "iceforge/verspec.hpp"
#include "iceforge/manifest.hpp"
#include "iceforge/patchkit.hpp"
#include "iceforge/planner.hpp"
#include "iceforge/emitter.hpp"
#include "iceforge/executor.hpp"

namespace iceforge {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kManifestGrammarVersion = "1";

} // namespace iceforge
