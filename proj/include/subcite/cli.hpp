#pragma once

#include <iosfwd>

#include <cstddef>
#include <vector>

#include "subcite/augment.hpp"
#include "subcite/config.hpp"
#include "subcite/store.hpp"

namespace subcite::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Seeds used by `generate`: annotated instances taken one type at a time,
/// ids ascending within each type.
std::vector<QAInstance> pick_seeds(const service::State& state, std::size_t n);

/// Expansion settings `generate` derives from the config; the target pool is
/// every distinct context in the store.
augment::ExpandOptions expand_options(const Config& config, const service::State& state);

/// Entry point of the `subcite` binary. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

}  // namespace subcite::cli
